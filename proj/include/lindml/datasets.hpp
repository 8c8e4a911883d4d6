#pragma once

// Labeled raw-feature datasets: synthetic generation, CSV I/O, disjoint class
// splits and oversampling to equal class sizes.
//
// Labels are 0-based internally and always canonical: class ids are assigned
// in order of first appearance. The CSV layer maps them to/from names.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lindml/numeric.hpp"

namespace lindml {

class LabeledDataset {
 public:
  LabeledDataset() = default;
  /// Relabels classes to first-appearance order; `class_names` (if given) is
  /// indexed by the incoming label and permuted alongside.
  LabeledDataset(std::vector<Vector> features, std::vector<std::size_t> labels,
                 std::vector<std::string> class_names = {})
      : features_(std::move(features)), labels_(std::move(labels)) {
    if (features_.size() != labels_.size()) {
      fail(ErrorKind::dimension_mismatch, "features and labels differ in length");
    }
    if (features_.empty()) fail(ErrorKind::degenerate, "dataset has no samples");
    for (const Vector& f : features_) {
      detail::require_same_dim(features_.front().size(), f.size(), "dataset features");
    }
    std::map<std::size_t, std::size_t> remap;
    for (std::size_t& y : labels_) {
      auto [it, inserted] = remap.emplace(y, remap.size());
      if (inserted && !class_names.empty()) {
        if (y >= class_names.size()) fail(ErrorKind::invalid_argument, "label without a class name");
        class_names_.push_back(class_names[y]);
      }
      y = it->second;
    }
    class_count_ = remap.size();
    if (class_count_ < 2) fail(ErrorKind::degenerate, "dataset needs at least 2 classes");
  }

  std::size_t size() const noexcept { return features_.size(); }
  std::size_t feature_dim() const noexcept { return features_.front().size(); }
  std::size_t class_count() const noexcept { return class_count_; }
  const std::vector<Vector>& features() const noexcept { return features_; }
  const std::vector<std::size_t>& labels() const noexcept { return labels_; }
  const Vector& feature(std::size_t i) const noexcept { return features_[i]; }
  std::size_t label(std::size_t i) const noexcept { return labels_[i]; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }

  std::vector<std::size_t> class_sizes() const {
    std::vector<std::size_t> sizes(class_count_, 0);
    for (std::size_t y : labels_) ++sizes[y];
    return sizes;
  }

  std::vector<std::vector<std::size_t>> indices_by_class() const {
    std::vector<std::vector<std::size_t>> by(class_count_);
    for (std::size_t i = 0; i < labels_.size(); ++i) by[labels_[i]].push_back(i);
    return by;
  }

  bool balanced() const {
    const auto sizes = class_sizes();
    return std::all_of(sizes.begin(), sizes.end(), [&](std::size_t s) { return s == sizes[0]; });
  }

  std::string class_name(std::size_t y) const {
    return class_names_.empty() ? std::to_string(y + 1) : class_names_[y];
  }

 private:
  std::vector<Vector> features_;
  std::vector<std::size_t> labels_;
  std::vector<std::string> class_names_;
  std::size_t class_count_ = 0;
};

/// C class means uniform on the unit sphere, per_class points around each
/// with isotropic N(0, spread^2) noise.
inline LabeledDataset synth_gaussian_classes(std::size_t classes, std::size_t per_class,
                                             std::size_t feat_dim, double spread,
                                             SeededRng& rng) {
  if (classes < 2 || per_class < 2 || feat_dim < 2) {
    fail(ErrorKind::invalid_argument, "synth: need C >= 2, per_class >= 2, feat_dim >= 2");
  }
  if (!(spread >= 0.0)) fail(ErrorKind::invalid_argument, "synth: spread must be >= 0");
  std::vector<Vector> means;
  for (std::size_t c = 0; c < classes; ++c) means.push_back(uniform_sphere_point(feat_dim, rng));
  std::vector<Vector> features;
  std::vector<std::size_t> labels;
  features.reserve(classes * per_class);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t p = 0; p < per_class; ++p) {
      Vector x = means[c];
      for (double& v : x) v += spread * rng.normal();
      features.push_back(std::move(x));
      labels.push_back(c);
    }
  }
  return LabeledDataset(std::move(features), std::move(labels));
}

/// Samples of the listed classes (in the given order of class ids).
inline LabeledDataset subset_classes(const LabeledDataset& data,
                                     const std::vector<std::size_t>& classes) {
  std::vector<char> keep(data.class_count(), 0);
  for (std::size_t c : classes) keep[c] = 1;
  std::vector<Vector> features;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!keep[data.label(i)]) continue;
    features.push_back(data.feature(i));
    labels.push_back(data.label(i));
  }
  std::vector<std::string> names;
  for (std::size_t c = 0; c < data.class_count(); ++c) names.push_back(data.class_name(c));
  return LabeledDataset(std::move(features), std::move(labels), std::move(names));
}

/// Partitions classes (not samples): round(fraction * C) classes go to train.
inline std::pair<LabeledDataset, LabeledDataset> split_disjoint_classes(
    const LabeledDataset& data, double train_fraction_of_classes, SeededRng& rng) {
  const std::size_t c = data.class_count();
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction_of_classes * static_cast<double>(c)));
  if (c < 4 || n_train < 2 || c - std::min(n_train, c) < 2) {
    fail(ErrorKind::invalid_argument,
         "split_disjoint_classes: both sides need >= 2 classes (C=" + std::to_string(c) + ")");
  }
  std::vector<std::size_t> order(c);
  for (std::size_t i = 0; i < c; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  std::vector<std::size_t> train(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> test(order.begin() + n_train, order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {subset_classes(data, train), subset_classes(data, test)};
}

/// Tops up every class to the size of the largest by duplicating members
/// (drawn with replacement). Original samples keep their positions.
inline LabeledDataset oversample_to_balance(const LabeledDataset& data, SeededRng& rng) {
  const auto by_class = data.indices_by_class();
  std::size_t target = 0;
  for (const auto& members : by_class) target = std::max(target, members.size());
  std::vector<Vector> features = data.features();
  std::vector<std::size_t> labels = data.labels();
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    for (std::size_t extra = by_class[c].size(); extra < target; ++extra) {
      const std::size_t src = by_class[c][rng.index(by_class[c].size())];
      features.push_back(data.feature(src));
      labels.push_back(c);
    }
  }
  std::vector<std::string> names;
  if (!data.class_names().empty()) names = data.class_names();
  return LabeledDataset(std::move(features), std::move(labels), std::move(names));
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Header `label,f1,...,fF`, then one sample per row. Labels may be any
/// string; they become classes in first-appearance order.
inline LabeledDataset read_csv(std::istream& in, const std::string& source = "<csv>") {
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      width = detail::split_commas(line).size();
      break;
    }
  }
  if (width == 0) fail(ErrorKind::parse, source + ": empty file");
  if (width < 2) fail(ErrorKind::parse, source + ": header needs a label and >= 1 feature column");

  std::vector<Vector> features;
  std::vector<std::size_t> labels;
  std::vector<std::string> names;
  std::map<std::string, std::size_t, std::less<>> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(line);
    if (fields.size() != width) {
      fail(ErrorKind::parse, source + ": line " + std::to_string(line_no) + " has " +
                                 std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(width));
    }
    const std::string label(detail::trim(fields[0]));
    if (label.empty()) fail(ErrorKind::parse, source + ": line " + std::to_string(line_no) + ": empty label");
    Vector x(width - 1);
    for (std::size_t f = 1; f < width; ++f) {
      const std::string_view tok = detail::trim(fields[f]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty() || !std::isfinite(v)) {
        fail(ErrorKind::parse, source + ": line " + std::to_string(line_no) + ", column " +
                                   std::to_string(f + 1) + ": not a finite number '" +
                                   std::string(tok) + "'");
      }
      x[f - 1] = v;
    }
    auto [it, inserted] = ids.emplace(label, names.size());
    if (inserted) names.push_back(label);
    features.push_back(std::move(x));
    labels.push_back(it->second);
  }
  if (features.empty()) fail(ErrorKind::parse, source + ": no samples");
  if (names.size() < 2) fail(ErrorKind::parse, source + ": need at least 2 classes");
  return LabeledDataset(std::move(features), std::move(labels), std::move(names));
}

inline LabeledDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::invalid_argument, "cannot read " + path);
  return read_csv(in, path);
}

inline void write_csv(const LabeledDataset& data, std::ostream& out) {
  out << "label";
  for (std::size_t f = 0; f < data.feature_dim(); ++f) out << ",f" << (f + 1);
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.class_name(data.label(i));
    for (double v : data.feature(i)) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

inline void save_csv(const LabeledDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::invalid_argument, "cannot write " + path);
  write_csv(data, out);
}

}  // namespace lindml
