// lindml: centroid generation, training, evaluation, bound checks and the
// scaling benchmark from the command line.
//
// Exit codes: 0 ok, 2 usage/config error, 3 data or shape mismatch, 1 internal.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lindml/lindml.hpp"

using nlohmann::json;
using namespace lindml;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

// A usage problem found after parsing (bad value combination, guard tripped).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] void usage(const std::string& msg) { throw UsageError(msg); }

// --config <file.json>: a flat object whose keys are long option names of the
// chosen subcommand. Values given on the command line win over the file.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const std::string& section) : section_(section) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError("config", std::string("not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config", "top level must be an object");
    // either flat keys, or one object per subcommand
    if (j.contains(section_) && j.at(section_).is_object()) j = json(j.at(section_));
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      if (!section_.empty()) item.parents = {section_};
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  const std::string& section_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) usage("cannot write " + path);
  out << text;
}

std::vector<Vector> embed_all(const EmbedNet& net, const LabeledDataset& data, bool hidden) {
  std::vector<Vector> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      out.push_back(hidden ? net.embed_hidden(data.feature(i)) : net.embed_output(data.feature(i)));
    } catch (const Error& e) {
      throw Error(e.kind(), "sample " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------- gen-centroids

struct GenCentroidsArgs {
  std::string strategy = "one-hot";
  std::size_t classes = 0;
  std::size_t dim = 0;  // 0: same as classes
  std::size_t points = 0;  // 0: default_sphere_points
  std::uint64_t seed = 0;
  std::string out = "centroids.json";
};

CentroidSet make_centroids(const std::string& strategy, std::size_t classes, std::size_t dim,
                           std::size_t points, std::uint64_t seed) {
  if (classes < 2) usage("--classes must be >= 2");
  if (strategy == "one-hot" || strategy == "one_hot") {
    if (dim != 0 && dim != classes) usage("one-hot centroids have dim == classes");
    return one_hot_centroids(classes);
  }
  if (strategy == "kmeans") {
    const std::size_t d = dim == 0 ? classes : dim;
    if (d < 2) usage("--dim must be >= 2");
    const std::size_t n = points == 0 ? default_sphere_points(classes) : points;
    if (n < 10 * classes) usage("--points must be >= 10 * classes");
    SeededRng rng(seed);
    return kmeans_sphere_centroids(classes, d, n, rng);
  }
  usage("unknown --strategy '" + strategy + "' (one-hot | kmeans)");
}

int cmd_gen_centroids(const GenCentroidsArgs& a) {
  const CentroidSet set = make_centroids(a.strategy, a.classes, a.dim, a.points, a.seed);
  save_centroids(set, a.out);
  const json stats = to_json(set)["stats"];
  std::cout << stats.dump() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------------ synth

struct SynthArgs {
  std::size_t classes = 10;
  std::size_t per_class = 60;
  std::size_t feat_dim = 20;
  double spread = 0.15;
  std::uint64_t seed = 0;
  std::string out = "data.csv";
  std::string test_out;  // when set, split classes into out (train) and test_out
  double train_fraction = 0.5;
};

int cmd_synth(const SynthArgs& a) {
  if (a.classes < 2 || a.per_class < 2 || a.feat_dim < 2) {
    usage("--classes, --per-class and --feat-dim must be >= 2");
  }
  if (!(a.spread >= 0.0)) usage("--spread must be >= 0");
  SeededRng rng = SeededRng::derive(a.seed, 0);
  const LabeledDataset data = synth_gaussian_classes(a.classes, a.per_class, a.feat_dim, a.spread, rng);
  if (a.test_out.empty()) {
    save_csv(data, a.out);
    return kExitOk;
  }
  SeededRng split_rng = SeededRng::derive(a.seed, 1);
  const auto [train, test] = split_disjoint_classes(data, a.train_fraction, split_rng);
  save_csv(train, a.out);
  save_csv(test, a.test_out);
  return kExitOk;
}

// ------------------------------------------------------------------------ train

struct TrainArgs {
  std::string data;
  std::string centroids;  // optional file; otherwise generated
  std::string strategy = "one-hot";
  std::size_t epochs = 40;
  std::size_t batch = 128;
  double lr = 0.1;
  double lr_decay = 0.5;
  std::size_t lr_every = 5;
  double weight_decay = 0.0005;
  std::string loss = "discriminative";
  std::string loss_scale = "per-triplet";
  std::size_t hidden = 256;
  std::size_t checkpoint_every = 0;
  std::uint64_t seed = 0;
  std::string out = "checkpoint.json";
  std::string log;  // default: <out>.log.ndjson
  bool log_timing = true;
};

int cmd_train(const TrainArgs& a) {
  const LabeledDataset raw = load_csv(a.data);
  SeededRng balance_rng = SeededRng::derive(a.seed, 101);
  const LabeledDataset data = oversample_to_balance(raw, balance_rng);
  const std::size_t c = data.class_count();

  const CentroidSet cents = a.centroids.empty()
                                ? make_centroids(a.strategy, c, 0, 0, a.seed)
                                : load_centroids(a.centroids);
  if (cents.count() != c) {
    fail(ErrorKind::dimension_mismatch, "centroid file has " + std::to_string(cents.count()) +
                                            " classes, dataset has " + std::to_string(c));
  }
  if (cents.dim() != c) {
    fail(ErrorKind::dimension_mismatch, "centroid dim " + std::to_string(cents.dim()) +
                                            " must equal the class count " + std::to_string(c));
  }

  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.lr_init = a.lr;
  cfg.lr_decay_factor = a.lr_decay;
  cfg.lr_decay_every = a.lr_every;
  cfg.weight_decay = a.weight_decay;
  cfg.seed = a.seed;
  cfg.loss_kind = loss_kind_from_string(a.loss);
  cfg.loss_scale = loss_scale_from_string(a.loss_scale);
  cfg.validate(c);
  if (a.hidden == 0) usage("--hidden must be positive");

  EmbedNet net = EmbedNet::init_params({data.feature_dim(), a.hidden, c}, a.seed);
  const std::string log_path = a.log.empty() ? a.out + ".log.ndjson" : a.log;
  std::ofstream log(log_path);
  if (!log) usage("cannot write " + log_path);
  const std::uint64_t cents_hash = cents.content_hash();

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const EpochStats st = cfg.loss_kind == LossKind::discriminative
                              ? train_epoch(net, data, cents, cfg, e)
                              : train_epoch_triplet_baseline(net, data, cfg, e);
    log << to_json(st, a.log_timing).dump() << '\n';
    log.flush();
    std::cerr << "epoch " << e + 1 << "/" << cfg.epochs << "  loss " << st.mean_loss << "  lr "
              << st.lr << '\n';
    if (a.checkpoint_every > 0 && (e + 1) % a.checkpoint_every == 0 && e + 1 < cfg.epochs) {
      save_checkpoint(net, a.out + ".epoch" + std::to_string(e + 1) + ".json");
    }
  }
  if (cents.content_hash() != cents_hash) {
    fail(ErrorKind::bound_violation, "centroids changed during training");
  }
  save_checkpoint(net, a.out);
  std::cout << json{{"checkpoint", a.out},
                    {"log", log_path},
                    {"samples", data.size()},
                    {"classes", c},
                    {"epochs", cfg.epochs},
                    {"param_hash", net.content_hash()}}
                   .dump()
            << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  bool random_init = false;
  std::size_t hidden = 256;
  std::string layer = "hidden";
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  const LabeledDataset data = load_csv(a.data);
  EmbedNet net;
  if (a.random_init) {
    if (!a.checkpoint.empty()) usage("--random-init and --checkpoint are exclusive");
    if (a.hidden == 0) usage("--hidden must be positive");
    net = EmbedNet::init_params({data.feature_dim(), a.hidden, data.class_count()}, a.seed);
  } else {
    if (a.checkpoint.empty()) usage("eval needs --checkpoint or --random-init");
    net = load_checkpoint(a.checkpoint);
  }
  if (net.input_dim() != data.feature_dim()) {
    fail(ErrorKind::dimension_mismatch, "checkpoint expects " + std::to_string(net.input_dim()) +
                                            " features, dataset has " +
                                            std::to_string(data.feature_dim()));
  }
  if (a.layer != "hidden" && a.layer != "output") usage("--layer must be hidden or output");
  const std::vector<Vector> emb = embed_all(net, data, a.layer == "hidden");
  const RetrievalReport rep = evaluate_retrieval(emb, data.labels(), data.class_count(), a.seed);
  const json j = to_json(rep);
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  std::cout << j.dump() << '\n';
  std::fprintf(stderr, "%8s %8s %8s %8s %8s\n", "NMI", "R@1", "R@2", "R@4", "R@8");
  std::fprintf(stderr, "%8.4f %8.4f %8.4f %8.4f %8.4f\n", rep.nmi, rep.recall_at.at(1),
               rep.recall_at.at(2), rep.recall_at.at(4), rep.recall_at.at(8));
  return kExitOk;
}

// ----------------------------------------------------------------- verify-bound

struct VerifyArgs {
  std::string data;
  std::size_t classes = 0;  // synthetic data when no --data
  std::size_t per_class = 6;
  std::size_t feat_dim = 8;
  double spread = 0.15;
  std::string checkpoint;
  bool random_init = false;
  std::size_t hidden = 256;
  std::string centroids;
  bool force = false;
  std::size_t max_n = 200;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_verify_bound(const VerifyArgs& a) {
  std::optional<LabeledDataset> data;
  if (!a.data.empty()) {
    data = load_csv(a.data);
  } else {
    if (a.classes < 2) usage("verify-bound needs --data or --classes >= 2");
    if (a.per_class < 2 || a.feat_dim < 2) usage("--per-class and --feat-dim must be >= 2");
    SeededRng rng = SeededRng::derive(a.seed, 0);
    data = synth_gaussian_classes(a.classes, a.per_class, a.feat_dim, a.spread, rng);
  }
  if (data->size() > a.max_n && !a.force) {
    usage("N = " + std::to_string(data->size()) + " exceeds the brute-force guard of " +
          std::to_string(a.max_n) + " (cubic cost); pass --force to run anyway");
  }
  if (!data->balanced()) {
    fail(ErrorKind::unbalanced, "verify-bound needs equal class sizes; oversample the data first");
  }
  const std::size_t c = data->class_count();
  const CentroidSet cents = a.centroids.empty() ? one_hot_centroids(c) : load_centroids(a.centroids);

  std::vector<Vector> emb;
  if (!a.checkpoint.empty() || a.random_init) {
    if (!a.checkpoint.empty() && a.random_init) usage("--random-init and --checkpoint are exclusive");
    const EmbedNet net = a.random_init
                             ? EmbedNet::init_params({data->feature_dim(), a.hidden, cents.dim()}, a.seed)
                             : load_checkpoint(a.checkpoint);
    if (net.input_dim() != data->feature_dim()) {
      fail(ErrorKind::dimension_mismatch, "checkpoint input dim does not match the dataset");
    }
    emb = embed_all(net, *data, false);
  } else {
    // raw features, normalized onto the sphere
    for (const Vector& f : data->features()) emb.push_back(unit_normalize(f));
  }
  if (emb.front().size() != cents.dim()) {
    fail(ErrorKind::dimension_mismatch, "embedding dim " + std::to_string(emb.front().size()) +
                                            " != centroid dim " + std::to_string(cents.dim()));
  }
  const LabeledEmbeddings le(std::move(emb), data->labels(), c);
  const LossReport rep = lemma_gap_report(le, cents);
  const json j = to_json(rep);
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  std::cout << j.dump() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------------ bench

struct BenchArgs {
  BenchConfig cfg;
  std::string out;
};

int cmd_bench(const BenchArgs& a) {
  const BenchReport rep = run_bench(a.cfg);
  if (a.out.empty()) {
    write_bench_csv(rep, std::cout);
  } else {
    std::ofstream out(a.out);
    if (!out) usage("cannot write " + a.out);
    write_bench_csv(rep, out);
  }
  const json summary = {{"exponent_discriminative_vs_n", rep.exponent_discriminative_vs_n},
                        {"exponent_discriminative_vs_c", rep.exponent_discriminative_vs_c},
                        {"exponent_triplet_batch_vs_b", rep.exponent_triplet_batch_vs_b},
                        {"triplet_over_discriminative", rep.triplet_over_discriminative}};
  std::cerr << summary.dump() << '\n';
  return kExitOk;
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument:
      return kExitUsage;
    case ErrorKind::dimension_mismatch:
    case ErrorKind::degenerate:
    case ErrorKind::unbalanced:
    case ErrorKind::parse:
      return kExitData;
    case ErrorKind::bound_violation:
      return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lindml: linear-time discriminative loss toolkit"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  GenCentroidsArgs gc;
  auto* gen = app.add_subcommand("gen-centroids", "Generate a fixed centroid set (JSON)");
  gen->add_option("--strategy", gc.strategy, "one-hot | kmeans")->capture_default_str();
  gen->add_option("--classes", gc.classes, "Number of classes C")->required();
  gen->add_option("--dim", gc.dim, "Centroid dimension (kmeans; default C)");
  gen->add_option("--points", gc.points, "Sphere sample size (kmeans; default min(1000 C, 1e6))");
  gen->add_option("--seed", gc.seed)->capture_default_str();
  gen->add_option("--out", gc.out)->capture_default_str();

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Write a synthetic Gaussian-class dataset (CSV)");
  synth->add_option("--classes", sy.classes)->capture_default_str();
  synth->add_option("--per-class", sy.per_class)->capture_default_str();
  synth->add_option("--feat-dim", sy.feat_dim)->capture_default_str();
  synth->add_option("--spread", sy.spread)->capture_default_str();
  synth->add_option("--seed", sy.seed)->capture_default_str();
  synth->add_option("--out", sy.out, "Output CSV (train split when --test-out is given)")
      ->capture_default_str();
  synth->add_option("--test-out", sy.test_out, "Also split classes and write held-out classes here");
  synth->add_option("--train-fraction", sy.train_fraction, "Fraction of classes for training")
      ->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the embedding network");
  train_cmd->add_option("--data", tr.data, "Training CSV")->required();
  train_cmd->add_option("--centroids", tr.centroids, "Centroid JSON (default: generate)");
  train_cmd->add_option("--strategy", tr.strategy, "Centroids to generate: one-hot | kmeans")
      ->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs)->capture_default_str();
  train_cmd->add_option("--batch", tr.batch)->capture_default_str();
  train_cmd->add_option("--lr", tr.lr)->capture_default_str();
  train_cmd->add_option("--lr-decay", tr.lr_decay, "Factor applied every --lr-every epochs")
      ->capture_default_str();
  train_cmd->add_option("--lr-every", tr.lr_every)->capture_default_str();
  train_cmd->add_option("--weight-decay", tr.weight_decay)->capture_default_str();
  train_cmd->add_option("--loss", tr.loss, "discriminative | triplet")->capture_default_str();
  train_cmd->add_option("--loss-scale", tr.loss_scale, "per-triplet | sum")->capture_default_str();
  train_cmd->add_option("--hidden", tr.hidden)->capture_default_str();
  train_cmd->add_option("--checkpoint-every", tr.checkpoint_every, "Extra checkpoint every K epochs");
  train_cmd->add_option("--seed", tr.seed)->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Final checkpoint path")->capture_default_str();
  train_cmd->add_option("--log", tr.log, "NDJSON epoch log (default <out>.log.ndjson)");
  train_cmd->add_flag("--log-timing,!--no-log-timing", tr.log_timing,
                      "Include wall-clock seconds in the log");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Recall@K and NMI on a held-out CSV");
  eval_cmd->add_option("--checkpoint", ev.checkpoint);
  eval_cmd->add_option("--data", ev.data)->required();
  eval_cmd->add_flag("--random-init", ev.random_init, "Evaluate an untrained network instead");
  eval_cmd->add_option("--hidden", ev.hidden, "Hidden width for --random-init")->capture_default_str();
  eval_cmd->add_option("--layer", ev.layer, "hidden | output")->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed)->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Also write the report here");

  VerifyArgs vb;
  auto* verify = app.add_subcommand("verify-bound", "Check 0 <= L_d - L_t <= bound on a dataset");
  verify->add_option("--data", vb.data, "Balanced CSV (default: synthetic)");
  verify->add_option("--classes", vb.classes, "Synthetic: number of classes");
  verify->add_option("--per-class", vb.per_class)->capture_default_str();
  verify->add_option("--feat-dim", vb.feat_dim)->capture_default_str();
  verify->add_option("--spread", vb.spread)->capture_default_str();
  verify->add_option("--checkpoint", vb.checkpoint, "Embed through this network");
  verify->add_flag("--random-init", vb.random_init, "Embed through an untrained network");
  verify->add_option("--hidden", vb.hidden)->capture_default_str();
  verify->add_option("--centroids", vb.centroids, "Centroid JSON (default one-hot)");
  verify->add_flag("--force", vb.force, "Allow N above --max-n");
  verify->add_option("--max-n", vb.max_n)->capture_default_str();
  verify->add_option("--seed", vb.seed)->capture_default_str();
  verify->add_option("--out", vb.out);

  BenchArgs bn;
  auto* bench = app.add_subcommand("bench", "Epoch wall time and operation counts vs N, C, B");
  bench->add_option("--classes", bn.cfg.classes)->capture_default_str();
  bench->add_option("--batch", bn.cfg.batch_size)->capture_default_str();
  bench->add_option("--sizes", bn.cfg.sizes, "N ladder")->delimiter(',')->capture_default_str();
  bench->add_option("--class-ladder", bn.cfg.class_ladder)->delimiter(',')->capture_default_str();
  bench->add_option("--triplet-batches", bn.cfg.triplet_batches, "B ladder for the triplet baseline")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("--feat-dim", bn.cfg.feat_dim)->capture_default_str();
  bench->add_option("--hidden", bn.cfg.hidden_dim)->capture_default_str();
  bench->add_option("--repeats", bn.cfg.repeats)->capture_default_str();
  bench->add_option("--seed", bn.cfg.seed)->capture_default_str();
  bench->add_option("--out", bn.out, "CSV path (default stdout)");

  // The config file is read by the top-level app, so it has to know which
  // subcommand its keys belong to before parsing.
  std::string section;
  for (int i = 1; i < argc && section.empty(); ++i) {
    for (const CLI::App* sub : app.get_subcommands({})) {
      if (sub->get_name() == argv[i]) section = argv[i];
    }
  }
  app.set_config("--config", "", "JSON object of option values (command-line flags override it)");
  app.config_formatter(std::make_shared<JsonConfig>(section));
  app.allow_config_extras(CLI::config_extras_mode::error);
  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_centroids(gc);
    if (*synth) return cmd_synth(sy);
    if (*train_cmd) return cmd_train(tr);
    if (*eval_cmd) return cmd_eval(ev);
    if (*verify) return cmd_verify_bound(vb);
    if (*bench) return cmd_bench(bn);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
