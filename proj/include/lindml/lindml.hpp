#pragma once

#include "lindml/bench.hpp"
#include "lindml/centroids.hpp"
#include "lindml/datasets.hpp"
#include "lindml/embed_net.hpp"
#include "lindml/error.hpp"
#include "lindml/evaluation.hpp"
#include "lindml/kmeans.hpp"
#include "lindml/losses.hpp"
#include "lindml/numeric.hpp"
#include "lindml/trainer.hpp"
