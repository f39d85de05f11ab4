#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "capsre/config.hpp"
#include "capsre/data.hpp"
#include "capsre/metrics.hpp"
#include "capsre/model.hpp"
#include "capsre/training.hpp"
#include "json.hpp"

namespace capsre {

/// Embeddings and corpora named by a RunConfig.
struct Inputs {
  data::EmbeddingStore store;
  std::shared_ptr<const Tensor> words;  // word table incl. the UNK row
  std::int64_t unk = 0;
  std::vector<data::Bag> train;
  std::vector<data::Bag> eval;
};

/// Loads the word table plus whichever of entity/relation embeddings and
/// train/eval corpora the RunConfig names.
Inputs load_inputs(const RunConfig& run, bool want_train, bool want_eval);

using EpochCallback = std::function<void(const Trainer&, const EpochStats&)>;

/// Builds a model from config.seed and trains it for config.epochs.
Model train_model(const TrainConfig& config, const Inputs& inputs,
                  const EpochCallback& on_epoch = {});

/// Cartesian product of {key: [values...]} in key order, first key slowest.
/// An empty object yields no points.
std::vector<nlohmann::ordered_json> expand_grid(const nlohmann::ordered_json& grid);

/// `base` with the given keys replaced; unknown keys raise ConfigError.
TrainConfig apply_overrides(const TrainConfig& base, const nlohmann::ordered_json& overrides);

struct SweepPoint {
  nlohmann::ordered_json settings;
  std::optional<std::string> error;
  double auc = 0.0;
  std::vector<std::optional<double>> precision;  // at kReportedRecalls
  double accuracy = 0.0;                         // bag-level top-1 on eval bags
  double seconds = 0.0;
};

/// Trains and evaluates every grid point; evaluation uses the eval bags, or
/// the training bags when none are loaded. A failing point is recorded and
/// the sweep moves on.
std::vector<SweepPoint> experiment_sweep(const TrainConfig& base,
                                         const nlohmann::ordered_json& grid,
                                         const Inputs& inputs);

/// Markdown table: one column per grid key, then AUC, P@recall and timing.
std::string sweep_report(const nlohmann::ordered_json& grid,
                         const std::vector<SweepPoint>& points);

}  // namespace capsre
