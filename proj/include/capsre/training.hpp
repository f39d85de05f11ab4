#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "capsre/adam.hpp"
#include "capsre/autodiff.hpp"
#include "capsre/config.hpp"
#include "capsre/data.hpp"
#include "capsre/model.hpp"

namespace capsre {

struct MarginConfig {
  double m_pos = 0.9;
  double m_neg = 0.1;
  double lambda = 0.5;
};

struct LossReport {
  Var total;                         // scalar, sum of per_relation
  std::vector<double> per_relation;  // L_k
  std::size_t selected_instance = 0;
};

/// Y_k max(0, m+ - a_k)^2 + lambda (1 - Y_k) max(0, a_k - m-)^2 per relation,
/// summed. `gold` lists the relation ids with Y_k = 1.
LossReport margin_loss(const Var& activations, std::span<const int> gold,
                       const MarginConfig& margins = {});

/// Index of the instance whose best gold-relation score is highest, given
/// per-instance score vectors. Ties go to the lowest index.
std::size_t select_instance(std::span<const Tensor> instance_scores,
                            std::span<const int> gold);
/// Scores every instance of `bag` without dropout and selects one.
std::size_t select_instance(const data::Bag& bag, const Model& model);

/// A freshly initialized model seeded from config.seed.
Model build_model(const TrainConfig& config, std::shared_ptr<const Tensor> word_table,
                  std::int64_t unk);

struct BagStep {
  LossReport loss;
  Gradients grads;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based count of completed epochs
  double mean_loss = 0.0;
  std::size_t bags = 0;
  std::size_t steps = 0;
  /// histogram[k] counts bags whose selected instance was k.
  std::vector<std::size_t> selection_histogram;
};

/// Mini-batch MIML training with one selected sentence per bag. Bags inside a
/// batch are processed concurrently; gradients are summed in batch order, so
/// results do not depend on the thread count.
class Trainer {
 public:
  explicit Trainer(Model& model);

  /// Selects an instance, runs it in training mode and differentiates the
  /// margin loss. `dropout_rng` drives the dropout mask.
  BagStep bag_step(const data::Bag& bag, Rng& dropout_rng) const;

  /// Raises CheckedFailure naming the bag key if a loss is not finite; no
  /// parameters change for the failing batch.
  EpochStats train_epoch(const std::vector<data::Bag>& bags);

  Model& model() { return model_; }
  const Model& model() const { return model_; }
  const Adam& optimizer() const { return adam_; }
  std::size_t epochs_done() const { return epoch_; }
  std::uint64_t rng_state() const { return rng_.state(); }

  void restore(std::size_t epochs_done, std::uint64_t rng_state,
               std::uint64_t adam_steps, std::vector<Tensor> m, std::vector<Tensor> v);

 private:
  Model& model_;
  Adam adam_;
  Rng rng_;
  std::size_t epoch_ = 0;
};

nlohmann::ordered_json to_json(const EpochStats& s);

// Checkpoints are JSON documents holding the config, trainer progress, the
// optimizer moments and every named parameter.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Trainer& trainer);

struct Checkpoint {
  TrainConfig config;
  std::size_t epochs_done = 0;
  std::uint64_t rng_state = 0;
  std::uint64_t adam_steps = 0;
  std::vector<std::string> names;
  std::vector<Tensor> params;
  std::vector<Tensor> adam_m;
  std::vector<Tensor> adam_v;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint parameters into a model built for `checkpoint.config`.
/// A missing parameter or shape mismatch raises CheckedFailure naming both
/// shapes.
ParameterSet checkpoint_parameters(const Checkpoint& checkpoint,
                                   const ParameterSet& expected);

}  // namespace capsre
