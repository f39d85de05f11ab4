#include <omp.h>

#include <algorithm>
#include <cmath>
#include <spdlog/spdlog.h>

#include "capsre/kernels.hpp"
#include "capsre/training.hpp"

namespace capsre {

std::size_t select_instance(std::span<const Tensor> instance_scores,
                            std::span<const int> gold) {
  if (instance_scores.empty()) throw ContractViolation("select_instance: empty bag");
  if (gold.empty()) throw ContractViolation("select_instance: bag has no gold relation");
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < instance_scores.size(); ++i) {
    double s = -1.0;
    for (int k : gold) s = std::max(s, instance_scores[i][static_cast<std::size_t>(k)]);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

std::size_t select_instance(const data::Bag& bag, const Model& model) {
  if (bag.instances.size() == 1) return 0;
  std::vector<Tensor> scores;
  scores.reserve(bag.instances.size());
  for (const auto& inst : bag.instances) scores.push_back(model.scores(inst));
  return select_instance(scores, bag.labels);
}

Model build_model(const TrainConfig& config, std::shared_ptr<const Tensor> word_table,
                  std::int64_t unk) {
  Rng init(mix64(config.seed));
  return Model(config, std::move(word_table), unk, init);
}

namespace {

AdamConfig adam_config(const TrainConfig& c) {
  return AdamConfig{c.lr, c.beta1, c.beta2, c.adam_eps};
}

}  // namespace

Trainer::Trainer(Model& model)
    : model_(model),
      adam_(model.params(), adam_config(model.config())),
      rng_(Rng(model.config().seed).fork(0x7472616eULL)) {}

BagStep Trainer::bag_step(const data::Bag& bag, Rng& dropout_rng) const {
  const std::size_t chosen = select_instance(bag, model_);
  Tape tape(&model_.params());
  const Binder bind(&tape);
  const Var a = model_.forward(bag.instances[chosen], bind, true, &dropout_rng);
  BagStep out;
  out.loss = margin_loss(a, bag.labels);
  out.loss.selected_instance = chosen;
  out.grads = tape.backward(out.loss.total);
  return out;
}

EpochStats Trainer::train_epoch(const std::vector<data::Bag>& bags) {
  EpochStats stats;
  std::size_t widest = 0;
  for (const auto& b : bags) widest = std::max(widest, b.instances.size());
  stats.selection_histogram.assign(widest, 0);

  const auto batches = data::epoch_batches(bags.size(), model_.config().batch_size, rng_);
  const Rng dropout_root = rng_.fork(epoch_);
  const std::size_t chunk = std::max<std::size_t>(1, kernels::max_threads());
  double loss_sum = 0.0;

  for (const auto& batch : batches) {
    Gradients total(model_.params());
    const double weight = 1.0 / static_cast<double>(batch.size());
    for (std::size_t start = 0; start < batch.size(); start += chunk) {
      const std::size_t n = std::min(chunk, batch.size() - start);
      std::vector<BagStep> steps(n);
      std::vector<std::string> errors(n);
#pragma omp parallel for schedule(static, 1) if (n > 1)
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = batch[start + k];
        try {
          Rng dropout = dropout_root.fork(idx);
          steps[k] = bag_step(bags[idx], dropout);
        } catch (const std::exception& e) {
          errors[k] = e.what();
        }
      }
      for (std::size_t k = 0; k < n; ++k) {
        const data::Bag& bag = bags[batch[start + k]];
        if (!errors[k].empty()) {
          throw CheckedFailure("bag " + bag.key + ": " + errors[k]);
        }
        const double loss = steps[k].loss.total.value().item();
        if (!std::isfinite(loss)) {
          spdlog::error("non-finite loss on bag {}", bag.key);
          throw CheckedFailure("non-finite loss on bag " + bag.key);
        }
        loss_sum += loss;
        ++stats.selection_histogram[steps[k].loss.selected_instance];
        total.accumulate(steps[k].grads, weight);
      }
    }
    adam_.step(model_.params(), total);
    ++stats.steps;
  }
  ++epoch_;
  stats.epoch = epoch_;
  stats.bags = bags.size();
  stats.mean_loss = bags.empty() ? 0.0 : loss_sum / static_cast<double>(bags.size());
  return stats;
}

void Trainer::restore(std::size_t epochs_done, std::uint64_t rng_state,
                      std::uint64_t adam_steps, std::vector<Tensor> m,
                      std::vector<Tensor> v) {
  epoch_ = epochs_done;
  rng_.set_state(rng_state);
  adam_.restore(adam_steps, std::move(m), std::move(v));
}

nlohmann::ordered_json to_json(const EpochStats& s) {
  nlohmann::ordered_json j;
  j["epoch"] = s.epoch;
  j["mean_loss"] = s.mean_loss;
  j["bags"] = s.bags;
  j["steps"] = s.steps;
  j["selection_histogram"] = s.selection_histogram;
  return j;
}

}  // namespace capsre
