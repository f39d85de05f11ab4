#include "capsre/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include <spdlog/spdlog.h>

#include "capsre/prediction.hpp"

namespace capsre {

Inputs load_inputs(const RunConfig& run, bool want_train, bool want_eval) {
  const TrainConfig& c = run.train;
  if (run.word_embeddings.empty()) {
    throw ConfigError("word_embeddings", "path is required");
  }
  Inputs in;
  in.store = data::load_embeddings(run.word_embeddings, run.entity_embeddings,
                                   run.relation_embeddings, c.word_dim, c.relations);
  in.words = std::make_shared<const Tensor>(in.store.words.table.rows());
  in.unk = static_cast<std::int64_t>(in.store.words.unk);

  const data::CorpusOptions options{c.max_len, c.num_entities, c.relations};
  if (want_train) {
    if (run.train_corpus.empty()) throw ConfigError("train_corpus", "path is required");
    in.train = data::load_corpus(run.train_corpus, options, in.store.words).bags;
  }
  if (want_eval) {
    if (run.eval_corpus.empty()) throw ConfigError("eval_corpus", "path is required");
    in.eval = data::load_corpus(run.eval_corpus, options, in.store.words).bags;
  }
  return in;
}

Model train_model(const TrainConfig& config, const Inputs& inputs,
                  const EpochCallback& on_epoch) {
  Model model = build_model(config, inputs.words, inputs.unk);
  Trainer trainer(model);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const EpochStats stats = trainer.train_epoch(inputs.train);
    spdlog::debug("epoch {} mean loss {:.6f}", stats.epoch, stats.mean_loss);
    if (on_epoch) on_epoch(trainer, stats);
  }
  return model;
}

std::vector<nlohmann::ordered_json> expand_grid(const nlohmann::ordered_json& grid) {
  if (!grid.is_object()) throw ConfigError("grid", "expected an object of value lists");
  std::vector<nlohmann::ordered_json> points;
  if (grid.empty()) return points;
  points.emplace_back(nlohmann::ordered_json::object());
  for (const auto& [key, values] : grid.items()) {
    if (!values.is_array() || values.empty()) {
      throw ConfigError(key, "grid values must be a non-empty array");
    }
    std::vector<nlohmann::ordered_json> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        auto q = p;
        q[key] = v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

TrainConfig apply_overrides(const TrainConfig& base, const nlohmann::ordered_json& overrides) {
  nlohmann::ordered_json j = to_json(base);
  for (const auto& [key, value] : overrides.items()) {
    if (!j.contains(key)) throw ConfigError(key, "unknown configuration key");
    j[key] = value;
  }
  return train_config_from_json(nlohmann::json::parse(j.dump()));
}

std::vector<SweepPoint> experiment_sweep(const TrainConfig& base,
                                         const nlohmann::ordered_json& grid,
                                         const Inputs& inputs) {
  const auto& eval_bags = inputs.eval.empty() ? inputs.train : inputs.eval;
  std::vector<SweepPoint> out;
  for (const auto& settings : expand_grid(grid)) {
    SweepPoint point;
    point.settings = settings;
    const auto start = std::chrono::steady_clock::now();
    try {
      const TrainConfig config = apply_overrides(base, settings);
      const Model model = train_model(config, inputs);
      const auto curve = pr_curve(collect_decisions(model, eval_bags));
      point.auc = auc(curve);
      point.precision = precision_at(curve);
      point.accuracy = bag_accuracy(model, eval_bags);
    } catch (const std::exception& e) {
      point.error = e.what();
      spdlog::warn("sweep point {} failed: {}", settings.dump(), e.what());
    }
    point.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    spdlog::info("sweep point {} done in {:.1f}s", settings.dump(), point.seconds);
    out.push_back(std::move(point));
  }
  return out;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string sweep_report(const nlohmann::ordered_json& grid,
                         const std::vector<SweepPoint>& points) {
  std::ostringstream md;
  md << "AUC is the trapezoidal area under the full precision-recall curve "
        "(no recall cap), NA excluded.\n\n";
  md << "|";
  for (const auto& [key, _] : grid.items()) md << ' ' << key << " |";
  md << " AUC | P@0.1 | P@0.2 | P@0.3 | P@0.4 | accuracy | time (s) |\n|";
  for (std::size_t i = 0; i < grid.size() + 7; ++i) md << "---|";
  md << '\n';
  for (const SweepPoint& p : points) {
    md << "|";
    for (const auto& [key, _] : grid.items()) md << ' ' << p.settings.at(key).dump() << " |";
    if (p.error) {
      md << " failed: " << *p.error << " | | | | | | " << fixed(p.seconds, 1) << " |\n";
      continue;
    }
    md << ' ' << fixed(p.auc, 3) << " |";
    for (const auto& v : p.precision) md << ' ' << (v ? fixed(*v, 3) : "-") << " |";
    md << ' ' << fixed(p.accuracy, 3) << " | " << fixed(p.seconds, 1) << " |\n";
  }
  return md.str();
}

}  // namespace capsre
