#include "capsre/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "capsre/experiment.hpp"
#include "capsre/metrics.hpp"
#include "capsre/prediction.hpp"
#include "capsre/synth.hpp"
#include "capsre/training.hpp"

namespace capsre {

namespace {

void configure_logging() {
  static const bool done = [] {
    auto logger = spdlog::stderr_color_mt("capsre");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    return true;
  }();
  (void)done;
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv(kLogLevelEnv); env != nullptr && *env != '\0') {
    static const std::map<std::string, spdlog::level::level_enum> names{
        {"trace", spdlog::level::trace}, {"debug", spdlog::level::debug},
        {"info", spdlog::level::info},   {"warn", spdlog::level::warn},
        {"error", spdlog::level::err},   {"off", spdlog::level::off}};
    const auto it = names.find(env);
    if (it != names.end()) {
      level = it->second;
    } else {
      spdlog::warn("ignoring {}={}: expected trace, debug, info, warn, error or off",
                   kLogLevelEnv, env);
    }
  }
  spdlog::set_level(level);
}

/// `key=value` with value read as JSON, falling back to a plain string.
std::pair<std::string, nlohmann::ordered_json> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(s, "expected key=value");
  }
  const std::string key = s.substr(0, eq);
  const std::string raw = s.substr(eq + 1);
  nlohmann::ordered_json value;
  try {
    value = nlohmann::ordered_json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  return {key, value};
}

struct Common {
  std::string config;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "run configuration (JSON)")->required();
  cmd->add_option("--set", c.sets, "override a configuration value, key=value");
}

RunConfig resolve(const Common& c) {
  RunConfig run = load_run_config(c.config);
  if (!c.sets.empty()) {
    nlohmann::ordered_json overrides = nlohmann::ordered_json::object();
    for (const auto& s : c.sets) {
      auto [key, value] = split_assignment(s);
      overrides[key] = value;
    }
    run.train = apply_overrides(run.train, overrides);
  }
  return run;
}

void require_file(const std::filesystem::path& p, const char* field) {
  if (p.empty()) throw ConfigError(field, "path is required");
  if (!std::filesystem::exists(p)) throw ConfigError(field, "file not found: " + p.string());
}

Model load_model(const RunConfig& run, const std::filesystem::path& checkpoint,
                 const Inputs& inputs) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.config.relations != run.train.relations) {
    throw CheckedFailure("checkpoint relations differ from the configured relations");
  }
  Rng scratch(0);
  ParameterSet expected = build_parameters(run.train, scratch);
  if (run.train.tune_word_embeddings) expected.add("word_embedding", *inputs.words);
  return Model(run.train, inputs.words, inputs.unk, checkpoint_parameters(ck, expected));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CheckedFailure("cannot write " + path.string());
  out << text;
  if (!out) throw CheckedFailure("failed writing " + path.string());
}

int cmd_train(const Common& common, std::ostream& out) {
  const RunConfig run = resolve(common);
  require_file(run.word_embeddings, "word_embeddings");
  require_file(run.train_corpus, "train_corpus");
  if (run.checkpoint.empty()) throw ConfigError("checkpoint", "path is required");

  const Inputs inputs = load_inputs(run, true, false);
  if (inputs.train.empty()) throw CheckedFailure(run.train_corpus.string() + ": no bags");
  spdlog::info("training on {} bags for {} epochs", inputs.train.size(), run.train.epochs);

  std::optional<std::ofstream> log;
  if (!run.log.empty()) {
    if (run.log.has_parent_path()) std::filesystem::create_directories(run.log.parent_path());
    log.emplace(run.log, std::ios::trunc);
    if (!*log) throw CheckedFailure("cannot write " + run.log.string());
  }
  auto on_epoch = [&](const Trainer& trainer, const EpochStats& stats) {
    save_checkpoint(run.checkpoint, trainer);
    if (log) {
      auto rec = to_json(stats);
      if (stats.epoch == 1) rec["config"] = to_json(run);
      *log << rec.dump() << '\n' << std::flush;
    }
    spdlog::info("epoch {}: mean loss {:.6f}", stats.epoch, stats.mean_loss);
  };
  Model model = train_model(run.train, inputs, on_epoch);
  if (run.train.epochs == 0) {
    Trainer idle(model);
    save_checkpoint(run.checkpoint, idle);
  }
  out << "checkpoint " << run.checkpoint.string() << " after " << run.train.epochs
      << " epoch(s)\n";
  return kExitOk;
}

struct EvalArgs {
  Common common;
  std::string checkpoint;
  std::string corpus;
  std::string curve;
  std::string metrics;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  RunConfig run = resolve(a.common);
  if (!a.corpus.empty()) run.eval_corpus = a.corpus;
  if (!a.checkpoint.empty()) run.checkpoint = a.checkpoint;
  require_file(run.word_embeddings, "word_embeddings");
  require_file(run.eval_corpus, "eval_corpus");
  require_file(run.checkpoint, "checkpoint");

  const Inputs inputs = load_inputs(run, false, true);
  const Model model = load_model(run, run.checkpoint, inputs);
  const auto curve = pr_curve(collect_decisions(model, inputs.eval));
  const auto metrics = metrics_json(curve);
  if (!a.curve.empty()) write_curve_csv(a.curve, curve);
  if (!a.metrics.empty()) write_text(a.metrics, metrics.dump(2) + "\n");
  out << metrics.dump() << '\n';
  return kExitOk;
}

struct PredictArgs {
  Common common;
  std::string checkpoint;
  std::string corpus;
  std::string output;
  bool multi = false;
  std::optional<double> threshold;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  RunConfig run = resolve(a.common);
  if (!a.corpus.empty()) run.eval_corpus = a.corpus;
  if (!a.checkpoint.empty()) run.checkpoint = a.checkpoint;
  if (a.threshold && !(*a.threshold > 0.0 && *a.threshold < 1.0)) {
    throw ConfigError("threshold", "must be in (0, 1)");
  }
  require_file(run.word_embeddings, "word_embeddings");
  require_file(run.eval_corpus, "eval_corpus");
  require_file(run.checkpoint, "checkpoint");
  if (a.multi) {
    require_file(run.entity_embeddings, "entity_embeddings");
    require_file(run.relation_embeddings, "relation_embeddings");
  }

  const Inputs inputs = load_inputs(run, false, true);
  const Model model = load_model(run, run.checkpoint, inputs);
  const double threshold = a.threshold.value_or(run.train.threshold);
  const TranseSign sign = parse_transe_sign(run.train.transe_sign);

  std::vector<Tensor> scores(inputs.eval.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t b = 0; b < inputs.eval.size(); ++b) {
    scores[b] = bag_scores(model, inputs.eval[b]);
  }

  std::ostringstream lines;
  for (std::size_t b = 0; b < inputs.eval.size(); ++b) {
    const data::Bag& bag = inputs.eval[b];
    std::vector<PairedRelation> rels;
    if (a.multi) {
      rels = decode_multi(scores[b].data(), bag.pairs, inputs.store, threshold, sign);
    } else {
      for (const RankedRelation& r : predict_single(scores[b].data())) {
        if (a.threshold && !(r.score > *a.threshold)) continue;
        PairedRelation pr{r.id, r.score, std::nullopt, 0.0};
        if (bag.pairs.size() == 1) pr.pair = 0;
        rels.push_back(pr);
      }
    }
    lines << prediction_json(bag, rels, run.train.relations).dump() << '\n';
  }
  if (a.output.empty()) {
    out << lines.str();
  } else {
    write_text(a.output, lines.str());
  }
  return kExitOk;
}

int cmd_synth(const SynthSpec& spec, const std::string& dir, std::ostream& out) {
  const SynthCorpus corpus = generate_synthetic(spec);
  write_synthetic(corpus, spec, dir);
  out << "wrote " << corpus.train.size() << " training and " << corpus.test.size()
      << " test bags to " << dir << '\n';
  return kExitOk;
}

struct SweepArgs {
  Common common;
  std::vector<std::string> vary;
  std::string report;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const RunConfig run = resolve(a.common);
  require_file(run.word_embeddings, "word_embeddings");
  require_file(run.train_corpus, "train_corpus");

  nlohmann::ordered_json grid = nlohmann::ordered_json::object();
  for (const auto& v : a.vary) {
    auto [key, value] = split_assignment(v);
    nlohmann::ordered_json values = nlohmann::ordered_json::array();
    std::string list = value.is_string() ? value.get<std::string>() : value.dump();
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');) {
      values.push_back(split_assignment(key + "=" + item).second);
    }
    grid[key] = values;
  }
  // Validate every point before spending time on training.
  for (const auto& p : expand_grid(grid)) (void)apply_overrides(run.train, p);

  const Inputs inputs = load_inputs(run, true, !run.eval_corpus.empty());
  const auto points = experiment_sweep(run.train, grid, inputs);
  const std::string report = sweep_report(grid, points);
  if (a.report.empty()) {
    out << report;
  } else {
    write_text(a.report, report);
    out << "report " << a.report << '\n';
  }
  const bool all_failed = !points.empty() && std::all_of(points.begin(), points.end(),
                                                         [](const SweepPoint& p) { return p.error.has_value(); });
  return all_failed ? kExitFailure : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging();
  CLI::App app{"Capsule-network relation extraction"};
  app.require_subcommand(1);

  Common train_args;
  auto* train = app.add_subcommand("train", "train a model and write checkpoints");
  add_common(train, train_args);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "precision-recall evaluation of a checkpoint");
  add_common(eval, eval_args.common);
  eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint (default: from config)");
  eval->add_option("--corpus", eval_args.corpus, "evaluation corpus (default: eval_corpus)");
  eval->add_option("--curve", eval_args.curve, "write recall,precision CSV here");
  eval->add_option("--metrics", eval_args.metrics, "write metrics JSON here");

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "per-bag relation predictions as JSON lines");
  add_common(predict, predict_args.common);
  predict->add_option("--checkpoint", predict_args.checkpoint, "checkpoint (default: from config)");
  predict->add_option("--corpus", predict_args.corpus, "corpus to label (default: eval_corpus)");
  predict->add_option("-o,--output", predict_args.output, "output file (default: stdout)");
  predict->add_flag("--multi", predict_args.multi, "top-2 decoding with pair assignment");
  predict->add_option("--threshold", predict_args.threshold, "score threshold (multi default 0.7)");

  SynthSpec spec;
  std::string synth_dir;
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus and embeddings");
  synth->add_option("-o,--out", synth_dir, "output directory")->required();
  synth->add_option("--relations", spec.relations, "relation count including NA")->capture_default_str();
  synth->add_option("--vocab", spec.vocab, "filler vocabulary size")->capture_default_str();
  synth->add_option("--bags", spec.bags, "training bags")->capture_default_str();
  synth->add_option("--test-bags", spec.test_bags, "test bags")->capture_default_str();
  synth->add_option("--pairs", spec.pairs, "entity pairs per sentence (1 or 2)")->capture_default_str();
  synth->add_option("--max-instances", spec.max_instances, "sentences per bag, at most")->capture_default_str();
  synth->add_option("--word-dim", spec.word_dim, "word embedding width")->capture_default_str();
  synth->add_option("--entity-dim", spec.entity_dim, "entity/relation embedding width")->capture_default_str();
  synth->add_option("--noise", spec.transe_noise, "TransE noise sigma")->capture_default_str();
  synth->add_option("--seed", spec.seed, "generator seed")->capture_default_str();

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "train and evaluate over a configuration grid");
  add_common(sweep, sweep_args.common);
  sweep->add_option("--vary", sweep_args.vary, "grid axis, key=v1,v2,...")->required();
  sweep->add_option("--report", sweep_args.report, "write the Markdown report here");

  std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(train_args, out);
    if (eval->parsed()) return cmd_eval(eval_args, out);
    if (predict->parsed()) return cmd_predict(predict_args, out);
    if (synth->parsed()) return cmd_synth(spec, synth_dir, out);
    if (sweep->parsed()) return cmd_sweep(sweep_args, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace capsre
