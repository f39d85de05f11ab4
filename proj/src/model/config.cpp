#include "capsre/config.hpp"

#include <fstream>
#include <set>

namespace capsre {

using nlohmann::json;
using nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (relations.empty()) throw ConfigError("relations", "at least one relation (NA) is required");
  std::set<std::string> seen;
  for (const auto& r : relations) {
    if (r.empty()) throw ConfigError("relations", "relation names must be non-empty");
    if (!seen.insert(r).second) throw ConfigError("relations", "duplicate relation '" + r + "'");
  }
  auto positive = [](const char* field, std::size_t v) {
    if (v == 0) throw ConfigError(field, "must be >= 1");
  };
  positive("max_len", max_len);
  positive("word_dim", word_dim);
  positive("pos_dim", pos_dim);
  positive("hidden", hidden);
  positive("capsule_dim", capsule_dim);
  positive("capsule_channels", capsule_channels);
  positive("routing_iters", routing_iters);
  positive("batch_size", batch_size);
  if (num_entities != 2 && num_entities != 4) {
    throw ConfigError("num_entities", "must be 2 or 4");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout", "must be in [0, 1)");
  if (!(lr >= 0.0)) throw ConfigError("lr", "must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps", "must be > 0");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold", "must be in (0, 1)");
  if (transe_sign != "tail_minus_head" && transe_sign != "head_minus_tail") {
    throw ConfigError("transe_sign", "must be 'tail_minus_head' or 'head_minus_tail'");
  }
}

ordered_json to_json(const TrainConfig& c) {
  ordered_json j;
  j["relations"] = c.relations;
  j["max_len"] = c.max_len;
  j["num_entities"] = c.num_entities;
  j["word_dim"] = c.word_dim;
  j["pos_dim"] = c.pos_dim;
  j["hidden"] = c.hidden;
  j["capsule_dim"] = c.capsule_dim;
  j["capsule_channels"] = c.capsule_channels;
  j["routing_iters"] = c.routing_iters;
  j["dropout"] = c.dropout;
  j["lr"] = c.lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["word_attention"] = c.word_attention;
  j["capsule"] = c.capsule;
  j["tune_word_embeddings"] = c.tune_word_embeddings;
  j["threshold"] = c.threshold;
  j["transe_sign"] = c.transe_sign;
  return j;
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_integer() ||
          (!it->is_number_unsigned() && it->get<std::int64_t>() < 0)) {
        throw ConfigError(key, "expected a non-negative integer");
      }
    } else if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError(key, "expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(key, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(key, "expected a string");
    }
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

const std::set<std::string>& train_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k;
    const ordered_json defaults = to_json(TrainConfig{});
    for (const auto& [key, _] : defaults.items()) k.insert(key);
    return k;
  }();
  return keys;
}

const char* const kPathKeys[] = {"train_corpus",        "eval_corpus",
                                 "word_embeddings",     "entity_embeddings",
                                 "relation_embeddings", "checkpoint",
                                 "log"};

}  // namespace

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "configuration must be a JSON object");
  TrainConfig c;
  auto rel = j.find("relations");
  if (rel != j.end()) {
    if (!rel->is_array()) throw ConfigError("relations", "expected an array of strings");
    c.relations.clear();
    for (const auto& r : *rel) {
      if (!r.is_string()) throw ConfigError("relations", "expected an array of strings");
      c.relations.push_back(r.get<std::string>());
    }
  }
  read_field(j, "max_len", c.max_len);
  read_field(j, "num_entities", c.num_entities);
  read_field(j, "word_dim", c.word_dim);
  read_field(j, "pos_dim", c.pos_dim);
  read_field(j, "hidden", c.hidden);
  read_field(j, "capsule_dim", c.capsule_dim);
  read_field(j, "capsule_channels", c.capsule_channels);
  read_field(j, "routing_iters", c.routing_iters);
  read_field(j, "dropout", c.dropout);
  read_field(j, "lr", c.lr);
  read_field(j, "beta1", c.beta1);
  read_field(j, "beta2", c.beta2);
  read_field(j, "adam_eps", c.adam_eps);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "epochs", c.epochs);
  read_field(j, "seed", c.seed);
  read_field(j, "word_attention", c.word_attention);
  read_field(j, "capsule", c.capsule);
  read_field(j, "tune_word_embeddings", c.tune_word_embeddings);
  read_field(j, "threshold", c.threshold);
  read_field(j, "transe_sign", c.transe_sign);
  c.validate();
  return c;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j = to_json(c.train);
  j["train_corpus"] = c.train_corpus.string();
  j["eval_corpus"] = c.eval_corpus.string();
  j["word_embeddings"] = c.word_embeddings.string();
  j["entity_embeddings"] = c.entity_embeddings.string();
  j["relation_embeddings"] = c.relation_embeddings.string();
  j["checkpoint"] = c.checkpoint.string();
  j["log"] = c.log.string();
  return j;
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("<root>", "configuration must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool known = train_keys().count(key) != 0;
    for (const char* p : kPathKeys) known = known || key == p;
    if (!known) throw ConfigError(key, "unknown configuration key");
  }
  RunConfig c;
  c.train = train_config_from_json(j);
  auto path = [&](const char* key) -> std::filesystem::path {
    std::string s;
    read_field(j, key, s);
    if (s.empty()) return {};
    std::filesystem::path p(s);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return p;
  };
  c.train_corpus = path("train_corpus");
  c.eval_corpus = path("eval_corpus");
  c.word_embeddings = path("word_embeddings");
  c.entity_embeddings = path("entity_embeddings");
  c.relation_embeddings = path("relation_embeddings");
  c.checkpoint = path("checkpoint");
  c.log = path("log");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

}  // namespace capsre
