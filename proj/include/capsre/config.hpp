#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace capsre {

/// A configuration value failed validation. `field` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Model and optimization settings. Defaults are the published
/// hyperparameters (lr 0.001, batch 128, LSTM 300, L 120, d_p 5, d 8, C 32,
/// dropout 0.5, 3 routing iterations).
struct TrainConfig {
  /// Relation label names; index 0 is NA. E = relations.size().
  std::vector<std::string> relations{"NA"};

  std::size_t max_len = 120;          // L
  std::size_t num_entities = 2;       // M, 2 or 4
  std::size_t word_dim = 50;          // d_w
  std::size_t pos_dim = 5;            // d_p
  std::size_t hidden = 300;           // B, per LSTM direction
  std::size_t capsule_dim = 8;        // d
  std::size_t capsule_channels = 32;  // C
  std::size_t routing_iters = 3;

  double dropout = 0.5;  // drop rate on the Bi-LSTM outputs
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  std::size_t batch_size = 128;  // bags per optimizer step
  std::size_t epochs = 10;
  std::uint64_t seed = 1;

  bool word_attention = true;
  bool capsule = true;
  bool tune_word_embeddings = false;

  /// Multi-pair decoding threshold.
  double threshold = 0.7;
  /// TransE offset: "tail_minus_head" (e2 - e1) or "head_minus_tail".
  std::string transe_sign = "tail_minus_head";

  std::size_t num_relations() const { return relations.size(); }
  /// Width of an embedded token row, d_w + d_p * M.
  std::size_t input_width() const { return word_dim + pos_dim * num_entities; }

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// TrainConfig plus file locations for one command run.
struct RunConfig {
  TrainConfig train;
  std::filesystem::path train_corpus;
  std::filesystem::path eval_corpus;
  std::filesystem::path word_embeddings;
  std::filesystem::path entity_embeddings;
  std::filesystem::path relation_embeddings;
  std::filesystem::path checkpoint;
  std::filesystem::path log;
};

nlohmann::ordered_json to_json(const TrainConfig& c);
/// Starts from defaults and applies every key in `j`. Unknown keys and
/// wrongly typed values raise ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const RunConfig& c);
/// Relative paths are resolved against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j,
                               const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace capsre
