#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "capsre/rng.hpp"
#include "capsre/tensor.hpp"

namespace capsre::data {

/// Word/entity/relation lookup table loaded from `token v1 ... vd` text.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> tokens, Tensor rows);

  std::size_t size() const { return tokens_.size(); }
  std::size_t dim() const { return rows_.rank() == 2 ? rows_.dim(1) : 0; }
  const Tensor& rows() const { return rows_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// nullopt for unknown tokens.
  std::optional<std::size_t> find(const std::string& token) const;
  std::span<const double> row(std::size_t i) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  Tensor rows_;
};

inline constexpr const char* kUnkToken = "<unk>";

/// Word vocabulary with a trailing UNK row equal to the mean of the loaded
/// rows.
struct WordVocab {
  EmbeddingTable table;
  std::size_t unk = 0;

  std::int64_t id(const std::string& token) const;
};

struct EmbeddingStore {
  WordVocab words;
  EmbeddingTable entities;
  /// Exactly one row per relation id, in label order.
  EmbeddingTable relations;
};

/// Parses one table. `expected_dim` of 0 accepts the first row's width.
/// Malformed rows raise CheckedFailure naming file and line; duplicate
/// tokens keep the last row.
EmbeddingTable load_embedding_table(const std::filesystem::path& path,
                                    std::size_t expected_dim);

WordVocab load_word_vocab(const std::filesystem::path& path,
                          std::size_t expected_dim);

/// Loads all three tables. Entity and relation paths may be empty, leaving
/// those tables empty. Relation rows are reordered to follow `relation_names`.
EmbeddingStore load_embeddings(const std::filesystem::path& word_path,
                               const std::filesystem::path& entity_path,
                               const std::filesystem::path& relation_path,
                               std::size_t word_dim,
                               const std::vector<std::string>& relation_names);

void write_embedding_table(const std::filesystem::path& path,
                           const std::vector<std::string>& tokens,
                           const Tensor& rows);

struct EntityMention {
  std::string id;
  std::size_t begin = 0;  // token span [begin, end)
  std::size_t end = 0;

  bool operator==(const EntityMention&) const = default;
};

using EntityPair = std::pair<std::string, std::string>;

/// Relative-distance bucket of a token with respect to one entity slot.
/// Distances are clamped to [-L, L] and shifted to [0, 2L]; a missing entity
/// maps to the reserved bucket 2L+2.
std::int32_t position_bucket(std::size_t token, std::optional<std::size_t> anchor,
                             std::size_t max_len);

/// Bucket used at padded positions (rows past the sentence end).
inline std::int32_t padding_bucket(std::size_t max_len) {
  return static_cast<std::int32_t>(2 * max_len + 1);
}
inline std::int32_t missing_bucket(std::size_t max_len) {
  return static_cast<std::int32_t>(2 * max_len + 2);
}
/// Rows in each position-embedding table.
inline std::size_t position_buckets(std::size_t max_len) { return 2 * max_len + 3; }

struct SentenceInstance {
  std::vector<std::string> words;
  std::vector<std::int64_t> word_ids;
  std::vector<EntityMention> entities;
  std::vector<EntityPair> pairs;
  /// Relation ids from this record, aligned with `pairs`.
  std::vector<int> pair_relations;
  /// Anchor token per entity slot (size M); nullopt marks a missing entity.
  std::vector<std::optional<std::size_t>> slots;
  /// L x M bucket ids, row-major.
  std::vector<std::int32_t> position_ids;
  /// Bag labels mirrored onto the instance.
  std::vector<int> gold;

  std::size_t length() const { return words.size(); }
  bool operator==(const SentenceInstance&) const = default;
};

struct Bag {
  std::string key;
  std::vector<EntityPair> pairs;
  std::vector<SentenceInstance> instances;
  /// Sorted, unique relation ids.
  std::vector<int> labels;
  /// Sorted relation ids per entry of `pairs`.
  std::vector<std::vector<int>> pair_labels;

  bool has_label(int relation) const;
  bool operator==(const Bag&) const = default;
};

struct CorpusOptions {
  std::size_t max_len = 120;
  std::size_t num_entities = 2;
  std::vector<std::string> relations;
};

struct Corpus {
  std::vector<Bag> bags;
  /// Records dropped for exceeding max_len.
  std::size_t excluded = 0;
};

std::string bag_key(const std::vector<EntityPair>& pairs);

/// Reads JSON-lines records and groups them into bags by entity-tuple key,
/// in order of first appearance.
Corpus load_corpus(const std::filesystem::path& path, const CorpusOptions& options,
                   const WordVocab& vocab);
Corpus parse_corpus(std::istream& in, const CorpusOptions& options,
                    const WordVocab& vocab, const std::string& source = "<stream>");

/// Writes bags back as one record per instance.
void write_corpus(const std::filesystem::path& path, const std::vector<Bag>& bags,
                  const std::vector<std::string>& relation_names);

/// Computes slots and position ids for an instance whose words, entities and
/// pairs are already set.
void assign_positions(SentenceInstance& inst, std::size_t max_len,
                      std::size_t num_entities);

/// Splits a seeded permutation of [0, count) into consecutive batches; the
/// last batch may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count,
                                                    std::size_t batch_size,
                                                    Rng& rng);

}  // namespace capsre::data
