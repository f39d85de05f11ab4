#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capsre/data.hpp"
#include "capsre/model.hpp"
#include "json.hpp"

namespace capsre {

struct RankedRelation {
  int id = 0;
  double score = 0.0;

  bool operator==(const RankedRelation&) const = default;
};

/// Every relation by descending score; equal scores keep id order.
std::vector<RankedRelation> predict_single(std::span<const double> scores);

/// The top two relations, minus any whose score is not above `threshold`.
std::vector<RankedRelation> predict_multi(std::span<const double> scores,
                                          double threshold = 0.7);

enum class TranseSign { kTailMinusHead, kHeadMinusTail };
TranseSign parse_transe_sign(const std::string& name);

struct Assignment {
  std::size_t pair = 0;  // index into the candidate list
  double distance = 0.0;
};

/// Candidate pair whose entity offset lies closest (Euclidean) to the
/// relation embedding; offset is e2 - e1 for kTailMinusHead. Pairs with an
/// entity lacking an embedding are skipped; ties keep the first pair.
Assignment assign_relation(std::span<const data::EntityPair> pairs, int relation,
                           const data::EmbeddingStore& store,
                           TranseSign sign = TranseSign::kTailMinusHead);

struct PairedRelation {
  int id = 0;
  double score = 0.0;
  std::optional<std::size_t> pair;
  double distance = 0.0;
};

/// predict_multi followed by greedy assignment in score order: each relation
/// takes the closest pair not already taken, falling back to all pairs once
/// every pair is used.
std::vector<PairedRelation> decode_multi(std::span<const double> scores,
                                         std::span<const data::EntityPair> pairs,
                                         const data::EmbeddingStore& store,
                                         double threshold, TranseSign sign);

/// Per relation, the max score over the bag's instances.
Tensor bag_scores(const Model& model, const data::Bag& bag);

/// Fraction of bags whose top-ranked relation is among the bag labels.
double bag_accuracy(const Model& model, const std::vector<data::Bag>& bags);

/// {key, relations: [{id, name, score, pair}]}; `pair` is null when no
/// assignment was made.
nlohmann::ordered_json prediction_json(const data::Bag& bag,
                                       std::span<const PairedRelation> relations,
                                       const std::vector<std::string>& names);

}  // namespace capsre
