#include "capsre/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace capsre {

std::vector<RankedRelation> predict_single(std::span<const double> scores) {
  std::vector<RankedRelation> out(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) {
    out[k] = RankedRelation{static_cast<int>(k), scores[k]};
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedRelation& a, const RankedRelation& b) {
    return a.score > b.score;
  });
  return out;
}

std::vector<RankedRelation> predict_multi(std::span<const double> scores, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ContractViolation("predict_multi: threshold must lie in (0, 1), got " +
                            std::to_string(threshold));
  }
  auto ranked = predict_single(scores);
  ranked.resize(std::min<std::size_t>(2, ranked.size()));
  std::erase_if(ranked, [&](const RankedRelation& r) { return !(r.score > threshold); });
  return ranked;
}

TranseSign parse_transe_sign(const std::string& name) {
  if (name == "tail_minus_head") return TranseSign::kTailMinusHead;
  if (name == "head_minus_tail") return TranseSign::kHeadMinusTail;
  throw ContractViolation("unknown TransE sign '" + name +
                          "' (expected tail_minus_head or head_minus_tail)");
}

namespace {

std::optional<double> pair_distance(const data::EntityPair& pair, std::span<const double> rel,
                                    const data::EmbeddingStore& store, TranseSign sign) {
  const auto h = store.entities.find(pair.first);
  const auto t = store.entities.find(pair.second);
  if (!h || !t) return std::nullopt;
  const auto eh = store.entities.row(*h);
  const auto et = store.entities.row(*t);
  double sq = 0.0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    const double delta = sign == TranseSign::kTailMinusHead ? et[i] - eh[i] : eh[i] - et[i];
    const double diff = delta - rel[i];
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

std::span<const double> relation_row(int relation, const data::EmbeddingStore& store) {
  if (relation < 0 || static_cast<std::size_t>(relation) >= store.relations.size()) {
    throw CheckedFailure("no embedding for relation id " + std::to_string(relation));
  }
  if (store.entities.dim() != store.relations.dim()) {
    throw CheckedFailure("entity embeddings have dimension " +
                         std::to_string(store.entities.dim()) + ", relation embeddings " +
                         std::to_string(store.relations.dim()));
  }
  return store.relations.row(static_cast<std::size_t>(relation));
}

}  // namespace

Assignment assign_relation(std::span<const data::EntityPair> pairs, int relation,
                           const data::EmbeddingStore& store, TranseSign sign) {
  if (pairs.empty()) throw ContractViolation("assign_relation: no candidate pairs");
  const auto rel = relation_row(relation, store);
  std::optional<Assignment> best;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto d = pair_distance(pairs[p], rel, store, sign);
    if (d && (!best || *d < best->distance)) best = Assignment{p, *d};
  }
  if (!best) {
    throw CheckedFailure("assign_relation: no candidate pair has embeddings for both entities");
  }
  return *best;
}

std::vector<PairedRelation> decode_multi(std::span<const double> scores,
                                         std::span<const data::EntityPair> pairs,
                                         const data::EmbeddingStore& store,
                                         double threshold, TranseSign sign) {
  std::vector<PairedRelation> out;
  std::vector<char> used(pairs.size(), 0);
  for (const RankedRelation& r : predict_multi(scores, threshold)) {
    PairedRelation pr{r.id, r.score, std::nullopt, 0.0};
    if (!pairs.empty()) {
      if (std::all_of(used.begin(), used.end(), [](char u) { return u != 0; })) {
        std::fill(used.begin(), used.end(), 0);
      }
      const auto rel = relation_row(r.id, store);
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        if (used[p]) continue;
        const auto d = pair_distance(pairs[p], rel, store, sign);
        if (d && (!pr.pair || *d < pr.distance)) {
          pr.pair = p;
          pr.distance = *d;
        }
      }
      if (pr.pair) used[*pr.pair] = 1;
    }
    out.push_back(pr);
  }
  return out;
}

Tensor bag_scores(const Model& model, const data::Bag& bag) {
  if (bag.instances.empty()) throw ContractViolation("bag " + bag.key + " has no instances");
  Tensor best = model.scores(bag.instances.front());
  for (std::size_t i = 1; i < bag.instances.size(); ++i) {
    const Tensor s = model.scores(bag.instances[i]);
    for (std::size_t k = 0; k < best.size(); ++k) best[k] = std::max(best[k], s[k]);
  }
  return best;
}

double bag_accuracy(const Model& model, const std::vector<data::Bag>& bags) {
  if (bags.empty()) return 0.0;
  std::vector<char> hit(bags.size(), 0);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t b = 0; b < bags.size(); ++b) {
    const Tensor s = bag_scores(model, bags[b]);
    hit[b] = bags[b].has_label(predict_single(s.data()).front().id) ? 1 : 0;
  }
  return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) /
         static_cast<double>(bags.size());
}

nlohmann::ordered_json prediction_json(const data::Bag& bag,
                                       std::span<const PairedRelation> relations,
                                       const std::vector<std::string>& names) {
  nlohmann::ordered_json j;
  j["key"] = bag.key;
  j["relations"] = nlohmann::ordered_json::array();
  for (const PairedRelation& r : relations) {
    nlohmann::ordered_json item;
    item["id"] = r.id;
    item["name"] = static_cast<std::size_t>(r.id) < names.size() ? names[r.id] : "";
    item["score"] = r.score;
    if (r.pair && *r.pair < bag.pairs.size()) {
      const auto& p = bag.pairs[*r.pair];
      item["pair"] = {p.first, p.second};
      item["distance"] = r.distance;
    } else {
      item["pair"] = nullptr;
    }
    j["relations"].push_back(std::move(item));
  }
  return j;
}

}  // namespace capsre
