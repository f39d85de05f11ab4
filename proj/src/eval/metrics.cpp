#include "capsre/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "capsre/prediction.hpp"

namespace capsre {

std::vector<CurvePoint> pr_curve(std::span<const ScoredDecision> decisions) {
  const auto positives = static_cast<std::size_t>(
      std::count_if(decisions.begin(), decisions.end(),
                    [](const ScoredDecision& d) { return d.gold; }));
  if (positives == 0) throw CheckedFailure("pr_curve: zero gold positives");

  std::vector<std::size_t> order(decisions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return decisions[a].score > decisions[b].score;
  });

  std::vector<CurvePoint> curve;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = decisions[order[k]].score;
    while (k < order.size() && decisions[order[k]].score == s) {
      tp += decisions[order[k]].gold ? 1 : 0;
      ++k;
    }
    curve.push_back({static_cast<double>(tp) / static_cast<double>(positives),
                     static_cast<double>(tp) / static_cast<double>(k)});
  }
  return curve;
}

std::vector<std::optional<double>> precision_at(std::span<const CurvePoint> curve,
                                                std::span<const double> recalls) {
  std::vector<std::optional<double>> out;
  for (double target : recalls) {
    const auto it = std::find_if(curve.begin(), curve.end(),
                                 [&](const CurvePoint& p) { return p.recall >= target; });
    out.push_back(it == curve.end() ? std::nullopt : std::optional<double>(it->precision));
  }
  return out;
}

double auc(std::span<const CurvePoint> curve) {
  if (curve.empty()) throw ContractViolation("auc: empty curve");
  double area = 0.0;
  CurvePoint prev{0.0, curve.front().precision};
  for (const CurvePoint& p : curve) {
    area += (p.recall - prev.recall) * (p.precision + prev.precision) / 2.0;
    prev = p;
  }
  return area;
}

std::vector<ScoredDecision> collect_decisions(const Model& model,
                                              const std::vector<data::Bag>& bags) {
  const std::size_t e = model.config().num_relations();
  std::vector<Tensor> scores(bags.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t b = 0; b < bags.size(); ++b) scores[b] = bag_scores(model, bags[b]);

  std::vector<ScoredDecision> out;
  out.reserve(bags.size() * (e > 0 ? e - 1 : 0));
  for (std::size_t b = 0; b < bags.size(); ++b) {
    for (std::size_t k = 1; k < e; ++k) {
      const int rel = static_cast<int>(k);
      out.push_back({bags[b].key, rel, scores[b][k], bags[b].has_label(rel)});
    }
  }
  return out;
}

void write_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CheckedFailure("cannot write " + path.string());
  out << "recall,precision\n";
  char line[64];
  for (const CurvePoint& p : curve) {
    std::snprintf(line, sizeof line, "%.6f,%.6f\n", p.recall, p.precision);
    out << line;
  }
  if (!out) throw CheckedFailure("failed writing " + path.string());
}

nlohmann::ordered_json metrics_json(std::span<const CurvePoint> curve) {
  nlohmann::ordered_json j;
  j["auc"] = auc(curve);
  const auto at = precision_at(curve);
  const char* keys[] = {"p@0.1", "p@0.2", "p@0.3", "p@0.4"};
  for (std::size_t i = 0; i < at.size(); ++i) {
    if (at[i]) {
      j[keys[i]] = *at[i];
    } else {
      j[keys[i]] = nullptr;
    }
  }
  return j;
}

}  // namespace capsre
