#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capsre/data.hpp"
#include "capsre/model.hpp"
#include "json.hpp"

namespace capsre {

struct ScoredDecision {
  std::string key;
  int relation = 0;
  double score = 0.0;
  bool gold = false;
};

struct CurvePoint {
  double recall = 0.0;
  double precision = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

inline constexpr double kReportedRecalls[] = {0.1, 0.2, 0.3, 0.4};

/// Staircase precision-recall curve over decisions ranked by score. Equal
/// scores form one step. Raises CheckedFailure when no decision is gold.
std::vector<CurvePoint> pr_curve(std::span<const ScoredDecision> decisions);

/// Precision at the first point whose recall reaches each target; nullopt
/// when the curve never gets there.
std::vector<std::optional<double>> precision_at(
    std::span<const CurvePoint> curve,
    std::span<const double> recalls = kReportedRecalls);

/// Trapezoidal area from recall 0 (at the first point's precision) to the
/// last point.
double auc(std::span<const CurvePoint> curve);

/// One decision per bag and non-NA relation, scored by the bag-level max.
std::vector<ScoredDecision> collect_decisions(const Model& model,
                                              const std::vector<data::Bag>& bags);

/// `recall,precision` rows with six decimals.
void write_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> curve);

/// {auc, p@0.1, p@0.2, p@0.3, p@0.4}; unreachable recalls are null.
nlohmann::ordered_json metrics_json(std::span<const CurvePoint> curve);

}  // namespace capsre
