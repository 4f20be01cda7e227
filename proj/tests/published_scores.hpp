#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ecgdnn/evalstats.hpp"

namespace testing {

inline constexpr std::uint64_t kPublishedExams = 827;
inline constexpr double kPublishedTolerance = 0.0005 + 1e-12;

struct PublishedRow {
  const char* name;
  std::uint64_t positives;             // test-set prevalence
  std::array<double, 4> printed;       // precision, recall, specificity, F1
  ecgdnn::ConfusionMatrix expected{};  // frozen from reconcile()
};

inline const std::array<PublishedRow, 6> kPublishedScores = {{
    {"1dAVb", 28, {0.867, 0.929, 0.995, 0.897}, {26, 4, 795, 2}},
    {"RBBB", 34, {0.895, 1.000, 0.995, 0.944}, {34, 4, 789, 0}},
    {"LBBB", 30, {1.000, 1.000, 1.000, 1.000}, {30, 0, 797, 0}},
    {"SB", 16, {0.833, 0.938, 0.996, 0.882}, {15, 3, 808, 1}},
    {"AF", 13, {1.000, 0.769, 1.000, 0.870}, {10, 0, 814, 3}},
    {"ST", 36, {0.947, 0.973, 0.997, 0.960}, {}},
}};

/// Every (tp, fp) whose ratios, computed directly, round to the printed row.
inline std::vector<ecgdnn::ConfusionMatrix> reconcile(const PublishedRow& row, std::uint64_t n) {
  std::vector<ecgdnn::ConfusionMatrix> out;
  const std::uint64_t pos = row.positives, neg = n - pos;
  auto close = [](double a, double b) { return std::abs(a - b) <= kPublishedTolerance; };
  for (std::uint64_t tp = 0; tp <= pos; ++tp)
    for (std::uint64_t fp = 0; fp <= neg; ++fp) {
      const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
      const double r = double(tp) / double(pos);
      const double s = double(neg - fp) / double(neg);
      const double f = 2.0 * double(tp) / double(2 * tp + fp + (pos - tp));
      if (close(p, row.printed[0]) && close(r, row.printed[1]) && close(s, row.printed[2]) &&
          close(f, row.printed[3]))
        out.push_back({tp, fp, neg - fp, pos - tp});
    }
  return out;
}

}  // namespace testing
