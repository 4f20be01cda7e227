#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecgdnn/labels.hpp"
#include "ecgdnn/rng.hpp"

namespace ecgdnn {

struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
};

/// Boolean flags, one byte each; any nonzero byte is true.
using Flags = std::vector<std::uint8_t>;

/// 0/0 is taken as 0 for every ratio.
Scores scores(const ConfusionMatrix& cm);

ConfusionMatrix confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

using ScoreRow = std::array<double, kNumClasses>;

/// Per-class confusion matrices for label vectors.
std::array<ConfusionMatrix, kNumClasses> confusion(std::span<const LabelVector> predicted,
                                                   std::span<const LabelVector> truth);

/// Binarize probabilities: positive when score >= threshold.
std::vector<LabelVector> apply_thresholds(std::span<const ScoreRow> probabilities,
                                          const std::array<double, kNumClasses>& thresholds);

// ---- precision-recall ---------------------------------------------------------

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
};

/// One point per distinct score, thresholds strictly decreasing.
struct PrCurve {
  std::vector<PrPoint> points;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
};

PrCurve pr_curve(std::span<const double> scores, std::span<const std::uint8_t> truth);

/// Step-wise integral: sum of precision times recall increment.
double average_precision(const PrCurve& curve);

/// Average precision over all (exam, class) pairs pooled.
double micro_ap(std::span<const ScoreRow> probabilities, std::span<const LabelVector> truth);

/// Threshold of the max-F1 point; ties go to the higher threshold.
double select_threshold(const PrCurve& curve);
std::array<double, kNumClasses> select_thresholds(std::span<const PrCurve> curves);

std::array<PrCurve, kNumClasses> pr_curves(std::span<const ScoreRow> probabilities,
                                           std::span<const LabelVector> truth);

// ---- bootstrap ----------------------------------------------------------------

inline constexpr std::array<double, 5> kBootstrapQuantiles = {0.025, 0.25, 0.5, 0.75, 0.975};
inline constexpr std::array<const char*, 4> kScoreNames = {"precision", "recall", "specificity",
                                                           "f1"};

struct BootstrapResult {
  /// samples[class][score][resample]
  std::array<std::array<std::vector<double>, 4>, kNumClasses> samples;
  /// quantiles[class][score][q], at kBootstrapQuantiles
  std::array<std::array<std::array<double, kBootstrapQuantiles.size()>, 4>, kNumClasses> quantiles{};
  std::array<std::array<double, 4>, kNumClasses> mean{};
};

/// Resamples exams with replacement; resample i draws from its own stream
/// seeded with derive_seed(seed, i).
BootstrapResult bootstrap(std::span<const LabelVector> predicted, std::span<const LabelVector> truth,
                          std::size_t n_resamples = 1000, std::uint64_t seed = 0);

/// Linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

// ---- rater comparison ---------------------------------------------------------

struct McNemarResult {
  std::uint64_t b = 0;  // only rater A wrong
  std::uint64_t c = 0;  // only rater B wrong
  double statistic = 0.0;  // chi-square statistic, 0 in the exact branch
  bool exact = true;
  double p_value = 1.0;
};

inline constexpr std::uint64_t kMcNemarExactBelow = 25;

McNemarResult mcnemar(std::uint64_t b, std::uint64_t c);
McNemarResult mcnemar(std::span<const std::uint8_t> errors_a, std::span<const std::uint8_t> errors_b);

/// 2x2 agreement table: a both positive, b only A positive, c only B positive, d both negative.
double kappa_from_table(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d);
double kappa(std::span<const std::uint8_t> rater_a, std::span<const std::uint8_t> rater_b);
std::array<double, kNumClasses> kappa(std::span<const LabelVector> rater_a,
                                      std::span<const LabelVector> rater_b);

// ---- heart-rate analysis ------------------------------------------------------

struct HrRow {
  std::string exam_id;
  double heart_rate = 0.0;
  bool predicted = false;
  bool truth = false;
  bool correct() const { return predicted == truth; }
};

struct HrReport {
  Abnormality cls = Abnormality::ST;
  double consensus_bpm = 100.0;
  std::vector<HrRow> rows;

  /// Share of misclassified rows within `band` bpm of the consensus line; 1 when none are wrong.
  double error_fraction_near_line(double band) const;
  void write_csv(std::ostream& os) const;
};

/// Only SB (50 bpm) and ST (100 bpm) are accepted.
HrReport hr_vs_prediction_report(std::span<const std::string> exam_ids,
                                 std::span<const LabelVector> predicted,
                                 std::span<const LabelVector> truth,
                                 std::span<const double> heart_rates, Abnormality cls);

// ---- reports --------------------------------------------------------------------

struct ClassReport {
  ConfusionMatrix cm;
  Scores scores;
  double threshold = 0.5;
  double average_precision = 0.0;
  PrCurve curve;
};

struct EvalReport {
  std::array<ClassReport, kNumClasses> classes;
  double micro_ap = 0.0;
  std::size_t n_exams = 0;
  std::optional<BootstrapResult> bootstrap;
};

/// Scores every class. Without `thresholds` they are selected by max F1 on
/// the same data.
EvalReport evaluate(std::span<const ScoreRow> probabilities, std::span<const LabelVector> truth,
                    const std::optional<std::array<double, kNumClasses>>& thresholds = std::nullopt);

void write_report_json(std::ostream& os, const EvalReport& report);
/// class,precision,recall,specificity,f1,threshold,average_precision
void write_scores_csv(std::ostream& os, const EvalReport& report);
/// class,tp,fp,fn,tn
void write_confusion_csv(std::ostream& os, const EvalReport& report);
/// class,threshold,precision,recall
void write_pr_curves_csv(std::ostream& os, const EvalReport& report);
/// class,score,mean,q2.5,q25,q50,q75,q97.5
void write_bootstrap_csv(std::ostream& os, const BootstrapResult& result);

}  // namespace ecgdnn
