#include "ecgdnn/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "json.hpp"

#include "ecgdnn/csv.hpp"
#include "ecgdnn/rng.hpp"

namespace ecgdnn {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw InputError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
}

}  // namespace

Scores scores(const ConfusionMatrix& cm) {
  Scores s;
  s.precision = ratio(cm.tp, cm.tp + cm.fp);
  s.recall = ratio(cm.tp, cm.tp + cm.fn);
  s.specificity = ratio(cm.tn, cm.tn + cm.fp);
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

ConfusionMatrix confusion(std::span<const std::uint8_t> predicted,
                          std::span<const std::uint8_t> truth) {
  require_same_size(predicted.size(), truth.size(), "confusion");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] != 0, t = truth[i] != 0;
    if (p && t) ++cm.tp;
    else if (p) ++cm.fp;
    else if (t) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

std::array<ConfusionMatrix, kNumClasses> confusion(std::span<const LabelVector> predicted,
                                                   std::span<const LabelVector> truth) {
  require_same_size(predicted.size(), truth.size(), "confusion");
  std::array<ConfusionMatrix, kNumClasses> out{};
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      auto& cm = out[c];
      const bool p = predicted[i][c], t = truth[i][c];
      if (p && t) ++cm.tp;
      else if (p) ++cm.fp;
      else if (t) ++cm.fn;
      else ++cm.tn;
    }
  return out;
}

std::vector<LabelVector> apply_thresholds(std::span<const ScoreRow> probabilities,
                                          const std::array<double, kNumClasses>& thresholds) {
  std::vector<LabelVector> out(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i)
    for (std::size_t c = 0; c < kNumClasses; ++c) out[i][c] = probabilities[i][c] >= thresholds[c];
  return out;
}

PrCurve pr_curve(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  require_same_size(scores.size(), truth.size(), "pr_curve");
  PrCurve curve;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw InputError("pr_curve: NaN score");
    if (truth[i]) ++curve.positives;
    else ++curve.negatives;
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (truth[order[k]]) ++tp;
    else ++fp;
    const bool group_end = k + 1 == order.size() || scores[order[k + 1]] != scores[order[k]];
    if (!group_end) continue;
    curve.points.push_back(PrPoint{scores[order[k]], ratio(tp, tp + fp), ratio(tp, curve.positives),
                                   tp, fp});
  }
  return curve;
}

double average_precision(const PrCurve& curve) {
  double ap = 0.0, prev_recall = 0.0;
  for (const auto& p : curve.points) {
    ap += p.precision * (p.recall - prev_recall);
    prev_recall = p.recall;
  }
  return ap;
}

double micro_ap(std::span<const ScoreRow> probabilities, std::span<const LabelVector> truth) {
  require_same_size(probabilities.size(), truth.size(), "micro_ap");
  std::vector<double> pooled;
  Flags pooled_truth;
  pooled.reserve(probabilities.size() * kNumClasses);
  pooled_truth.reserve(probabilities.size() * kNumClasses);
  for (std::size_t i = 0; i < probabilities.size(); ++i)
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      pooled.push_back(probabilities[i][c]);
      pooled_truth.push_back(truth[i][c] ? 1 : 0);
    }
  return average_precision(pr_curve(pooled, pooled_truth));
}

double select_threshold(const PrCurve& curve) {
  if (curve.points.empty()) throw InputError("select_threshold: empty curve");
  double best_f1 = -1.0, best_t = curve.points.front().threshold;
  for (const auto& p : curve.points) {
    const double f1 = p.precision + p.recall > 0.0
                          ? 2.0 * p.precision * p.recall / (p.precision + p.recall)
                          : 0.0;
    // Points run from high to low threshold, so strict > keeps the higher one on ties.
    if (f1 > best_f1) {
      best_f1 = f1;
      best_t = p.threshold;
    }
  }
  return best_t;
}

std::array<double, kNumClasses> select_thresholds(std::span<const PrCurve> curves) {
  require_same_size(curves.size(), kNumClasses, "select_thresholds");
  std::array<double, kNumClasses> out{};
  for (std::size_t c = 0; c < kNumClasses; ++c) out[c] = select_threshold(curves[c]);
  return out;
}

std::array<PrCurve, kNumClasses> pr_curves(std::span<const ScoreRow> probabilities,
                                           std::span<const LabelVector> truth) {
  require_same_size(probabilities.size(), truth.size(), "pr_curves");
  std::array<PrCurve, kNumClasses> out;
  std::vector<double> s(probabilities.size());
  Flags t(probabilities.size());
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
      s[i] = probabilities[i][c];
      t[i] = truth[i][c] ? 1 : 0;
    }
    out[c] = pr_curve(s, t);
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

BootstrapResult bootstrap(std::span<const LabelVector> predicted, std::span<const LabelVector> truth,
                          std::size_t n_resamples, std::uint64_t seed) {
  require_same_size(predicted.size(), truth.size(), "bootstrap");
  if (truth.empty()) throw InputError("bootstrap: no exams");
  if (n_resamples == 0) throw InputError("bootstrap: n_resamples must be positive");
  BootstrapResult result;
  for (auto& per_class : result.samples)
    for (auto& v : per_class) v.resize(n_resamples);

  const std::size_t n = truth.size();
  for (std::size_t r = 0; r < n_resamples; ++r) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    std::array<ConfusionMatrix, kNumClasses> cms{};
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = uniform_index(rng, n);
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const bool p = predicted[i][c], t = truth[i][c];
        auto& cm = cms[c];
        if (p && t) ++cm.tp;
        else if (p) ++cm.fp;
        else if (t) ++cm.fn;
        else ++cm.tn;
      }
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const auto s = scores(cms[c]);
      result.samples[c][0][r] = s.precision;
      result.samples[c][1][r] = s.recall;
      result.samples[c][2][r] = s.specificity;
      result.samples[c][3][r] = s.f1;
    }
  }
  for (std::size_t c = 0; c < kNumClasses; ++c)
    for (std::size_t s = 0; s < 4; ++s) {
      const auto& v = result.samples[c][s];
      result.mean[c][s] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      for (std::size_t q = 0; q < kBootstrapQuantiles.size(); ++q)
        result.quantiles[c][s][q] = quantile(v, kBootstrapQuantiles[q]);
    }
  return result;
}

McNemarResult mcnemar(std::uint64_t b, std::uint64_t c) {
  McNemarResult r;
  r.b = b;
  r.c = c;
  const std::uint64_t n = b + c;
  if (n == 0) return r;
  if (n < kMcNemarExactBelow) {
    // Two-sided exact binomial test at p = 1/2.
    const std::uint64_t k = std::min(b, c);
    double tail = 0.0, term = std::ldexp(1.0, -static_cast<int>(n));  // C(n,0) / 2^n
    for (std::uint64_t i = 0; i <= k; ++i) {
      tail += term;
      term = term * static_cast<double>(n - i) / static_cast<double>(i + 1);
    }
    r.p_value = std::min(1.0, 2.0 * tail);
    return r;
  }
  const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
  r.exact = false;
  r.statistic = diff * diff / static_cast<double>(n);
  r.p_value = std::erfc(std::sqrt(r.statistic / 2.0));
  return r;
}

McNemarResult mcnemar(std::span<const std::uint8_t> errors_a, std::span<const std::uint8_t> errors_b) {
  require_same_size(errors_a.size(), errors_b.size(), "mcnemar");
  std::uint64_t b = 0, c = 0;
  for (std::size_t i = 0; i < errors_a.size(); ++i) {
    if (errors_a[i] && !errors_b[i]) ++b;
    if (!errors_a[i] && errors_b[i]) ++c;
  }
  return mcnemar(b, c);
}

double kappa_from_table(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  const double n = static_cast<double>(a + b + c + d);
  if (n == 0) throw InputError("kappa: empty table");
  const double po = static_cast<double>(a + d) / n;
  const double pe = (static_cast<double>(a + b) * static_cast<double>(a + c) +
                     static_cast<double>(c + d) * static_cast<double>(b + d)) /
                    (n * n);
  if (pe == 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

double kappa(std::span<const std::uint8_t> rater_a, std::span<const std::uint8_t> rater_b) {
  require_same_size(rater_a.size(), rater_b.size(), "kappa");
  std::uint64_t a = 0, b = 0, c = 0, d = 0;
  for (std::size_t i = 0; i < rater_a.size(); ++i) {
    const bool x = rater_a[i] != 0, y = rater_b[i] != 0;
    if (x && y) ++a;
    else if (x) ++b;
    else if (y) ++c;
    else ++d;
  }
  return kappa_from_table(a, b, c, d);
}

std::array<double, kNumClasses> kappa(std::span<const LabelVector> rater_a,
                                      std::span<const LabelVector> rater_b) {
  require_same_size(rater_a.size(), rater_b.size(), "kappa");
  std::array<double, kNumClasses> out{};
  Flags x(rater_a.size()), y(rater_a.size());
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (std::size_t i = 0; i < rater_a.size(); ++i) {
      x[i] = rater_a[i][c];
      y[i] = rater_b[i][c];
    }
    out[c] = kappa(x, y);
  }
  return out;
}

double HrReport::error_fraction_near_line(double band) const {
  std::size_t wrong = 0, near = 0;
  for (const auto& r : rows) {
    if (r.correct()) continue;
    ++wrong;
    if (std::abs(r.heart_rate - consensus_bpm) <= band) ++near;
  }
  return wrong == 0 ? 1.0 : static_cast<double>(near) / static_cast<double>(wrong);
}

void HrReport::write_csv(std::ostream& os) const {
  os << "# class=" << class_name(cls) << " consensus_bpm=" << consensus_bpm << '\n';
  os << "exam_id,heart_rate,predicted,truth,correct\n";
  for (const auto& r : rows)
    os << csv::quote(r.exam_id) << ',' << r.heart_rate << ',' << int(r.predicted) << ','
       << int(r.truth) << ',' << int(r.correct()) << '\n';
}

HrReport hr_vs_prediction_report(std::span<const std::string> exam_ids,
                                 std::span<const LabelVector> predicted,
                                 std::span<const LabelVector> truth,
                                 std::span<const double> heart_rates, Abnormality cls) {
  if (cls != Abnormality::SB && cls != Abnormality::ST)
    throw InputError("heart-rate report is defined for SB and ST only");
  require_same_size(exam_ids.size(), predicted.size(), "hr report");
  require_same_size(exam_ids.size(), truth.size(), "hr report");
  require_same_size(exam_ids.size(), heart_rates.size(), "hr report");
  HrReport report;
  report.cls = cls;
  report.consensus_bpm = cls == Abnormality::SB ? 50.0 : 100.0;
  for (std::size_t i = 0; i < exam_ids.size(); ++i)
    report.rows.push_back(HrRow{exam_ids[i], heart_rates[i], predicted[i][cls], truth[i][cls]});
  return report;
}

EvalReport evaluate(std::span<const ScoreRow> probabilities, std::span<const LabelVector> truth,
                    const std::optional<std::array<double, kNumClasses>>& thresholds) {
  require_same_size(probabilities.size(), truth.size(), "evaluate");
  if (truth.empty()) throw InputError("evaluate: no exams");
  EvalReport report;
  report.n_exams = truth.size();
  auto curves = pr_curves(probabilities, truth);
  const auto chosen = thresholds ? *thresholds : select_thresholds(curves);
  const auto predicted = apply_thresholds(probabilities, chosen);
  const auto cms = confusion(predicted, truth);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& cr = report.classes[c];
    cr.cm = cms[c];
    cr.scores = scores(cms[c]);
    cr.threshold = chosen[c];
    cr.average_precision = average_precision(curves[c]);
    cr.curve = std::move(curves[c]);
  }
  report.micro_ap = micro_ap(probabilities, truth);
  return report;
}

void write_report_json(std::ostream& os, const EvalReport& report) {
  nlohmann::ordered_json j;
  j["n_exams"] = report.n_exams;
  j["micro_ap"] = report.micro_ap;
  auto& classes = j["classes"];
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& cr = report.classes[c];
    nlohmann::ordered_json e;
    e["class"] = kClassNames[c];
    e["tp"] = cr.cm.tp;
    e["fp"] = cr.cm.fp;
    e["fn"] = cr.cm.fn;
    e["tn"] = cr.cm.tn;
    e["precision"] = cr.scores.precision;
    e["recall"] = cr.scores.recall;
    e["specificity"] = cr.scores.specificity;
    e["f1"] = cr.scores.f1;
    e["threshold"] = cr.threshold;
    e["average_precision"] = cr.average_precision;
    classes.push_back(e);
  }
  if (report.bootstrap) {
    auto& b = j["bootstrap"];
    b["quantiles"] = kBootstrapQuantiles;
    for (std::size_t c = 0; c < kNumClasses; ++c)
      for (std::size_t s = 0; s < 4; ++s) {
        b[std::string(kClassNames[c])][kScoreNames[s]] = {
            {"mean", report.bootstrap->mean[c][s]},
            {"values", report.bootstrap->quantiles[c][s]}};
      }
  }
  os << j.dump(2) << '\n';
}

void write_scores_csv(std::ostream& os, const EvalReport& report) {
  os << "class,precision,recall,specificity,f1,threshold,average_precision\n";
  const auto precision = os.precision(6);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& cr = report.classes[c];
    os << kClassNames[c] << ',' << cr.scores.precision << ',' << cr.scores.recall << ','
       << cr.scores.specificity << ',' << cr.scores.f1 << ',' << cr.threshold << ','
       << cr.average_precision << '\n';
  }
  os << "micro,,,,,," << report.micro_ap << '\n';
  os.precision(precision);
}

void write_confusion_csv(std::ostream& os, const EvalReport& report) {
  os << "class,tp,fp,fn,tn\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& cm = report.classes[c].cm;
    os << kClassNames[c] << ',' << cm.tp << ',' << cm.fp << ',' << cm.fn << ',' << cm.tn << '\n';
  }
}

void write_pr_curves_csv(std::ostream& os, const EvalReport& report) {
  os << "class,threshold,precision,recall\n";
  const auto precision = os.precision(9);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    for (const auto& p : report.classes[c].curve.points)
      os << kClassNames[c] << ',' << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
  os.precision(precision);
}

void write_bootstrap_csv(std::ostream& os, const BootstrapResult& result) {
  os << "class,score,mean,q2.5,q25,q50,q75,q97.5\n";
  const auto precision = os.precision(9);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    for (std::size_t s = 0; s < 4; ++s) {
      os << kClassNames[c] << ',' << kScoreNames[s] << ',' << result.mean[c][s];
      for (double q : result.quantiles[c][s]) os << ',' << q;
      os << '\n';
    }
  os.precision(precision);
}

}  // namespace ecgdnn
