#include "ecgdnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

#include <Eigen/Dense>

#include "ecgdnn/csv.hpp"
#include "ecgdnn/nn.hpp"
#include "ecgdnn/rng.hpp"

namespace ecgdnn {

namespace {

using Vec3 = std::array<double, 3>;

// Lead axes (x left, y inferior, z anterior).
const std::array<Vec3, kNumLeads>& lead_axes() {
  static const auto axes = [] {
    std::array<Vec3, kNumLeads> a{};
    const double deg = std::numbers::pi / 180.0;
    const double frontal[6] = {0, 60, 120, -150, -30, 90};
    for (int i = 0; i < 6; ++i) a[i] = {std::cos(frontal[i] * deg), std::sin(frontal[i] * deg), 0.0};
    const double transverse[6] = {120, 95, 75, 55, 30, 5};
    for (int i = 0; i < 6; ++i)
      a[6 + i] = {std::cos(transverse[i] * deg), 0.15, std::sin(transverse[i] * deg)};
    return a;
  }();
  return axes;
}

struct Wave {
  double center_ms;  // relative to QRS onset
  double sigma_ms;
  Vec3 dipole;       // mV
};

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }
double normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double qt_ms(double rr_ms, double qrs) { return 400.0 * std::sqrt(rr_ms / 1000.0) + 0.5 * (qrs - 90.0); }

bool wide_qrs(double qrs) { return qrs > 120.0; }

std::vector<Wave> beat_waves(const SynthParams& p, double rr_ms) {
  const double q = p.qrs_duration;
  const bool wide = wide_qrs(q);
  const bool left = wide && p.bundle_branch == BundleBranch::Left;
  const bool right = wide && p.bundle_branch == BundleBranch::Right;
  std::vector<Wave> w;
  if (!p.af_mode) w.push_back({-p.pr_interval + 50.0, 20.0, {0.09, 0.14, 0.05}});
  if (!left) w.push_back({0.15 * q, 0.05 * q, {-0.08, -0.03, 0.1}});
  w.push_back({0.4 * q, 0.09 * q, {0.97, 0.78, -0.39}});
  w.push_back({0.68 * q, 0.07 * q, {-0.18, -0.22, -0.27}});
  if (right) w.push_back({0.8 * q, 0.09 * q, {-0.42, 0.04, 0.56}});
  if (left) w.push_back({0.68 * q, 0.14 * q, {0.77, 0.18, -0.45}});
  const Vec3 t = left ? Vec3{-0.2, -0.14, 0.1} : Vec3{0.21, 0.21, 0.07};
  w.push_back({qt_ms(rr_ms, q) - 70.0, 45.0, t});

  const double a = p.axis_shift_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  for (auto& wave : w) {
    auto& d = wave.dipole;
    const double x = d[0] * c - d[1] * s, y = d[0] * s + d[1] * c;
    d = {x * p.amplitude_scale, y * p.amplitude_scale, d[2] * p.amplitude_scale};
  }
  return w;
}

void add_gaussian(std::vector<float>& samples, std::size_t length, int fs, double center_s,
                  double sigma_s, const Vec3& dipole) {
  const auto& axes = lead_axes();
  const double lo = (center_s - 4.0 * sigma_s) * fs;
  const double hi = (center_s + 4.0 * sigma_s) * fs;
  const auto i0 = static_cast<long>(std::max(0.0, std::ceil(lo)));
  const auto i1 = static_cast<long>(std::min(static_cast<double>(length) - 1.0, std::floor(hi)));
  if (i1 < i0) return;
  std::array<double, kNumLeads> gain{};
  for (std::size_t l = 0; l < kNumLeads; ++l)
    gain[l] = dipole[0] * axes[l][0] + dipole[1] * axes[l][1] + dipole[2] * axes[l][2];
  for (long i = i0; i <= i1; ++i) {
    const double z = (static_cast<double>(i) / fs - center_s) / sigma_s;
    const double g = std::exp(-0.5 * z * z);
    for (std::size_t l = 0; l < kNumLeads; ++l)
      samples[l * length + static_cast<std::size_t>(i)] += static_cast<float>(gain[l] * g);
  }
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

void SynthParams::validate() const {
  auto fail = [](const std::string& what) { throw InputError("invalid synth params: " + what); };
  if (!(heart_rate >= 20.0 && heart_rate <= 220.0)) fail("heart_rate must be in [20, 220]");
  if (!(pr_interval >= 0.0)) fail("pr_interval must be >= 0");
  if (!(qrs_duration > 0.0)) fail("qrs_duration must be > 0");
  if (!(rr_jitter >= 0.0 && rr_jitter < 1.0)) fail("rr_jitter must be in [0, 1)");
  if (!(noise_std >= 0.0)) fail("noise_std must be >= 0");
  if (sampling_rate <= 0) fail("sampling_rate must be positive");
  if (!(duration >= 7.0 && duration <= 10.0)) fail("duration must be in [7, 10]");
  if (!(amplitude_scale > 0.0)) fail("amplitude_scale must be positive");
}

LabelVector synth_labels(const SynthParams& p) {
  LabelVector lv;
  lv[Abnormality::AF] = p.af_mode;
  lv[Abnormality::SB] = !p.af_mode && p.heart_rate < 50.0;
  lv[Abnormality::ST] = !p.af_mode && p.heart_rate > 100.0;
  lv[Abnormality::AVB1] = !p.af_mode && p.pr_interval > 200.0;
  const bool wide = wide_qrs(p.qrs_duration);
  lv[Abnormality::RBBB] = wide && p.bundle_branch == BundleBranch::Right;
  lv[Abnormality::LBBB] = wide && p.bundle_branch == BundleBranch::Left;
  return lv;
}

SynthRecord generate(const SynthParams& p) {
  p.validate();
  Rng rng(p.rng_seed);
  const int fs = p.sampling_rate;
  const auto length = static_cast<std::size_t>(std::llround(p.duration * fs));

  SynthRecord out;
  auto& rec = out.record;
  rec.exam_id = p.exam_id;
  rec.patient_id = p.patient_id;
  rec.sampling_rate = fs;
  rec.age = p.age;
  rec.sex = p.sex;
  rec.samples.assign(kNumLeads * length, 0.0f);

  const double rr = 60.0 / p.heart_rate;  // s
  auto next_rr = [&] {
    if (p.af_mode) return rr * uniform(rng, 0.6, 1.4);
    return rr * (1.0 + p.rr_jitter * uniform(rng, -1.0, 1.0));
  };

  // QRS onsets from before the record start so partial beats appear at the edges.
  std::vector<double> onsets;
  std::vector<double> intervals;
  double t = -uniform(rng, 0.2, 1.0) * rr;
  const double end = static_cast<double>(length) / fs + 0.6;
  while (t < end) {
    onsets.push_back(t);
    const double step = next_rr();
    intervals.push_back(step);
    t += step;
  }
  const double qrs_s = p.qrs_duration / 1000.0;
  for (std::size_t b = 0; b < onsets.size(); ++b) {
    const double rr_prev_ms = 1000.0 * (b > 0 ? intervals[b - 1] : intervals[b]);
    for (const auto& w : beat_waves(p, rr_prev_ms))
      add_gaussian(rec.samples, length, fs, onsets[b] + w.center_ms / 1000.0, w.sigma_ms / 1000.0,
                   w.dipole);
    const double r_time = onsets[b] + 0.4 * qrs_s;
    if (r_time >= 0.0 && r_time < static_cast<double>(length) / fs) out.r_peak_times.push_back(r_time);
  }

  if (p.af_mode) {
    // Fibrillatory baseline, strongest in the right precordial leads.
    const auto& axes = lead_axes();
    const Vec3 dir{0.2, 0.3, 0.9};
    for (int k = 0; k < 3; ++k) {
      const double f = uniform(rng, 4.0, 8.0);
      const double amp = uniform(rng, 0.015, 0.03) * p.amplitude_scale;
      const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      for (std::size_t l = 0; l < kNumLeads; ++l) {
        const double g = amp * (dir[0] * axes[l][0] + dir[1] * axes[l][1] + dir[2] * axes[l][2]);
        for (std::size_t i = 0; i < length; ++i)
          rec.samples[l * length + i] += static_cast<float>(
              g * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs + phase));
      }
    }
  }
  if (p.noise_std > 0.0)
    for (auto& v : rec.samples) v += static_cast<float>(p.noise_std * normal(rng));

  out.labels = synth_labels(p);
  std::vector<double> rr_ms;
  for (std::size_t i = 1; i < out.r_peak_times.size(); ++i)
    rr_ms.push_back(1000.0 * (out.r_peak_times[i] - out.r_peak_times[i - 1]));
  out.truth.heart_rate = p.heart_rate;
  out.truth.pr_interval = p.pr_interval;
  out.truth.qrs_duration = p.qrs_duration;
  out.truth.nn_sd = sample_sd(rr_ms);
  return out;
}

// ---- detection and measurement ------------------------------------------------------

std::vector<std::size_t> detect_r_peaks(const EcgRecord& record) {
  const auto x = record.lead(1);
  const std::size_t n = x.size();
  const int fs = record.sampling_rate;
  std::vector<std::size_t> peaks;
  if (n < 3 || fs <= 0) return peaks;

  std::vector<double> energy(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double d = (static_cast<double>(x[i + 1]) - x[i - 1]) * fs / 2.0;
    energy[i] = d * d;
  }
  // Moving-window integration over 50 ms.
  const auto win = std::max<std::size_t>(1, static_cast<std::size_t>(0.05 * fs));
  std::vector<double> integ(n, 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += energy[i];
    if (i >= win) acc -= energy[i - win];
    integ[i] = acc / static_cast<double>(win);
  }
  std::vector<double> sorted = integ;
  const auto k = static_cast<std::size_t>(0.99 * static_cast<double>(n - 1));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
  const double reference = sorted[k];
  if (!(reference > 1e-6)) return peaks;  // flat
  const double threshold = 0.3 * reference;

  const auto refractory = static_cast<std::size_t>(0.2 * fs);
  const auto search = static_cast<std::size_t>(0.06 * fs);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (integ[i] < threshold || integ[i] < integ[i - 1] || integ[i] < integ[i + 1]) continue;
    if (!candidates.empty() && i - candidates.back() < refractory) {
      if (integ[i] > integ[candidates.back()]) candidates.back() = i;
      continue;
    }
    candidates.push_back(i);
  }
  // The integrated peak trails the QRS; refine to the signal maximum nearby.
  for (std::size_t c : candidates) {
    const std::size_t lo = c >= win + search ? c - win - search : 0;
    const std::size_t hi = std::min(n - 1, c + search);
    std::size_t best = lo;
    for (std::size_t i = lo; i <= hi; ++i)
      if (x[i] > x[best]) best = i;
    if (!peaks.empty() && best - peaks.back() < refractory) {
      if (x[best] > x[peaks.back()]) peaks.back() = best;
      continue;
    }
    peaks.push_back(best);
  }
  return peaks;
}

namespace {

struct BeatAverage {
  Eigen::MatrixXd beat;  // leads x window samples
  double start_ms = 0.0;  // window start relative to R
  double rr_ms = 0.0;
};

double gaussian_at(double t_ms, double center, double sigma) {
  const double z = (t_ms - center) / sigma;
  return std::exp(-0.5 * z * z);
}

// Sum of squared residuals after a per-lead least-squares fit on the basis.
double fit_residual(const BeatAverage& avg, const std::vector<std::pair<double, double>>& basis,
                    double fs, Eigen::MatrixXd* coeffs = nullptr) {
  const auto m = avg.beat.cols();
  Eigen::MatrixXd B(m, static_cast<Eigen::Index>(basis.size()));
  for (Eigen::Index i = 0; i < m; ++i) {
    const double t = avg.start_ms + 1000.0 * static_cast<double>(i) / fs;
    for (std::size_t k = 0; k < basis.size(); ++k)
      B(i, static_cast<Eigen::Index>(k)) = gaussian_at(t, basis[k].first, basis[k].second);
  }
  Eigen::MatrixXd G = B.transpose() * B;
  G.diagonal().array() += 1e-6;
  const Eigen::MatrixXd rhs = B.transpose() * avg.beat.transpose();
  const Eigen::MatrixXd a = G.ldlt().solve(rhs);
  if (coeffs) *coeffs = a;
  return (avg.beat.transpose() - B * a).squaredNorm();
}

// Wave shapes of the generator in R-relative time for candidate (qrs, pr).
std::vector<std::pair<double, double>> candidate_basis(double qrs, double pr, double rr_ms,
                                                       bool with_p) {
  const double onset = -0.4 * qrs;
  std::vector<std::pair<double, double>> b = {
      {onset + 0.15 * qrs, 0.05 * qrs}, {onset + 0.4 * qrs, 0.09 * qrs},
      {onset + 0.68 * qrs, 0.07 * qrs}, {onset + 0.8 * qrs, 0.09 * qrs},
      {onset + 0.68 * qrs, 0.14 * qrs}, {onset + qt_ms(rr_ms, qrs) - 70.0, 45.0},
      {onset - rr_ms + qt_ms(rr_ms, qrs) - 70.0, 45.0}};
  if (with_p) b.push_back({onset - pr + 50.0, 20.0});
  return b;
}

}  // namespace

Measurements measure(const EcgRecord& record) {
  validate(record);
  Measurements m;
  const auto peaks = detect_r_peaks(record);
  const double fs = record.sampling_rate;
  if (peaks.size() < 2) return m;
  std::vector<double> rr;
  for (std::size_t i = 1; i < peaks.size(); ++i)
    rr.push_back(1000.0 * static_cast<double>(peaks[i] - peaks[i - 1]) / fs);
  const double mean_rr = std::accumulate(rr.begin(), rr.end(), 0.0) / static_cast<double>(rr.size());
  m.heart_rate = 60000.0 / mean_rr;
  m.nn_sd = sample_sd(rr);

  // R-aligned average beat over a window that stays clear of neighbouring QRS complexes.
  BeatAverage avg;
  avg.rr_ms = mean_rr;
  const double before = std::min(460.0, mean_rr - 120.0);
  const double after = std::min(260.0, mean_rr - 120.0);
  if (before < 100.0 || after < 100.0) return m;
  avg.start_ms = -before;
  const auto nb = static_cast<long>(before * fs / 1000.0);
  const auto na = static_cast<long>(after * fs / 1000.0);
  const auto width = nb + na + 1;
  avg.beat = Eigen::MatrixXd::Zero(kNumLeads, width);
  int used = 0;
  const auto n = static_cast<long>(record.length());
  for (auto p : peaks) {
    const long s = static_cast<long>(p) - nb;
    if (s < 0 || s + width > n) continue;
    for (std::size_t l = 0; l < kNumLeads; ++l) {
      const auto lead = record.lead(l);
      for (long i = 0; i < width; ++i) avg.beat(static_cast<Eigen::Index>(l), i) += lead[s + i];
    }
    ++used;
  }
  if (used == 0) return m;
  avg.beat /= used;
  avg.start_ms = -static_cast<double>(nb) * 1000.0 / fs;

  // Coarse-to-fine grid search over (qrs, pr).
  auto search = [&](double q0, double q1, double qs, double p0, double p1, double ps) {
    double best = std::numeric_limits<double>::infinity(), bq = q0, bp = p0;
    for (double q = q0; q <= q1 + 1e-9; q += qs)
      for (double pr = p0; pr <= p1 + 1e-9; pr += ps) {
        if (pr + 0.4 * q + 60.0 > before) continue;  // P wave must fit the window
        const double r = fit_residual(avg, candidate_basis(q, pr, mean_rr, true), fs);
        if (r < best) best = r, bq = q, bp = pr;
      }
    return std::array<double, 2>{bq, bp};
  };
  auto coarse = search(50.0, 200.0, 6.0, 60.0, 400.0, 6.0);
  auto fine = search(std::max(50.0, coarse[0] - 6.0), coarse[0] + 6.0, 1.0,
                     std::max(60.0, coarse[1] - 6.0), coarse[1] + 6.0, 1.0);
  m.qrs_duration = fine[0];

  Eigen::MatrixXd coeffs;
  const auto basis = candidate_basis(fine[0], fine[1], mean_rr, true);
  fit_residual(avg, basis, fs, &coeffs);
  // An averaged P wave says nothing when the rhythm is irregular.
  const bool irregular = *m.nn_sd > 0.15 * mean_rr;
  const double p_amp = coeffs.row(static_cast<Eigen::Index>(basis.size() - 1)).cwiseAbs().maxCoeff();
  if (!irregular && p_amp >= 0.03) m.pr_interval = fine[1];
  return m;
}

// ---- corpora ------------------------------------------------------------------

void CorpusSpec::validate() const {
  auto fail = [](const std::string& what) { throw InputError("invalid corpus spec: " + what); };
  for (double p : prevalence)
    if (!(p >= 0.0 && p <= 1.0)) fail("prevalence must be in [0, 1]");
  if (!(noise_std >= 0.0)) fail("noise_std must be >= 0");
  if (sampling_rates.empty()) fail("no sampling rates");
  for (int r : sampling_rates)
    if (r < 300 || r > 600) fail("sampling rate outside 300-600 Hz");
  if (!(min_duration >= 7.0 && max_duration <= 10.0 && min_duration <= max_duration))
    fail("durations must lie in [7, 10] s");
  if (exams_per_patient == 0) fail("exams_per_patient must be positive");
  if (heart_rate_range &&
      !(heart_rate_range->first >= 20.0 && heart_rate_range->second <= 220.0 &&
        heart_rate_range->first <= heart_rate_range->second))
    fail("heart_rate_range must lie in [20, 220]");
}

std::array<std::size_t, kNumClasses> prevalence_counts(const CorpusSpec& spec) {
  std::array<std::size_t, kNumClasses> counts{};
  for (std::size_t c = 0; c < kNumClasses; ++c)
    counts[c] = static_cast<std::size_t>(std::llround(spec.prevalence[c] * static_cast<double>(spec.n)));
  if (spec.heart_rate_range) {
    counts[index_of(Abnormality::SB)] = 0;
    counts[index_of(Abnormality::ST)] = 0;
    counts[index_of(Abnormality::AF)] = 0;
  }
  return counts;
}

namespace {

bool compatible(const LabelVector& lv, Abnormality cls) {
  for (auto [a, b] : kSynthExclusive) {
    if (a == cls && lv[b]) return false;
    if (b == cls && lv[a]) return false;
  }
  return true;
}

}  // namespace

std::vector<LabelVector> assign_corpus_labels(const CorpusSpec& spec) {
  spec.validate();
  const auto counts = prevalence_counts(spec);
  std::vector<LabelVector> labels(spec.n);
  std::vector<std::size_t> order(spec.n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(spec.seed, "corpus.labels"));

  // Most constrained classes first. Each class lands on its own random records,
  // so compatible classes co-occur about as often as independence predicts.
  constexpr std::array<Abnormality, kNumClasses> fill_order = {
      Abnormality::AF, Abnormality::SB, Abnormality::ST, Abnormality::LBBB, Abnormality::RBBB,
      Abnormality::AVB1};
  for (auto cls : fill_order) {
    std::size_t need = counts[index_of(cls)];
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      if (need == 0) break;
      auto& lv = labels[i];
      if (!compatible(lv, cls)) continue;
      lv[cls] = true;
      --need;
    }
    if (need > 0)
      throw InputError("prevalence for " + std::string(class_name(cls)) +
                       " cannot be met alongside the exclusive classes");
  }
  return labels;
}

SynthParams params_for_labels(const LabelVector& labels, const CorpusSpec& spec, std::size_t index) {
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(index)));
  const std::size_t patient = index / spec.exams_per_patient;
  Rng patient_rng(derive_seed(derive_seed(spec.seed, "corpus.patient"), patient));

  SynthParams p;
  p.rng_seed = rng();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06zu", spec.id_prefix.c_str(), index);
  p.exam_id = buf;
  std::snprintf(buf, sizeof buf, "%sP%05zu", spec.id_prefix.c_str(), patient);
  p.patient_id = buf;
  p.age = std::floor(uniform(patient_rng, 18.0, 90.0));
  p.sex = uniform01(patient_rng) < 0.5 ? Sex::Female : Sex::Male;
  p.amplitude_scale = uniform(patient_rng, 0.8, 1.2);
  p.axis_shift_deg = uniform(patient_rng, -20.0, 20.0);

  p.af_mode = labels[Abnormality::AF];
  if (spec.heart_rate_range) {
    p.heart_rate = uniform(rng, spec.heart_rate_range->first, spec.heart_rate_range->second);
  } else if (labels[Abnormality::SB]) {
    p.heart_rate = uniform(rng, 35.0, std::nextafter(50.0, 0.0));
  } else if (labels[Abnormality::ST]) {
    p.heart_rate = uniform(rng, std::nextafter(100.0, 150.0), 150.0);
  } else if (p.af_mode) {
    p.heart_rate = uniform(rng, 55.0, 120.0);
  } else {
    // Rates run right up to the SB and ST limits so the boundaries are learnable.
    p.heart_rate = uniform(rng, 50.0, 100.0);
  }
  p.pr_interval = labels[Abnormality::AVB1] ? uniform(rng, 220.0, 320.0) : uniform(rng, 120.0, 180.0);
  const bool bbb = labels[Abnormality::RBBB] || labels[Abnormality::LBBB];
  p.qrs_duration = bbb ? uniform(rng, 130.0, 170.0) : uniform(rng, 70.0, 100.0);
  p.bundle_branch = labels[Abnormality::LBBB] ? BundleBranch::Left : BundleBranch::Right;
  p.rr_jitter = p.af_mode ? 0.0 : uniform(rng, 0.0, 0.03);
  p.noise_std = spec.noise_std;
  p.sampling_rate = spec.sampling_rates[static_cast<std::size_t>(
      uniform_index(rng, spec.sampling_rates.size()))];
  p.duration = uniform(rng, spec.min_duration, spec.max_duration);
  return p;
}

std::vector<SynthRecord> generate_corpus(const CorpusSpec& spec) {
  const auto labels = assign_corpus_labels(spec);
  std::vector<SynthRecord> out;
  out.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto rec = generate(params_for_labels(labels[i], spec, i));
    auto planned = labels[i];
    if (spec.heart_rate_range) {
      planned[Abnormality::SB] = rec.labels[Abnormality::SB];
      planned[Abnormality::ST] = rec.labels[Abnormality::ST];
    }
    if (rec.labels != planned) throw std::logic_error("synth: label rule disagrees with plan");
    out.push_back(std::move(rec));
  }
  return out;
}

void write_measurements_csv(std::ostream& os, const std::vector<std::string>& exam_ids,
                            const std::vector<Measurements>& measurements) {
  os << "exam_id,heart_rate,pr_interval,qrs_duration,nn_sd\n";
  const auto precision = os.precision(10);
  auto cell = [&](const std::optional<double>& v) {
    os << ',';
    if (v) os << *v;
  };
  for (std::size_t i = 0; i < exam_ids.size(); ++i) {
    os << csv::quote(exam_ids[i]);
    cell(measurements[i].heart_rate);
    cell(measurements[i].pr_interval);
    cell(measurements[i].qrs_duration);
    cell(measurements[i].nn_sd);
    os << '\n';
  }
  os.precision(precision);
}

void write_corpus(const std::filesystem::path& dir, const std::vector<SynthRecord>& corpus,
                  std::uint64_t seed) {
  std::vector<EcgRecord> records;
  csv::LabelFile labels;
  std::vector<Measurements> truth;
  records.reserve(corpus.size());
  for (const auto& r : corpus) {
    records.push_back(r.record);
    labels.exam_ids.push_back(r.record.exam_id);
    labels.labels.push_back(r.labels);
    truth.push_back(r.truth);
  }
  write_dataset(dir, records);
  {
    std::ofstream os(dir / "labels.csv", std::ios::binary);
    csv::write_labels(os, labels);
  }
  {
    std::ofstream os(dir / "measurements.csv", std::ios::binary);
    write_measurements_csv(os, labels.exam_ids, truth);
  }
  std::ofstream os(dir / "reports.csv", std::ios::binary);
  os << "exam_id,report\n";
  for (std::size_t i = 0; i < corpus.size(); ++i)
    os << csv::quote(labels.exam_ids[i]) << ','
       << csv::quote(generate_report(labels.labels[i], derive_seed(seed, static_cast<std::uint64_t>(i))))
       << '\n';
}

// ---- report grammar -------------------------------------------------------------

std::string generate_report(const LabelVector& labels, std::uint64_t seed) {
  static const std::array<std::vector<const char*>, kNumClasses> phrases = {{
      {"bloqueio atrioventricular de primeiro grau", "BAV de primeiro grau", "BAV 1º grau"},
      {"bloqueio de ramo direito", "bloqueio completo do ramo direito", "BRD"},
      {"bloqueio de ramo esquerdo", "bloqueio completo do ramo esquerdo", "BRE"},
      {"bradicardia sinusal", "Bradicardia sinusal"},
      {"fibrilação atrial", "fibrilação atrial com resposta ventricular controlada"},
      {"taquicardia sinusal", "Taquicardia Sinusal"},
  }};
  static const std::vector<const char*> normal = {"ritmo sinusal", "eixo elétrico normal",
                                                  "ECG dentro dos limites da normalidade"};
  static const std::vector<const char*> negations = {"sem", "ausência de"};
  static const std::array<const char*, kNumClasses> negatable = {
      "bloqueio atrioventricular", "bloqueio de ramo direito", "bloqueio de ramo esquerdo",
      "bradicardia", "fibrilação atrial", "taquicardia"};

  Rng rng(seed);
  auto pick = [&](const std::vector<const char*>& v) { return v[uniform_index(rng, v.size())]; };
  std::vector<std::string> parts;
  if (!labels[Abnormality::AF] && uniform01(rng) < 0.5) parts.emplace_back("ritmo sinusal");
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (labels[c]) parts.emplace_back(pick(phrases[c]));
  if (!labels.any()) parts.emplace_back(pick(normal));
  // One negated mention of an absent class, for classes that are not exclusive with a present one.
  if (uniform01(rng) < 0.5) {
    const auto c = uniform_index(rng, kNumClasses);
    if (!labels[c]) parts.push_back(std::string(pick(negations)) + " " + negatable[c]);
  }
  std::string text;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) text += i + 1 == parts.size() ? " e " : ", ";
    text += parts[i];
  }
  text += '.';
  return text;
}

// ---- planted consolidation stream ----------------------------------------------------

namespace {

enum class Agreement { Absent, OneClassifier, Agreement, MedicalOnly, ClassifiersOnly };

std::optional<Rule> measurement_rule(Abnormality cls) {
  switch (cls) {
    case Abnormality::ST: return Rule::R2a;
    case Abnormality::SB: return Rule::R2b;
    case Abnormality::RBBB:
    case Abnormality::LBBB: return Rule::R2c;
    case Abnormality::AVB1: return Rule::R2d;
    case Abnormality::AF: return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

PlantedStream plant_consolidation_stream(std::size_t n, std::uint64_t seed,
                                         const ConsolidationConfig& cfg) {
  PlantedStream s;
  Rng rng(derive_seed(seed, "consolidate.plant"));
  auto chance = [&](double p) { return uniform01(rng) < p; };
  auto maybe = [&](double lo, double hi) -> std::optional<double> {
    if (chance(0.05)) return std::nullopt;
    return uniform(rng, lo, hi);
  };

  for (std::size_t e = 0; e < n; ++e) {
    AnnotationInputs in;
    auto& m = in.measurements;
    // Each measurement lands clearly on one side of its threshold, or is missing.
    const int hr_band = static_cast<int>(uniform_index(rng, 3));
    m.heart_rate = hr_band == 0   ? maybe(30.0, cfg.sb_max_heart_rate - 1.0)
                   : hr_band == 1 ? maybe(cfg.sb_max_heart_rate + 1.0, cfg.st_min_heart_rate - 1.0)
                                  : maybe(cfg.st_min_heart_rate + 1.0, 170.0);
    m.qrs_duration = chance(0.5) ? maybe(70.0, cfg.bbb_min_qrs - 1.0) : maybe(cfg.bbb_min_qrs + 1.0, 180.0);
    m.pr_interval = chance(0.5) ? maybe(100.0, cfg.avb_min_pr - 1.0) : maybe(cfg.avb_min_pr + 1.0, 320.0);
    m.nn_sd = chance(0.5) ? maybe(10.0, cfg.af_nn_sd - 1.0) : maybe(cfg.af_nn_sd + 1.0, 1200.0);

    ConsolidationOutcome expected;
    for (auto cls : kAllClasses) {
      const auto kind = static_cast<Agreement>(uniform_index(rng, 5));
      bool med = false, uni = false, mn = false;
      switch (kind) {
        case Agreement::Absent: break;
        case Agreement::OneClassifier: (chance(0.5) ? uni : mn) = true; break;
        case Agreement::Agreement:
          med = true;
          uni = chance(0.7);
          mn = !uni || chance(0.5);
          break;
        case Agreement::MedicalOnly: med = true; break;
        case Agreement::ClassifiersOnly: uni = mn = true; break;
      }
      in.medical[cls] = med;
      in.unig[cls] = uni;
      in.minnesota[cls] = mn;

      ClassOutcome out;
      auto set = [&](Decision d, Rule r, Reason why = Reason::None) { out = {d, r, why}; };
      const auto mrule = measurement_rule(cls);
      std::optional<double> value;
      bool violates = false;
      switch (cls) {
        case Abnormality::ST:
          value = m.heart_rate;
          violates = value && *value < cfg.st_min_heart_rate;
          break;
        case Abnormality::SB:
          value = m.heart_rate;
          violates = value && *value > cfg.sb_max_heart_rate;
          break;
        case Abnormality::RBBB:
        case Abnormality::LBBB:
          value = m.qrs_duration;
          violates = value && *value < cfg.bbb_min_qrs;
          break;
        case Abnormality::AVB1:
          value = m.pr_interval;
          violates = value && *value < cfg.avb_min_pr;
          break;
        case Abnormality::AF: break;
      }
      const bool checked = kind == Agreement::MedicalOnly || kind == Agreement::ClassifiersOnly ||
                           (kind == Agreement::Agreement && cfg.measurements_veto_agreement);
      if (kind == Agreement::Absent) set(Decision::Rejected, Rule::Absent);
      else if (kind == Agreement::OneClassifier) set(Decision::Rejected, Rule::R1b);
      else if (checked && mrule && !value) set(Decision::NeedsReview, *mrule, Reason::MissingMeasurement);
      else if (checked && violates) set(Decision::Rejected, *mrule);
      else if (kind == Agreement::Agreement) set(Decision::Accepted, Rule::R1a);
      else if (kind == Agreement::ClassifiersOnly) set(Decision::NeedsReview, Rule::R4);
      else if (cls == Abnormality::AF) {
        if (!m.nn_sd) set(Decision::NeedsReview, Rule::R3b, Reason::MissingMeasurement);
        else if (*m.nn_sd > cfg.af_nn_sd) set(Decision::Accepted, Rule::R3b);
        else set(Decision::NeedsReview, Rule::R4);
      } else if (cls == Abnormality::LBBB) {
        set(Decision::NeedsReview, Rule::R4);
      } else {
        set(Decision::Accepted, Rule::R3a);
      }
      expected.classes[index_of(cls)] = out;
      ++s.expected_counters.by_rule[std::string(to_string(out.fired_rule))];
      if (out.reason == Reason::MissingMeasurement) ++s.expected_counters.by_rule["missing_measurement"];
      ++s.expected_counters.by_decision[static_cast<std::size_t>(out.decision)];
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "C%06zu", e);
    s.exam_ids.emplace_back(buf);
    s.inputs.push_back(in);
    s.expected.push_back(expected);
  }
  return s;
}

}  // namespace ecgdnn
