#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ecgdnn/consolidate.hpp"
#include "ecgdnn/labels.hpp"
#include "ecgdnn/signal.hpp"

namespace ecgdnn {

enum class BundleBranch { Right, Left };

struct SynthParams {
  double heart_rate = 72.0;     // bpm
  double pr_interval = 160.0;   // ms, P onset to QRS onset
  double qrs_duration = 90.0;   // ms
  double rr_jitter = 0.0;       // multiplicative, uniform in +-rr_jitter
  bool af_mode = false;         // irregular RR, no P waves
  BundleBranch bundle_branch = BundleBranch::Right;  // morphology when QRS > 120 ms
  double noise_std = 0.0;       // mV
  int sampling_rate = kNetworkRate;
  double duration = 10.0;       // s
  double amplitude_scale = 1.0;
  double axis_shift_deg = 0.0;  // frontal-plane rotation of every wave
  std::uint64_t rng_seed = 0;
  std::string exam_id = "synth";
  std::string patient_id = "synth";
  double age = 50.0;
  Sex sex = Sex::Female;

  void validate() const;
};

/// Label rules applied to generating parameters.
LabelVector synth_labels(const SynthParams& params);

struct SynthRecord {
  EcgRecord record;
  LabelVector labels;
  Measurements truth;                 // generating parameters; nn_sd of the realized RR series
  std::vector<double> r_peak_times;   // seconds, inside the record
};

SynthRecord generate(const SynthParams& params);

/// Derivative-energy detector on lead II with a 200 ms refractory period.
/// Returns sample indices.
std::vector<std::size_t> detect_r_peaks(const EcgRecord& record);

/// Heart rate and NN spread from detected peaks; PR and QRS by least-squares
/// fit of the generator's wave shapes to the R-aligned average beat.
Measurements measure(const EcgRecord& record);

// ---- corpora ------------------------------------------------------------------

struct CorpusSpec {
  std::size_t n = 100;
  /// Fraction of records carrying each class; counts are rounded and met exactly.
  std::array<double, kNumClasses> prevalence{0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
  double noise_std = 0.02;
  std::vector<int> sampling_rates{kNetworkRate};
  double min_duration = 7.0;
  double max_duration = 10.0;
  std::size_t exams_per_patient = 2;
  /// When set, every record is in sinus rhythm with heart rate uniform in this
  /// range, and SB/ST follow from it; SB/ST/AF prevalence is ignored.
  std::optional<std::pair<double, double>> heart_rate_range;
  std::uint64_t seed = 0;
  std::string id_prefix = "S";

  void validate() const;
};

/// Pairs that no synthetic record carries together.
inline constexpr std::array<std::pair<Abnormality, Abnormality>, 5> kSynthExclusive = {{
    {Abnormality::SB, Abnormality::ST},
    {Abnormality::RBBB, Abnormality::LBBB},
    {Abnormality::AF, Abnormality::SB},
    {Abnormality::AF, Abnormality::ST},
    {Abnormality::AF, Abnormality::AVB1},
}};

std::array<std::size_t, kNumClasses> prevalence_counts(const CorpusSpec& spec);

/// Labels per record with exactly prevalence_counts() positives per class.
std::vector<LabelVector> assign_corpus_labels(const CorpusSpec& spec);

/// Generating parameters for one record with the given labels.
SynthParams params_for_labels(const LabelVector& labels, const CorpusSpec& spec, std::size_t index);

std::vector<SynthRecord> generate_corpus(const CorpusSpec& spec);

/// Writes the dataset directory plus labels.csv, measurements.csv and reports.csv.
void write_corpus(const std::filesystem::path& dir, const std::vector<SynthRecord>& corpus,
                  std::uint64_t seed);

void write_measurements_csv(std::ostream& os, const std::vector<std::string>& exam_ids,
                            const std::vector<Measurements>& measurements);

/// Free-text report in Portuguese naming the given classes; may mention
/// absent classes under negation.
std::string generate_report(const LabelVector& labels, std::uint64_t seed);

// ---- planted consolidation stream -----------------------------------------------

struct PlantedStream {
  std::vector<std::string> exam_ids;
  std::vector<AnnotationInputs> inputs;
  std::vector<ConsolidationOutcome> expected;
  RuleCounters expected_counters;
};

/// Exams whose per-class source agreement and measurements are drawn to land
/// on a chosen rule; `expected` is that choice.
PlantedStream plant_consolidation_stream(std::size_t n, std::uint64_t seed,
                                         const ConsolidationConfig& config = {});

}  // namespace ecgdnn
