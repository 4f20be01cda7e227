#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecgdnn/labels.hpp"

namespace ecgdnn {

struct Measurements {
  std::optional<double> heart_rate;    // bpm
  std::optional<double> pr_interval;   // ms
  std::optional<double> qrs_duration;  // ms
  std::optional<double> nn_sd;         // same unit as ConsolidationConfig::af_nn_sd

  void validate() const;
};

enum class LabelSource : std::size_t { Medical = 0, Unig, Minnesota };

struct AnnotationInputs {
  LabelVector medical;
  LabelVector unig;
  LabelVector minnesota;
  /// A missing source reads as all-false.
  std::array<bool, 3> source_present{true, true, true};
  Measurements measurements;
};

enum class Decision { Accepted, Rejected, NeedsReview };

/// Rules in evaluation order.
enum class Rule { Absent, R1b, R2a, R2b, R2c, R2d, R1a, R3a, R3b, R4 };

inline constexpr std::array<Rule, 10> kRuleOrder = {Rule::Absent, Rule::R1b, Rule::R2a, Rule::R2b,
                                                    Rule::R2c,    Rule::R2d, Rule::R1a, Rule::R3a,
                                                    Rule::R3b,    Rule::R4};

enum class Reason { None, MissingMeasurement };

std::string_view to_string(Decision d);
std::string_view to_string(Rule r);
std::string_view to_string(Reason r);
Decision parse_decision(std::string_view s);
Rule parse_rule(std::string_view s);

struct ClassOutcome {
  Decision decision = Decision::Rejected;
  Rule fired_rule = Rule::Absent;
  Reason reason = Reason::None;

  friend bool operator==(const ClassOutcome&, const ClassOutcome&) = default;
};

struct ConsolidationOutcome {
  std::array<ClassOutcome, kNumClasses> classes;

  const ClassOutcome& operator[](Abnormality a) const { return classes[index_of(a)]; }
  LabelVector accepted() const;
  friend bool operator==(const ConsolidationOutcome&, const ConsolidationOutcome&) = default;
};

struct ConsolidationConfig {
  double st_min_heart_rate = 100.0;  // ST rejected below
  double sb_max_heart_rate = 50.0;   // SB rejected above
  double bbb_min_qrs = 115.0;        // RBBB/LBBB rejected below, ms
  double avb_min_pr = 190.0;         // 1dAVb rejected below, ms
  double af_nn_sd = 646.0;           // medical AF accepted above
  /// When false, agreement between the expert and a classifier (1a) is final
  /// and the measurement checks only see the diagnoses step 1 left open.
  bool measurements_veto_agreement = true;

  void validate() const;
};

ConsolidationOutcome consolidate(const AnnotationInputs& inputs,
                                 const ConsolidationConfig& config = {});

// ---- batch --------------------------------------------------------------------

struct RuleCounters {
  /// Keyed by rule; missing-measurement outcomes are also counted under "missing_measurement".
  std::map<std::string, std::size_t> by_rule;
  std::array<std::size_t, 3> by_decision{};  // Accepted, Rejected, NeedsReview
};

struct BatchOutcome {
  std::vector<std::string> exam_ids;
  std::vector<ConsolidationOutcome> outcomes;
  RuleCounters counters;

  /// exam_id, class, decision, fired_rule, reason; one row per exam and class.
  void write_outcomes_csv(std::ostream& os) const;
  /// Same schema, NeedsReview rows only.
  void write_review_queue_csv(std::ostream& os) const;
  /// Accepted classes as a label file.
  void write_labels_csv(std::ostream& os) const;
  void write_counters_csv(std::ostream& os) const;
};

BatchOutcome batch_consolidate(std::span<const std::string> exam_ids,
                               std::span<const AnnotationInputs> inputs,
                               const ConsolidationConfig& config = {});

struct AnnotationFiles {
  std::optional<std::filesystem::path> medical;
  std::optional<std::filesystem::path> unig;
  std::optional<std::filesystem::path> minnesota;
  std::optional<std::filesystem::path> measurements;
};

struct AnnotationSet {
  std::vector<std::string> exam_ids;
  std::vector<AnnotationInputs> inputs;
};

/// Joins the label files and the measurement file (exam_id, heart_rate,
/// pr_interval, qrs_duration, nn_sd; blank cells are missing) on exam_id.
/// Exam order follows first appearance across files in the order listed.
AnnotationSet read_annotation_inputs(const AnnotationFiles& files);

}  // namespace ecgdnn
