#include "ecgdnn/consolidate.hpp"

#include <cmath>
#include <ostream>
#include <unordered_map>

#include "ecgdnn/csv.hpp"

namespace ecgdnn {

namespace {

constexpr std::array<std::string_view, 10> kRuleNames = {"absent", "1b", "2a", "2b", "2c",
                                                         "2d",     "1a", "3a", "3b", "4"};
constexpr std::array<std::string_view, 3> kDecisionNames = {"Accepted", "Rejected", "NeedsReview"};

ClassOutcome decided(Decision d, Rule r) { return ClassOutcome{d, r, Reason::None}; }
ClassOutcome missing(Rule r) { return ClassOutcome{Decision::NeedsReview, r, Reason::MissingMeasurement}; }

// Step 2 check for one class. nullopt when no rule applies or the value passes.
std::optional<ClassOutcome> measurement_check(Abnormality cls, const Measurements& m,
                                              const ConsolidationConfig& cfg) {
  switch (cls) {
    case Abnormality::ST:
      if (!m.heart_rate) return missing(Rule::R2a);
      if (*m.heart_rate < cfg.st_min_heart_rate) return decided(Decision::Rejected, Rule::R2a);
      return std::nullopt;
    case Abnormality::SB:
      if (!m.heart_rate) return missing(Rule::R2b);
      if (*m.heart_rate > cfg.sb_max_heart_rate) return decided(Decision::Rejected, Rule::R2b);
      return std::nullopt;
    case Abnormality::RBBB:
    case Abnormality::LBBB:
      if (!m.qrs_duration) return missing(Rule::R2c);
      if (*m.qrs_duration < cfg.bbb_min_qrs) return decided(Decision::Rejected, Rule::R2c);
      return std::nullopt;
    case Abnormality::AVB1:
      if (!m.pr_interval) return missing(Rule::R2d);
      if (*m.pr_interval < cfg.avb_min_pr) return decided(Decision::Rejected, Rule::R2d);
      return std::nullopt;
    case Abnormality::AF:
      return std::nullopt;
  }
  return std::nullopt;
}

ClassOutcome consolidate_class(Abnormality cls, const AnnotationInputs& in,
                               const ConsolidationConfig& cfg) {
  const bool med = in.source_present[0] && in.medical[cls];
  const bool uni = in.source_present[1] && in.unig[cls];
  const bool mn = in.source_present[2] && in.minnesota[cls];

  if (!med && !uni && !mn) return decided(Decision::Rejected, Rule::Absent);
  if (!med && (uni != mn)) return decided(Decision::Rejected, Rule::R1b);
  const bool agreement = med && (uni || mn);
  if (agreement && !cfg.measurements_veto_agreement) return decided(Decision::Accepted, Rule::R1a);

  if (auto r = measurement_check(cls, in.measurements, cfg)) return *r;
  if (agreement) return decided(Decision::Accepted, Rule::R1a);

  if (med) {
    switch (cls) {
      case Abnormality::RBBB:
      case Abnormality::AVB1:
      case Abnormality::SB:
      case Abnormality::ST:
        return decided(Decision::Accepted, Rule::R3a);
      case Abnormality::AF:
        if (!in.measurements.nn_sd) return missing(Rule::R3b);
        if (*in.measurements.nn_sd > cfg.af_nn_sd) return decided(Decision::Accepted, Rule::R3b);
        break;
      case Abnormality::LBBB:
        break;
    }
  }
  return decided(Decision::NeedsReview, Rule::R4);
}

}  // namespace

std::string_view to_string(Decision d) { return kDecisionNames[static_cast<std::size_t>(d)]; }
std::string_view to_string(Rule r) { return kRuleNames[static_cast<std::size_t>(r)]; }
std::string_view to_string(Reason r) {
  return r == Reason::MissingMeasurement ? "missing_measurement" : "";
}

Decision parse_decision(std::string_view s) {
  for (std::size_t i = 0; i < kDecisionNames.size(); ++i)
    if (kDecisionNames[i] == s) return static_cast<Decision>(i);
  throw InputError("unknown decision '" + std::string(s) + "'");
}

Rule parse_rule(std::string_view s) {
  for (std::size_t i = 0; i < kRuleNames.size(); ++i)
    if (kRuleNames[i] == s) return static_cast<Rule>(i);
  throw InputError("unknown rule '" + std::string(s) + "'");
}

void Measurements::validate() const {
  for (const auto& [v, name] : {std::pair{heart_rate, "heart_rate"}, {pr_interval, "pr_interval"},
                                {qrs_duration, "qrs_duration"}, {nn_sd, "nn_sd"}})
    if (v && (!std::isfinite(*v) || *v < 0.0))
      throw InputError(std::string("measurement ") + name + " must be finite and >= 0");
}

void ConsolidationConfig::validate() const {
  for (double v : {st_min_heart_rate, sb_max_heart_rate, bbb_min_qrs, avb_min_pr, af_nn_sd})
    if (!std::isfinite(v) || v < 0.0) throw InputError("consolidation thresholds must be >= 0");
}

LabelVector ConsolidationOutcome::accepted() const {
  LabelVector lv;
  for (std::size_t c = 0; c < kNumClasses; ++c) lv[c] = classes[c].decision == Decision::Accepted;
  return lv;
}

ConsolidationOutcome consolidate(const AnnotationInputs& inputs, const ConsolidationConfig& config) {
  inputs.measurements.validate();
  ConsolidationOutcome out;
  for (auto cls : kAllClasses) out.classes[index_of(cls)] = consolidate_class(cls, inputs, config);
  return out;
}

BatchOutcome batch_consolidate(std::span<const std::string> exam_ids,
                               std::span<const AnnotationInputs> inputs,
                               const ConsolidationConfig& config) {
  if (exam_ids.size() != inputs.size()) throw InputError("batch_consolidate: length mismatch");
  config.validate();
  BatchOutcome batch;
  batch.exam_ids.assign(exam_ids.begin(), exam_ids.end());
  batch.outcomes.reserve(inputs.size());
  for (const auto& in : inputs) {
    batch.outcomes.push_back(consolidate(in, config));
    for (const auto& co : batch.outcomes.back().classes) {
      ++batch.counters.by_rule[std::string(to_string(co.fired_rule))];
      if (co.reason == Reason::MissingMeasurement) ++batch.counters.by_rule["missing_measurement"];
      ++batch.counters.by_decision[static_cast<std::size_t>(co.decision)];
    }
  }
  return batch;
}

namespace {

void write_outcome_rows(std::ostream& os, const BatchOutcome& b, bool review_only) {
  os << "exam_id,class,decision,fired_rule,reason\n";
  for (std::size_t i = 0; i < b.exam_ids.size(); ++i)
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const auto& co = b.outcomes[i].classes[c];
      if (review_only && co.decision != Decision::NeedsReview) continue;
      os << csv::quote(b.exam_ids[i]) << ',' << kClassNames[c] << ',' << to_string(co.decision)
         << ',' << to_string(co.fired_rule) << ',' << to_string(co.reason) << '\n';
    }
}

}  // namespace

void BatchOutcome::write_outcomes_csv(std::ostream& os) const { write_outcome_rows(os, *this, false); }
void BatchOutcome::write_review_queue_csv(std::ostream& os) const { write_outcome_rows(os, *this, true); }

void BatchOutcome::write_labels_csv(std::ostream& os) const {
  csv::LabelFile f;
  f.exam_ids = exam_ids;
  for (const auto& o : outcomes) f.labels.push_back(o.accepted());
  csv::write_labels(os, f);
}

void BatchOutcome::write_counters_csv(std::ostream& os) const {
  os << "counter,count\n";
  for (auto r : kRuleOrder) {
    const auto it = counters.by_rule.find(std::string(to_string(r)));
    os << "rule:" << to_string(r) << ',' << (it == counters.by_rule.end() ? 0 : it->second) << '\n';
  }
  const auto mm = counters.by_rule.find("missing_measurement");
  os << "reason:missing_measurement," << (mm == counters.by_rule.end() ? 0 : mm->second) << '\n';
  for (std::size_t d = 0; d < 3; ++d)
    os << "decision:" << kDecisionNames[d] << ',' << counters.by_decision[d] << '\n';
}

AnnotationSet read_annotation_inputs(const AnnotationFiles& files) {
  AnnotationSet set;
  std::unordered_map<std::string, std::size_t> index;
  auto slot = [&](const std::string& id) -> AnnotationInputs& {
    auto [it, inserted] = index.try_emplace(id, set.inputs.size());
    if (inserted) {
      set.exam_ids.push_back(id);
      AnnotationInputs blank;
      blank.source_present = {false, false, false};
      set.inputs.push_back(blank);
    }
    return set.inputs[it->second];
  };

  const std::array<const std::optional<std::filesystem::path>*, 3> label_paths = {
      &files.medical, &files.unig, &files.minnesota};
  for (std::size_t s = 0; s < 3; ++s) {
    if (!*label_paths[s]) continue;
    const auto path = **label_paths[s];
    const auto lf = csv::read_labels(path);
    std::unordered_map<std::string, bool> seen;
    for (std::size_t i = 0; i < lf.exam_ids.size(); ++i) {
      if (!seen.emplace(lf.exam_ids[i], true).second)
        throw InputError(path.string() + ": duplicate exam_id '" + lf.exam_ids[i] + "'");
      auto& in = slot(lf.exam_ids[i]);
      in.source_present[s] = true;
      (s == 0 ? in.medical : s == 1 ? in.unig : in.minnesota) = lf.labels[i];
    }
  }

  if (files.measurements) {
    const auto& path = *files.measurements;
    const auto table = csv::read(path);
    const std::string source = path.string();
    if (!table.header.empty()) {
      const auto id = table.column("exam_id");
      const auto hr = table.find_column("heart_rate");
      const auto pr = table.find_column("pr_interval");
      const auto qrs = table.find_column("qrs_duration");
      const auto nn = table.find_column("nn_sd");
      for (const auto& row : table.rows) {
        auto& in = slot(row.fields[id]);
        auto& m = in.measurements;
        if (hr) m.heart_rate = csv::parse_optional_double(row, *hr, source);
        if (pr) m.pr_interval = csv::parse_optional_double(row, *pr, source);
        if (qrs) m.qrs_duration = csv::parse_optional_double(row, *qrs, source);
        if (nn) m.nn_sd = csv::parse_optional_double(row, *nn, source);
        try {
          m.validate();
        } catch (const InputError& e) {
          throw InputError(source + ": row " + std::to_string(row.line) + ": " + e.what());
        }
      }
    }
  }
  return set;
}

}  // namespace ecgdnn
