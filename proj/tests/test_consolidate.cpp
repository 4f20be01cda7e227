#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ecgdnn/consolidate.hpp"
#include "ecgdnn/synth.hpp"

using namespace ecgdnn;

namespace {

AnnotationInputs with(Abnormality a, bool medical, bool unig, bool minnesota, Measurements m = {}) {
  AnnotationInputs in;
  in.medical[a] = medical;
  in.unig[a] = unig;
  in.minnesota[a] = minnesota;
  in.measurements = m;
  return in;
}

Measurements normal_measurements() { return {72.0, 160.0, 90.0, 30.0}; }

std::optional<double> maybe(std::mt19937_64& g, double lo, double hi) {
  if (g() % 8 == 0) return std::nullopt;
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

AnnotationInputs random_inputs(std::mt19937_64& g) {
  AnnotationInputs in;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    in.medical[c] = g() % 2;
    in.unig[c] = g() % 2;
    in.minnesota[c] = g() % 2;
  }
  in.measurements = {maybe(g, 30, 160), maybe(g, 100, 300), maybe(g, 60, 180), maybe(g, 0, 1200)};
  return in;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_SUITE("consolidate") {

TEST_CASE("worked examples") {
  SUBCASE("tachycardia vetoed by heart rate") {
    Measurements m = normal_measurements();
    m.heart_rate = 95.0;
    const auto o = consolidate(with(Abnormality::ST, true, true, false, m))[Abnormality::ST];
    CHECK(o.decision == Decision::Rejected);
    CHECK(o.fired_rule == Rule::R2a);
  }
  SUBCASE("expert and classifier agree on RBBB") {
    Measurements m = normal_measurements();
    m.qrs_duration = 140.0;
    const auto o = consolidate(with(Abnormality::RBBB, true, true, false, m))[Abnormality::RBBB];
    CHECK(o.decision == Decision::Accepted);
    CHECK(o.fired_rule == Rule::R1a);
  }
  SUBCASE("one classifier alone") {
    const auto o = consolidate(with(Abnormality::AF, false, false, true, normal_measurements()))[Abnormality::AF];
    CHECK(o.decision == Decision::Rejected);
    CHECK(o.fired_rule == Rule::R1b);
  }
  SUBCASE("medical AF and the NN spread") {
    Measurements m = normal_measurements();
    m.nn_sd = 700.0;
    auto o = consolidate(with(Abnormality::AF, true, false, false, m))[Abnormality::AF];
    CHECK(o.decision == Decision::Accepted);
    CHECK(o.fired_rule == Rule::R3b);
    m.nn_sd = 600.0;
    o = consolidate(with(Abnormality::AF, true, false, false, m))[Abnormality::AF];
    CHECK(o.decision == Decision::NeedsReview);
    CHECK(o.fired_rule == Rule::R4);
  }
  SUBCASE("both classifiers without the expert") {
    Measurements m = normal_measurements();
    m.qrs_duration = 150.0;
    const auto o = consolidate(with(Abnormality::LBBB, false, true, true, m))[Abnormality::LBBB];
    CHECK(o.decision == Decision::NeedsReview);
    CHECK(o.fired_rule == Rule::R4);
  }
}

TEST_CASE("remaining rules") {
  const auto m = normal_measurements();
  auto o = consolidate(with(Abnormality::SB, true, false, false, m))[Abnormality::SB];
  CHECK(o.fired_rule == Rule::R2b);
  Measurements slow = m;
  slow.heart_rate = 42.0;
  o = consolidate(with(Abnormality::SB, true, false, false, slow))[Abnormality::SB];
  CHECK(o.decision == Decision::Accepted);
  CHECK(o.fired_rule == Rule::R3a);
  o = consolidate(with(Abnormality::AVB1, true, true, true, m))[Abnormality::AVB1];
  CHECK(o.fired_rule == Rule::R2d);
  o = consolidate(with(Abnormality::RBBB, false, true, true, m))[Abnormality::RBBB];
  CHECK(o.fired_rule == Rule::R2c);
  const auto absent = consolidate(AnnotationInputs{});
  for (const auto& c : absent.classes) {
    CHECK(c.decision == Decision::Rejected);
    CHECK(c.fired_rule == Rule::Absent);
  }
  CHECK_FALSE(absent.accepted().any());
}

TEST_CASE("missing measurements go to review") {
  Measurements m = normal_measurements();
  m.heart_rate.reset();
  auto o = consolidate(with(Abnormality::ST, true, true, false, m))[Abnormality::ST];
  CHECK(o.decision == Decision::NeedsReview);
  CHECK(o.reason == Reason::MissingMeasurement);
  CHECK(o.fired_rule == Rule::R2a);
  m = normal_measurements();
  m.nn_sd.reset();
  o = consolidate(with(Abnormality::AF, true, false, false, m))[Abnormality::AF];
  CHECK(o.decision == Decision::NeedsReview);
  CHECK(o.reason == Reason::MissingMeasurement);
  CHECK(o.fired_rule == Rule::R3b);
  // A one-classifier rejection does not need a measurement.
  o = consolidate(with(Abnormality::ST, false, true, false, {}))[Abnormality::ST];
  CHECK(o.decision == Decision::Rejected);
  CHECK(o.fired_rule == Rule::R1b);
}

TEST_CASE("agreement-first order") {
  ConsolidationConfig cfg;
  cfg.measurements_veto_agreement = false;
  Measurements m = normal_measurements();
  m.heart_rate = 95.0;
  auto o = consolidate(with(Abnormality::ST, true, true, false, m), cfg)[Abnormality::ST];
  CHECK(o.decision == Decision::Accepted);
  CHECK(o.fired_rule == Rule::R1a);
  o = consolidate(with(Abnormality::ST, true, false, false, m), cfg)[Abnormality::ST];
  CHECK(o.fired_rule == Rule::R2a);
}

TEST_CASE("step-2 rejections violate their threshold") {
  const ConsolidationConfig cfg;
  std::mt19937_64 g(5);
  for (int i = 0; i < 5000; ++i) {
    const auto in = random_inputs(g);
    const auto out = consolidate(in);
    const auto& m = in.measurements;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const auto& o = out.classes[c];
      if (o.decision != Decision::Rejected) continue;
      switch (o.fired_rule) {
        case Rule::R2a: CHECK(*m.heart_rate < cfg.st_min_heart_rate); break;
        case Rule::R2b: CHECK(*m.heart_rate > cfg.sb_max_heart_rate); break;
        case Rule::R2c: CHECK(*m.qrs_duration < cfg.bbb_min_qrs); break;
        case Rule::R2d: CHECK(*m.pr_interval < cfg.avb_min_pr); break;
        default: break;
      }
    }
    CHECK(consolidate(in) == out);
  }
}

TEST_CASE("monotone in the expert label") {
  for (bool veto : {true, false}) {
    ConsolidationConfig cfg;
    cfg.measurements_veto_agreement = veto;
    std::mt19937_64 g(6);
    int flips = 0;
    while (flips < 1000) {
      auto in = random_inputs(g);
      const std::size_t c = g() % kNumClasses;
      in.medical[c] = false;
      const auto before = consolidate(in, cfg).classes[c];
      in.medical[c] = true;
      const auto after = consolidate(in, cfg).classes[c];
      ++flips;
      if (before.decision == Decision::Accepted) CHECK(after.decision != Decision::Rejected);
      if (before.decision == Decision::NeedsReview) CHECK(after.decision != Decision::Rejected);
    }
  }
}

TEST_CASE("planted stream counters") {
  for (bool veto : {true, false}) {
    ConsolidationConfig cfg;
    cfg.measurements_veto_agreement = veto;
    const auto s = plant_consolidation_stream(10000, 8, cfg);
    const auto b = batch_consolidate(s.exam_ids, s.inputs, cfg);
    CHECK(b.counters.by_rule == s.expected_counters.by_rule);
    CHECK(b.counters.by_decision == s.expected_counters.by_decision);
    std::size_t mismatched = 0;
    for (std::size_t i = 0; i < s.expected.size(); ++i) mismatched += !(b.outcomes[i] == s.expected[i]);
    CHECK(mismatched == 0);
    std::size_t total = 0;
    for (auto n : b.counters.by_decision) total += n;
    CHECK(total == 10000 * kNumClasses);
  }
}

TEST_CASE("batch outputs") {
  SUBCASE("empty") {
    const auto b = batch_consolidate({}, {});
    std::ostringstream os;
    b.write_outcomes_csv(os);
    CHECK(os.str() == "exam_id,class,decision,fired_rule,reason\n");
  }
  SUBCASE("order and review queue") {
    const std::vector<std::string> ids{"c", "a", "b"};
    std::vector<AnnotationInputs> in{with(Abnormality::LBBB, false, true, true, {72.0, 160.0, 150.0, 30.0}),
                                     AnnotationInputs{}, with(Abnormality::SB, true, true, false, {45.0, 160.0, 90.0, 30.0})};
    const auto b = batch_consolidate(ids, in);
    std::ostringstream os, rq, lab;
    b.write_outcomes_csv(os);
    b.write_review_queue_csv(rq);
    b.write_labels_csv(lab);
    std::istringstream lines(os.str());
    std::string line;
    std::getline(lines, line);
    std::vector<std::string> order;
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
      ++rows;
      const auto id = line.substr(0, line.find(','));
      if (order.empty() || order.back() != id) order.push_back(id);
    }
    CHECK(rows == 3 * kNumClasses);
    CHECK(order == ids);
    CHECK(rq.str() == "exam_id,class,decision,fired_rule,reason\nc,LBBB,NeedsReview,4,\n");
    CHECK(lab.str().find("b,0,0,0,1,0,0") != std::string::npos);
    CHECK_THROWS(batch_consolidate(ids, std::span<const AnnotationInputs>(in).first(2)));
  }
}

TEST_CASE("annotation files are joined on exam id") {
  const auto dir = std::filesystem::temp_directory_path() / "ecgdnn_test_annotations";
  std::filesystem::create_directories(dir);
  const std::string header = "exam_id,1dAVb,RBBB,LBBB,SB,AF,ST\n";
  write_file(dir / "medical.csv", header + "e1,0,0,0,0,0,1\ne2,0,1,0,0,0,0\n");
  write_file(dir / "unig.csv", header + "e2,0,1,0,0,0,0\ne1,0,0,0,0,0,1\n");
  write_file(dir / "meas.csv", "exam_id,heart_rate,pr_interval,qrs_duration,nn_sd\ne1,95,160,90,\ne2,70,150,140,20\n");
  AnnotationFiles files{dir / "medical.csv", dir / "unig.csv", std::nullopt, dir / "meas.csv"};
  const auto set = read_annotation_inputs(files);
  REQUIRE(set.exam_ids == std::vector<std::string>{"e1", "e2"});
  CHECK_FALSE(set.inputs[0].source_present[2]);
  CHECK_FALSE(set.inputs[0].measurements.nn_sd.has_value());
  const auto b = batch_consolidate(set.exam_ids, set.inputs);
  CHECK(b.outcomes[0][Abnormality::ST].fired_rule == Rule::R2a);
  CHECK(b.outcomes[1][Abnormality::RBBB].fired_rule == Rule::R1a);

  write_file(dir / "bad.csv", header + "e1,0,0,0,0,0,1\ne2,0,1,0\n");
  files.medical = dir / "bad.csv";
  try {
    read_annotation_inputs(files);
    FAIL("expected an input error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  write_file(dir / "dup.csv", header + "e1,0,0,0,0,0,1\ne1,0,0,0,0,0,1\n");
  files.medical = dir / "dup.csv";
  CHECK_THROWS_AS(read_annotation_inputs(files), InputError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("names round trip") {
  for (auto r : kRuleOrder) CHECK(parse_rule(to_string(r)) == r);
  for (auto d : {Decision::Accepted, Decision::Rejected, Decision::NeedsReview}) CHECK(parse_decision(to_string(d)) == d);
  CHECK_THROWS(parse_rule("9z"));
}

}
