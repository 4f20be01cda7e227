#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "ecgdnn/signal.hpp"

using namespace ecgdnn;

namespace {

EcgRecord make_record(int rate, std::size_t n, std::uint64_t seed = 1) {
  EcgRecord r;
  r.exam_id = "x" + std::to_string(seed);
  r.patient_id = "p";
  r.sampling_rate = rate;
  r.samples.resize(kNumLeads * n);
  std::mt19937_64 g(seed);
  std::normal_distribution<float> nd(0.0f, 0.5f);
  for (auto& v : r.samples) v = nd(g);
  return r;
}

EcgRecord sine_record(int rate, double seconds, double hz) {
  EcgRecord r = make_record(rate, static_cast<std::size_t>(std::lround(rate * seconds)));
  const std::size_t n = r.length();
  for (std::size_t l = 0; l < kNumLeads; ++l)
    for (std::size_t i = 0; i < n; ++i)
      r.samples[l * n + i] = static_cast<float>(std::sin(2 * std::numbers::pi * hz * i / rate + 0.3 * l));
  return r;
}

}  // namespace

TEST_SUITE("signal") {

TEST_CASE("resampled lengths") {
  CHECK(resample(make_record(300, 2100), 400).length() == 2800);
  CHECK(resample(make_record(600, 6000), 400).length() == 4000);
  CHECK(resample(make_record(500, 3500), 400).length() == 2800);
  CHECK(resampled_length(2101, 300, 400) == 2801);
  CHECK(resampled_length(7, 3, 2) == 5);  // 4.67 rounds up
}

TEST_CASE("same rate is the identity") {
  const auto r = make_record(400, 3000);
  const auto out = resample(r, 400);
  CHECK(out.samples == r.samples);
  CHECK(out.sampling_rate == 400);
  const auto once = resample(make_record(300, 2100), 400);
  CHECK(resample(once, 400).samples == once.samples);
}

TEST_CASE("sine survives a rate change") {
  for (int rate : {600, 300, 500}) {
    const auto r = sine_record(rate, 7.0, 5.0);
    const auto out = resample(r, 400);
    const std::size_t n = out.length();
    double worst = 0.0;
    for (std::size_t l = 0; l < kNumLeads; ++l)
      for (std::size_t i = 50; i + 50 < n; ++i) {
        const double t = static_cast<double>(i) / 400.0;
        const double ref = std::sin(2 * std::numbers::pi * 5.0 * t + 0.3 * l);
        worst = std::max(worst, std::abs(out.samples[l * n + i] - ref));
      }
    CAPTURE(rate);
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("centering in the window") {
  auto check = [](std::size_t n, std::size_t left, std::size_t right) {
    const auto r = make_record(400, n);
    const auto in = pad_to_window(r);
    CHECK(in.pad_left == left);
    CHECK(in.pad_right == right);
    CHECK(in.signal_length == n);
    CHECK_FALSE(in.truncated);
    for (std::size_t l = 0; l < kNumLeads; ++l) {
      const auto lead = in.lead(l);
      double pad_energy = 0.0;
      for (std::size_t i = 0; i < left; ++i) pad_energy += lead[i] * lead[i];
      for (std::size_t i = left + n; i < kWindowLength; ++i) pad_energy += lead[i] * lead[i];
      CHECK(pad_energy == 0.0);
      for (std::size_t i = 0; i < n; ++i) REQUIRE(lead[left + i] == r.lead(l)[i]);
    }
  };
  check(2800, 648, 648);
  check(4096, 0, 0);
  check(4000, 48, 48);
  check(2801, 647, 648);
}

TEST_CASE("long records are truncated symmetrically") {
  const auto r = make_record(400, 4300);
  const auto in = pad_to_window(r);
  CHECK(in.truncated);
  CHECK(in.pad_left == 0);
  CHECK(in.pad_right == 0);
  CHECK(in.lead(0)[0] == r.lead(0)[102]);
  CHECK(in.lead(11)[4095] == r.lead(11)[102 + 4095]);
}

TEST_CASE("preprocess composes resampling and padding") {
  auto a = preprocess(make_record(300, 2100));
  CHECK(a.signal_length == 2800);
  CHECK(a.pad_left == 648);
  auto b = preprocess(make_record(600, 6000));
  CHECK(b.signal_length == 4000);
  CHECK(b.pad_left == 48);
  CHECK(b.pad_right == 48);
  const auto exact = make_record(400, 4096);
  const auto c = preprocess(exact);
  CHECK(std::equal(c.data.begin(), c.data.end(), exact.samples.begin()));
  CHECK(preprocess(make_record(300, 2100)).data == a.data);
}

TEST_CASE("record validation") {
  auto r = make_record(400, 3000);
  CHECK_NOTHROW(validate(r));
  r.samples.clear();
  CHECK_THROWS_AS(resample(r, 300), InvalidRecord);
  r = make_record(400, 3000);
  r.samples.pop_back();
  CHECK_THROWS_AS(validate(r), InvalidRecord);
  CHECK_THROWS_AS(validate(make_record(400, 1000)), InvalidRecord);
  CHECK_THROWS_AS(validate(make_record(0, 3000)), InvalidRecord);
  CHECK_THROWS_AS(resample(make_record(400, 3000), 0), InvalidRecord);
}

TEST_CASE("dataset directory round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "ecgdnn_test_dataset";
  std::filesystem::remove_all(dir);
  std::vector<EcgRecord> records{make_record(400, 3000, 1), make_record(300, 2400, 2), make_record(500, 4000, 3)};
  records[1].sex = Sex::Male;
  records[1].age = 61.5;
  write_dataset(dir, records);
  const auto back = read_dataset(dir);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].exam_id == records[i].exam_id);
    CHECK(back[i].sampling_rate == records[i].sampling_rate);
    CHECK(back[i].samples == records[i].samples);
  }
  CHECK(back[1].sex == Sex::Male);
  CHECK(back[1].age == 61.5);
  const auto manifest = read_manifest(dir);
  CHECK(manifest[2].byte_offset == (3000 + 2400) * 12 * 4);
  std::filesystem::remove_all(dir);
  CHECK_THROWS(read_dataset(dir));
}

}
