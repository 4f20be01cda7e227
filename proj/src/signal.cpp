#include "ecgdnn/signal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include "json.hpp"

namespace ecgdnn {

namespace {

constexpr double kKaiserBeta = 8.6;
constexpr int kTapsPerPhase = 32;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double kaiser(double x, double beta) {
  // x in [-1, 1]
  if (std::abs(x) >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - x * x)) / std::cyl_bessel_i(0.0, beta);
}

// One filter per output phase. Taps are applied to input samples
// i0 - half + 1 ... i0 + half, where i0 = floor(output position).
std::vector<std::vector<double>> design_phases(int up, int down) {
  const double cutoff = std::min(1.0, static_cast<double>(up) / down);
  const int half = kTapsPerPhase / 2;
  std::vector<std::vector<double>> phases(up, std::vector<double>(kTapsPerPhase));
  for (int phase = 0; phase < up; ++phase) {
    const double frac = static_cast<double>(phase) / up;
    double sum = 0.0;
    for (int k = 0; k < kTapsPerPhase; ++k) {
      const int m = k - half + 1;
      const double tau = frac - m;
      const double h = cutoff * sinc(cutoff * tau) * kaiser(tau / half, kKaiserBeta);
      phases[phase][k] = h;
      sum += h;
    }
    // unit DC gain per phase
    for (double& h : phases[phase]) h /= sum;
  }
  return phases;
}

void resample_lead(std::span<const float> in, std::span<float> out, int up, int down,
                   const std::vector<std::vector<double>>& phases) {
  const auto n = static_cast<std::int64_t>(in.size());
  const int half = kTapsPerPhase / 2;
  for (std::size_t j = 0; j < out.size(); ++j) {
    const std::int64_t pos = static_cast<std::int64_t>(j) * down;
    const std::int64_t i0 = pos / up;
    const auto& taps = phases[static_cast<std::size_t>(pos % up)];
    double acc = 0.0;
    for (int k = 0; k < kTapsPerPhase; ++k) {
      const std::int64_t idx = i0 + k - half + 1;
      if (idx >= 0 && idx < n) acc += taps[k] * in[static_cast<std::size_t>(idx)];
    }
    out[j] = static_cast<float>(acc);
  }
}

template <typename T>
T from_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

std::string sex_to_string(Sex s) { return s == Sex::Male ? "male" : "female"; }

Sex sex_from_string(const std::string& s) {
  if (s == "male" || s == "M" || s == "m") return Sex::Male;
  if (s == "female" || s == "F" || s == "f") return Sex::Female;
  throw InvalidRecord("unknown sex value: " + s);
}

}  // namespace

void validate(const EcgRecord& record) {
  if (record.sampling_rate <= 0)
    throw InvalidRecord(record.exam_id + ": sampling rate must be positive");
  if (record.samples.empty()) throw InvalidRecord(record.exam_id + ": empty record");
  if (record.samples.size() % kNumLeads != 0)
    throw InvalidRecord(record.exam_id + ": leads have unequal length");
  const double d = record.duration();
  if (d < 6.0 || d > 11.0)
    throw InvalidRecord(record.exam_id + ": duration " + std::to_string(d) +
                        " s outside [6, 11]");
  for (float v : record.samples)
    if (!std::isfinite(v)) throw InvalidRecord(record.exam_id + ": non-finite sample");
}

std::size_t resampled_length(std::size_t n, int from_rate, int to_rate) {
  const auto num = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(to_rate);
  const auto den = static_cast<std::uint64_t>(from_rate);
  return static_cast<std::size_t>((2 * num + den) / (2 * den));
}

EcgRecord resample(const EcgRecord& record, int target_rate) {
  if (target_rate <= 0) throw InvalidRecord("target rate must be positive");
  if (record.sampling_rate <= 0)
    throw InvalidRecord(record.exam_id + ": sampling rate must be positive");
  if (record.samples.empty() || record.samples.size() % kNumLeads != 0)
    throw InvalidRecord(record.exam_id + ": empty or ragged lead");
  if (record.sampling_rate == target_rate) return record;

  const int g = std::gcd(record.sampling_rate, target_rate);
  const int up = target_rate / g;
  const int down = record.sampling_rate / g;
  const auto phases = design_phases(up, down);

  EcgRecord out = record;
  out.sampling_rate = target_rate;
  const std::size_t n_out = resampled_length(record.length(), record.sampling_rate, target_rate);
  out.samples.assign(n_out * kNumLeads, 0.0f);
  for (std::size_t lead = 0; lead < kNumLeads; ++lead)
    resample_lead(record.lead(lead), out.lead(lead), up, down, phases);
  return out;
}

NetworkInput pad_to_window(const EcgRecord& record) {
  if (record.sampling_rate != kNetworkRate)
    throw InvalidRecord(record.exam_id + ": pad_to_window expects a 400 Hz record");
  if (record.samples.empty() || record.samples.size() % kNumLeads != 0)
    throw InvalidRecord(record.exam_id + ": empty or ragged lead");

  NetworkInput input;
  const std::size_t n = record.length();
  std::size_t src_begin = 0;
  std::size_t count = n;
  if (n > kWindowLength) {
    input.truncated = true;
    src_begin = (n - kWindowLength) / 2;
    count = kWindowLength;
  } else {
    input.pad_left = (kWindowLength - n) / 2;
    input.pad_right = kWindowLength - n - input.pad_left;
  }
  input.signal_length = count;
  for (std::size_t lead = 0; lead < kNumLeads; ++lead) {
    const auto src = record.lead(lead).subspan(src_begin, count);
    std::copy(src.begin(), src.end(),
              input.data.begin() + static_cast<std::ptrdiff_t>(lead * kWindowLength +
                                                               input.pad_left));
  }
  return input;
}

NetworkInput preprocess(const EcgRecord& record) {
  validate(record);
  return pad_to_window(resample(record, kNetworkRate));
}

std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw InvalidRecord("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidRecord(path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw InvalidRecord(path.string() + ": manifest must be a JSON array");
  std::vector<DatasetEntry> entries;
  entries.reserve(j.size());
  try {
    for (const auto& e : j) {
      DatasetEntry d;
      d.exam_id = e.at("exam_id").get<std::string>();
      d.patient_id = e.at("patient_id").get<std::string>();
      d.sampling_rate = e.at("sampling_rate").get<int>();
      d.n_samples = e.at("n_samples").get<std::size_t>();
      d.age = e.at("age").get<double>();
      d.sex = sex_from_string(e.at("sex").get<std::string>());
      d.tracing_file = e.at("tracing_file").get<std::string>();
      d.byte_offset = e.at("byte_offset").get<std::uint64_t>();
      entries.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidRecord(path.string() + ": " + e.what());
  }
  return entries;
}

std::vector<EcgRecord> read_dataset(const std::filesystem::path& dir) {
  const auto entries = read_manifest(dir);
  std::vector<EcgRecord> records;
  records.reserve(entries.size());
  std::string open_name;
  std::ifstream tracing;
  for (const auto& e : entries) {
    if (e.tracing_file != open_name) {
      tracing = std::ifstream(dir / e.tracing_file, std::ios::binary);
      if (!tracing) throw InvalidRecord("cannot open tracing file " + e.tracing_file);
      open_name = e.tracing_file;
    }
    EcgRecord r;
    r.exam_id = e.exam_id;
    r.patient_id = e.patient_id;
    r.sampling_rate = e.sampling_rate;
    r.age = e.age;
    r.sex = e.sex;
    r.samples.resize(e.n_samples * kNumLeads);
    tracing.seekg(static_cast<std::streamoff>(e.byte_offset));
    tracing.read(reinterpret_cast<char*>(r.samples.data()),
                 static_cast<std::streamsize>(r.samples.size() * sizeof(float)));
    if (!tracing) throw InvalidRecord(e.exam_id + ": tracing file too short");
    for (float& v : r.samples) v = from_little_endian(v);
    validate(r);
    records.push_back(std::move(r));
  }
  return records;
}

void write_dataset(const std::filesystem::path& dir, std::span<const EcgRecord> records,
                   std::string_view tracing_file) {
  std::filesystem::create_directories(dir);
  std::ofstream bin(dir / tracing_file, std::ios::binary | std::ios::trunc);
  if (!bin) throw InvalidRecord("cannot write " + (dir / tracing_file).string());
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& r : records) {
    manifest.push_back({{"exam_id", r.exam_id},
                        {"patient_id", r.patient_id},
                        {"sampling_rate", r.sampling_rate},
                        {"n_samples", r.length()},
                        {"age", r.age},
                        {"sex", sex_to_string(r.sex)},
                        {"tracing_file", std::string(tracing_file)},
                        {"byte_offset", offset}});
    for (float v : r.samples) {
      const float le = from_little_endian(v);
      bin.write(reinterpret_cast<const char*>(&le), sizeof le);
    }
    offset += r.samples.size() * sizeof(float);
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(1) << '\n';
}

}  // namespace ecgdnn
