#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ecgdnn {

inline constexpr std::size_t kNumLeads = 12;
inline constexpr std::array<std::string_view, kNumLeads> kLeadNames = {
    "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6"};

inline constexpr int kNetworkRate = 400;
inline constexpr std::size_t kWindowLength = 4096;

enum class Sex { Male, Female };

class InvalidRecord : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One exam: 12 leads of equal length, stored lead-major in `samples`.
struct EcgRecord {
  std::string exam_id;
  std::string patient_id;
  int sampling_rate = kNetworkRate;
  std::vector<float> samples;  // kNumLeads * length, millivolts
  double age = 0.0;
  Sex sex = Sex::Female;

  std::size_t length() const { return samples.size() / kNumLeads; }
  double duration() const { return static_cast<double>(length()) / sampling_rate; }

  std::span<const float> lead(std::size_t i) const {
    return {samples.data() + i * length(), length()};
  }
  std::span<float> lead(std::size_t i) {
    const auto n = length();
    return {samples.data() + i * n, n};
  }
};

/// Checks every record invariant (12 equal leads, rate, 6-11 s duration).
void validate(const EcgRecord& record);

/// Fixed 12 x 4096 network input. Padded columns are exactly zero.
struct NetworkInput {
  std::vector<float> data = std::vector<float>(kNumLeads * kWindowLength, 0.0f);
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
  std::size_t signal_length = 0;
  bool truncated = false;

  std::span<const float> lead(std::size_t i) const {
    return {data.data() + i * kWindowLength, kWindowLength};
  }
};

/// Output length for a rate change, rounded half up.
std::size_t resampled_length(std::size_t n, int from_rate, int to_rate);

/// Kaiser-windowed sinc polyphase resampler (beta 8.6, 32 taps per phase).
/// A record already at `target_rate` is returned unchanged.
EcgRecord resample(const EcgRecord& record, int target_rate);

/// Centres a 400 Hz record in the 4096-sample window; longer records are
/// truncated symmetrically and flagged.
NetworkInput pad_to_window(const EcgRecord& record);

NetworkInput preprocess(const EcgRecord& record);

// Dataset directory: manifest.json plus one little-endian float32 tracings file.

struct DatasetEntry {
  std::string exam_id;
  std::string patient_id;
  int sampling_rate = 0;
  std::size_t n_samples = 0;
  double age = 0.0;
  Sex sex = Sex::Female;
  std::string tracing_file;
  std::uint64_t byte_offset = 0;
};

std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dir);
std::vector<EcgRecord> read_dataset(const std::filesystem::path& dir);
void write_dataset(const std::filesystem::path& dir, std::span<const EcgRecord> records,
                   std::string_view tracing_file = "tracings.bin");

}  // namespace ecgdnn
