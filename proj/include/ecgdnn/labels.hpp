#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ecgdnn {

/// The six abnormalities, in the fixed column order used by every file format.
enum class Abnormality : std::size_t { AVB1 = 0, RBBB, LBBB, SB, AF, ST };

inline constexpr std::size_t kNumClasses = 6;

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "1dAVb", "RBBB", "LBBB", "SB", "AF", "ST"};

inline constexpr std::array<Abnormality, kNumClasses> kAllClasses = {
    Abnormality::AVB1, Abnormality::RBBB, Abnormality::LBBB,
    Abnormality::SB,   Abnormality::AF,   Abnormality::ST};

constexpr std::size_t index_of(Abnormality a) { return static_cast<std::size_t>(a); }

inline std::string_view class_name(Abnormality a) { return kClassNames[index_of(a)]; }

inline std::optional<Abnormality> parse_class(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (kClassNames[i] == name) return static_cast<Abnormality>(i);
  return std::nullopt;
}

/// One boolean per abnormality.
struct LabelVector {
  std::array<bool, kNumClasses> values{};

  bool operator[](Abnormality a) const { return values[index_of(a)]; }
  bool& operator[](Abnormality a) { return values[index_of(a)]; }
  bool operator[](std::size_t i) const { return values[i]; }
  bool& operator[](std::size_t i) { return values[i]; }

  std::size_t count() const {
    std::size_t n = 0;
    for (bool v : values) n += v ? 1 : 0;
    return n;
  }
  bool any() const { return count() > 0; }

  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

/// Raised for malformed user-supplied inputs (files, records, arguments).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ecgdnn
