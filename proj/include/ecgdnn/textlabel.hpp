#pragma once

#include <array>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ecgdnn/labels.hpp"

namespace ecgdnn {

struct TextReport {
  std::string exam_id;
  std::string raw_text;
};

/// Lowercase, accent-folded tokens. Anything that is not a letter or digit
/// separates tokens, including invalid UTF-8 bytes.
std::vector<std::string> tokenize(std::string_view text);

using StopWords = std::unordered_set<std::string>;

/// One word per line, UTF-8; words are normalized like report tokens.
StopWords load_stopwords(const std::filesystem::path& path);
StopWords parse_stopwords(std::string_view text);

/// Space-joined n-grams, n = 1..3, over the token stream after stop-word removal.
using NgramSet = std::set<std::string>;

NgramSet extract_ngrams(std::string_view text, const StopWords& stopwords);

struct AssociationRule {
  std::vector<std::string> antecedent;  // n-grams, all required
  Abnormality cls = Abnormality::AVB1;
  double confidence = 0.0;
  std::size_t support = 0;
};

struct RuleBase {
  std::string version;
  std::vector<AssociationRule> rules;
  /// Normalized token sequences, e.g. {"sem"} or {"ausencia", "de"}.
  std::vector<std::vector<std::string>> negation_markers;
  /// Pairs that cannot both be present; the first listed wins a score tie.
  std::vector<std::pair<Abnormality, Abnormality>> exclusive_pairs;
  double threshold = 0.5;
  std::size_t negation_window = 3;

  void validate() const;
};

/// Accepts either a bare JSON array of {antecedent, class, confidence[, support]}
/// or an object {version, rules, negation_markers, exclusive_pairs, threshold,
/// negation_window}.
RuleBase load_rulebase(const std::filesystem::path& path);
RuleBase parse_rulebase(std::string_view json_text);

/// Per-class max confidence of rules whose antecedent is contained in `ngrams`.
std::array<double, kNumClasses> classify_lazy(const NgramSet& ngrams, const RuleBase& rulebase);

/// Tokens kept after stop-word removal, with negation markers always kept.
std::vector<std::string> filtered_tokens(std::string_view text, const StopWords& stopwords,
                                         const RuleBase& rulebase);

/// Negation, then exclusive pairs, then the threshold.
LabelVector disambiguate(const std::array<double, kNumClasses>& scores,
                         const std::vector<std::string>& tokens, const RuleBase& rulebase);

struct TextLabeler {
  StopWords stopwords;
  RuleBase rulebase;

  LabelVector label(std::string_view text) const;
  std::array<double, kNumClasses> scores(std::string_view text) const;
};

}  // namespace ecgdnn
