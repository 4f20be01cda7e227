#include "ecgdnn/textlabel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ecgdnn {

namespace {

// Folding for U+00C0..U+017F; empty entries are separators.
constexpr std::array<std::string_view, 0xC0> kLatinFold = {
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "o", "", "o", "u", "u", "u", "u", "y", "th", "ss",
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "o", "", "o", "u", "u", "u", "u", "y", "th", "y",
    "a", "a", "a", "a", "a", "a", "c", "c", "c", "c", "c", "c", "c", "c", "d", "d",
    "d", "d", "e", "e", "e", "e", "e", "e", "e", "e", "e", "e", "g", "g", "g", "g",
    "g", "g", "g", "g", "h", "h", "h", "h", "i", "i", "i", "i", "i", "i", "i", "i",
    "i", "i", "ij", "ij", "j", "j", "k", "k", "k", "l", "l", "l", "l", "l", "l", "l",
    "l", "l", "l", "n", "n", "n", "n", "n", "n", "n", "n", "n", "o", "o", "o", "o",
    "o", "o", "oe", "oe", "r", "r", "r", "r", "r", "r", "s", "s", "s", "s", "s", "s",
    "s", "s", "t", "t", "t", "t", "t", "t", "u", "u", "u", "u", "u", "u", "u", "u",
    "u", "u", "u", "u", "w", "w", "y", "y", "y", "z", "z", "z", "z", "z", "z", "s",
};

constexpr std::string_view kNegationToken = "\x01neg";

// Decodes one UTF-8 sequence at `i`. Returns the code point or -1 for an
// invalid byte, and advances `i` past what it consumed.
long decode_utf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  std::size_t len;
  long cp;
  if ((b0 & 0xE0) == 0xC0) len = 2, cp = b0 & 0x1F;
  else if ((b0 & 0xF0) == 0xE0) len = 3, cp = b0 & 0x0F;
  else if ((b0 & 0xF8) == 0xF0) len = 4, cp = b0 & 0x07;
  else {
    ++i;
    return -1;
  }
  if (i + len > s.size()) {
    ++i;
    return -1;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return -1;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr long kMin[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    ++i;
    return -1;
  }
  i += len;
  return cp;
}

bool is_combining(long cp) { return cp >= 0x300 && cp <= 0x36F; }

bool is_separator(long cp) {
  return cp < 0 || (cp >= 0x80 && cp < 0xC0) || (cp >= 0x2000 && cp <= 0x2BFF) ||
         (cp >= 0x3000 && cp <= 0x303F) || cp == 0xFEFF || (cp >= 0xFE00 && cp <= 0xFE0F);
}

void append_utf8(std::string& out, long cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::vector<std::string> ngram_tokens(const std::vector<std::string>& tokens,
                                      const StopWords& stopwords) {
  std::vector<std::string> kept;
  for (const auto& t : tokens)
    if (!stopwords.count(t)) kept.push_back(t);
  return kept;
}

std::vector<std::string> split_words(std::string_view phrase) { return tokenize(phrase); }

Abnormality class_from_json(const nlohmann::json& j) {
  const auto name = j.get<std::string>();
  if (auto c = parse_class(name)) return *c;
  throw InputError("rule base: unknown class '" + name + "'");
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const long cp = decode_utf8(text, i);
    if (cp >= 0 && cp < 0x80) {
      const auto ch = static_cast<char>(cp);
      if (ch >= 'A' && ch <= 'Z') current += static_cast<char>(ch - 'A' + 'a');
      else if ((ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9')) current += ch;
      else flush();
    } else if (is_combining(cp)) {
      // dropped: accents written as combining marks fold away
    } else if (cp >= 0xC0 && cp < 0x180) {
      const auto f = kLatinFold[static_cast<std::size_t>(cp - 0xC0)];
      if (f.empty()) flush();
      else current += f;
    } else if (is_separator(cp)) {
      flush();
    } else {
      append_utf8(current, cp);
    }
  }
  flush();
  return tokens;
}

StopWords parse_stopwords(std::string_view text) {
  StopWords words;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    for (auto& t : tokenize(line)) words.insert(t);
  }
  return words;
}

StopWords load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open stop-word file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_stopwords(ss.str());
}

NgramSet extract_ngrams(std::string_view text, const StopWords& stopwords) {
  const auto kept = ngram_tokens(tokenize(text), stopwords);
  NgramSet out;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    std::string gram = kept[i];
    out.insert(gram);
    for (std::size_t n = 2; n <= 3 && i + n <= kept.size(); ++n) {
      gram += ' ';
      gram += kept[i + n - 1];
      out.insert(gram);
    }
  }
  return out;
}

void RuleBase::validate() const {
  if (rules.empty()) throw InputError("rule base has no rules");
  for (const auto& r : rules) {
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0))
      throw InputError("rule confidence outside [0, 1]");
    if (r.antecedent.empty()) throw InputError("rule with empty antecedent");
    for (const auto& g : r.antecedent)
      if (g.empty() || std::count(g.begin(), g.end(), ' ') > 2)
        throw InputError("antecedent '" + g + "' is not a 1- to 3-gram");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw InputError("threshold outside [0, 1]");
  for (const auto& m : negation_markers)
    if (m.empty()) throw InputError("empty negation marker");
}

RuleBase parse_rulebase(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("rule base is not valid JSON: ") + e.what());
  }
  RuleBase rb;
  const nlohmann::json* rules = &j;
  try {
    if (j.is_object()) {
      rb.version = j.value("version", "");
      rules = &j.at("rules");
      for (const auto& m : j.value("negation_markers", nlohmann::json::array())) {
        auto toks = split_words(m.get<std::string>());
        if (toks.empty()) throw InputError("rule base: negation marker normalizes to nothing");
        rb.negation_markers.push_back(std::move(toks));
      }
      for (const auto& p : j.value("exclusive_pairs", nlohmann::json::array())) {
        if (!p.is_array() || p.size() != 2) throw InputError("rule base: exclusive pair needs two classes");
        rb.exclusive_pairs.emplace_back(class_from_json(p[0]), class_from_json(p[1]));
      }
      rb.threshold = j.value("threshold", 0.5);
      rb.negation_window = j.value("negation_window", std::size_t{3});
    } else if (!j.is_array()) {
      throw InputError("rule base must be a JSON array or object");
    }
    for (const auto& r : *rules) {
      AssociationRule rule;
      for (const auto& a : r.at("antecedent")) {
        const auto toks = split_words(a.get<std::string>());
        if (toks.empty()) continue;
        std::string gram;
        for (const auto& t : toks) gram += (gram.empty() ? "" : " ") + t;
        rule.antecedent.push_back(gram);
      }
      rule.cls = class_from_json(r.at("class"));
      rule.confidence = r.at("confidence").get<double>();
      rule.support = r.value("support", std::size_t{0});
      rb.rules.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed rule base: ") + e.what());
  }
  rb.validate();
  return rb;
}

RuleBase load_rulebase(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open rule base " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_rulebase(ss.str());
}

std::array<double, kNumClasses> classify_lazy(const NgramSet& ngrams, const RuleBase& rulebase) {
  if (rulebase.rules.empty()) throw InputError("rule base has no rules");
  std::array<double, kNumClasses> scores{};
  for (const auto& r : rulebase.rules) {
    const bool applies = std::all_of(r.antecedent.begin(), r.antecedent.end(),
                                     [&](const std::string& g) { return ngrams.count(g) > 0; });
    if (applies) scores[index_of(r.cls)] = std::max(scores[index_of(r.cls)], r.confidence);
  }
  return scores;
}

std::vector<std::string> filtered_tokens(std::string_view text, const StopWords& stopwords,
                                         const RuleBase& rulebase) {
  const auto raw = tokenize(text);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < raw.size();) {
    std::size_t matched = 0;
    for (const auto& m : rulebase.negation_markers) {
      if (m.size() <= matched || i + m.size() > raw.size()) continue;
      if (std::equal(m.begin(), m.end(), raw.begin() + static_cast<std::ptrdiff_t>(i)))
        matched = m.size();
    }
    if (matched) {
      out.emplace_back(kNegationToken);
      i += matched;
      continue;
    }
    if (!stopwords.count(raw[i])) out.push_back(raw[i]);
    ++i;
  }
  return out;
}

namespace {

// True when the class has trigger occurrences in `tokens` and all of them sit
// within `window` tokens after a negation marker.
bool negated(Abnormality cls, const std::vector<std::string>& tokens, const RuleBase& rb) {
  std::vector<std::vector<std::string>> triggers;
  for (const auto& r : rb.rules)
    if (r.cls == cls)
      for (const auto& g : r.antecedent) triggers.push_back(split_words(g));

  std::size_t occurrences = 0, negated_occurrences = 0;
  for (const auto& trig : triggers) {
    if (trig.empty() || trig.size() > tokens.size()) continue;
    for (std::size_t s = 0; s + trig.size() <= tokens.size(); ++s) {
      if (!std::equal(trig.begin(), trig.end(), tokens.begin() + static_cast<std::ptrdiff_t>(s)))
        continue;
      ++occurrences;
      const std::size_t lo = s >= rb.negation_window ? s - rb.negation_window : 0;
      for (std::size_t k = lo; k < s; ++k)
        if (tokens[k] == kNegationToken) {
          ++negated_occurrences;
          break;
        }
    }
  }
  return occurrences > 0 && negated_occurrences == occurrences;
}

}  // namespace

LabelVector disambiguate(const std::array<double, kNumClasses>& scores,
                         const std::vector<std::string>& tokens, const RuleBase& rulebase) {
  auto s = scores;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (s[c] > 0.0 && negated(static_cast<Abnormality>(c), tokens, rulebase)) s[c] = 0.0;
  for (const auto& [a, b] : rulebase.exclusive_pairs) {
    double& sa = s[index_of(a)];
    double& sb = s[index_of(b)];
    if (sa <= 0.0 || sb <= 0.0) continue;
    if (sb > sa) sa = 0.0;
    else sb = 0.0;
  }
  LabelVector out;
  for (std::size_t c = 0; c < kNumClasses; ++c) out[c] = s[c] > 0.0 && s[c] >= rulebase.threshold;
  return out;
}

std::array<double, kNumClasses> TextLabeler::scores(std::string_view text) const {
  return classify_lazy(extract_ngrams(text, stopwords), rulebase);
}

LabelVector TextLabeler::label(std::string_view text) const {
  return disambiguate(scores(text), filtered_tokens(text, stopwords, rulebase), rulebase);
}

}  // namespace ecgdnn
