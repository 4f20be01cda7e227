#include <doctest.h>

#include <random>

#include "ecgdnn/evalstats.hpp"
#include "ecgdnn/synth.hpp"
#include "ecgdnn/textlabel.hpp"

using namespace ecgdnn;

namespace {

const StopWords& shipped_stopwords() {
  static const StopWords s = load_stopwords(std::string(ECGDNN_DATA_DIR) + "/stopwords_pt.txt");
  return s;
}

const RuleBase& shipped_rules() {
  static const RuleBase r = load_rulebase(std::string(ECGDNN_DATA_DIR) + "/rulebase_pt.json");
  return r;
}

std::array<double, kNumClasses> score_of(Abnormality a, double v, std::array<double, kNumClasses> s = {}) {
  s[index_of(a)] = v;
  return s;
}

}  // namespace

TEST_SUITE("textlabel") {

TEST_CASE("n-grams after stop-word removal") {
  const StopWords de{"de"};
  const auto g = extract_ngrams("bloqueio de ramo direito", de);
  CHECK(g == NgramSet{"bloqueio", "ramo", "direito", "bloqueio ramo", "ramo direito", "bloqueio ramo direito"});
  CHECK(extract_ngrams("de de DE", de).empty());
  CHECK(extract_ngrams("", de).empty());
  CHECK(extract_ngrams("Bloqueio DE Ramo", de) == extract_ngrams("bloqueio de ramo", de));
}

TEST_CASE("normalization folds accents and punctuation") {
  CHECK(tokenize("Fibrilação Atrial!") == std::vector<std::string>{"fibrilacao", "atrial"});
  CHECK(tokenize("AUSÊNCIA  de\tonda-P") == std::vector<std::string>{"ausencia", "de", "onda", "p"});
  CHECK(tokenize("e\xCC\x81") == std::vector<std::string>{"e"});  // combining acute
  CHECK(tokenize("a\xFF" "b") == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("...").empty());
}

TEST_CASE("totality over arbitrary bytes") {
  const TextLabeler labeler{shipped_stopwords(), shipped_rules()};
  std::mt19937_64 g(3);
  for (int i = 0; i < 2000; ++i) {
    std::string s(g() % 64, '\0');
    for (auto& ch : s) ch = static_cast<char>(g() & 0xFF);
    CHECK_NOTHROW(labeler.label(s));
    CHECK(labeler.label(s) == labeler.label(s));
  }
}

TEST_CASE("stop-word files") {
  const auto s = parse_stopwords("# comment\nDe\n\n  da \nnão\n");
  CHECK(s.count("de"));
  CHECK(s.count("da"));
  CHECK(s.count("nao"));
  CHECK_FALSE(s.count("# comment"));
  CHECK(shipped_stopwords().count("de"));
  CHECK_FALSE(shipped_stopwords().count("sem"));
}

TEST_CASE("lazy classifier takes the best matching rule") {
  const auto rb = parse_rulebase(R"([
    {"antecedent": ["ramo direito"], "class": "RBBB", "confidence": 0.9},
    {"antecedent": ["bloqueio"], "class": "RBBB", "confidence": 0.6},
    {"antecedent": ["ramo", "esquerdo"], "class": "LBBB", "confidence": 0.8}
  ])");
  const auto s = classify_lazy(extract_ngrams("bloqueio de ramo direito", {"de"}), rb);
  CHECK(s[index_of(Abnormality::RBBB)] == 0.9);
  CHECK(s[index_of(Abnormality::LBBB)] == 0.0);
  CHECK(classify_lazy(extract_ngrams("bloqueio", {}), rb)[index_of(Abnormality::RBBB)] == 0.6);
  CHECK(classify_lazy(extract_ngrams("esquerdo e ramo", {}), rb)[index_of(Abnormality::LBBB)] == 0.8);
  for (double v : classify_lazy({}, rb)) CHECK(v == 0.0);
}

TEST_CASE("rule base validation") {
  CHECK_THROWS(parse_rulebase(R"([{"antecedent": ["x"], "class": "RBBB", "confidence": 1.5}])"));
  CHECK_THROWS(parse_rulebase(R"([{"antecedent": ["x"], "class": "XYZ", "confidence": 0.5}])"));
  CHECK_THROWS(parse_rulebase("[]"));
  CHECK_THROWS(parse_rulebase(R"([{"antecedent": ["a b c d"], "class": "RBBB", "confidence": 0.5}])"));
  CHECK_THROWS(parse_rulebase("not json"));
  CHECK(shipped_rules().version == "pt-1");
}

TEST_CASE("disambiguation") {
  const auto& rb = shipped_rules();
  const auto& sw = shipped_stopwords();
  SUBCASE("negation near the trigger") {
    const auto text = "sem bloqueio de ramo direito";
    const auto ng = extract_ngrams(text, sw);
    const auto s = classify_lazy(ng, rb);
    CHECK(s[index_of(Abnormality::RBBB)] >= 0.9);
    CHECK_FALSE(disambiguate(s, filtered_tokens(text, sw, rb), rb)[Abnormality::RBBB]);
    const TextLabeler labeler{sw, rb};
    CHECK_FALSE(labeler.label("ausência de fibrilação atrial")[Abnormality::AF]);
    CHECK(labeler.label("fibrilação atrial, sem bloqueio de ramo direito")[Abnormality::AF]);
    CHECK(labeler.label("bloqueio de ramo direito. sem outras alterações, sem alteração da repolarização")[Abnormality::RBBB]);
  }
  SUBCASE("all zero") {
    CHECK_FALSE(disambiguate({}, {}, rb).any());
  }
  SUBCASE("exclusive pair keeps the higher score") {
    const auto s = score_of(Abnormality::ST, 0.6, score_of(Abnormality::SB, 0.8));
    const auto y = disambiguate(s, {"bradicardia", "taquicardia"}, rb);
    CHECK(y[Abnormality::SB]);
    CHECK_FALSE(y[Abnormality::ST]);
  }
  SUBCASE("threshold") {
    CHECK(disambiguate(score_of(Abnormality::AF, 0.5), {"x"}, rb)[Abnormality::AF]);
    CHECK_FALSE(disambiguate(score_of(Abnormality::AF, 0.49), {"x"}, rb)[Abnormality::AF]);
  }
}

TEST_CASE("an unrelated rule changes nothing") {
  const auto& sw = shipped_stopwords();
  RuleBase extended = shipped_rules();
  extended.rules.push_back({{"sobrecarga ventricular"}, Abnormality::LBBB, 0.99, 1});
  const TextLabeler a{sw, shipped_rules()}, b{sw, extended};
  for (const char* t : {"bloqueio de ramo direito", "fibrilação atrial", "ritmo sinusal", "taquicardia sinusal"})
    CHECK(a.label(t) == b.label(t));
  CHECK(b.label("sobrecarga ventricular esquerda")[Abnormality::LBBB]);
}

TEST_CASE("generated report corpus is recovered exactly") {
  CorpusSpec spec;
  spec.n = 600;
  spec.prevalence = {0.15, 0.15, 0.15, 0.15, 0.15, 0.15};
  spec.seed = 17;
  const auto labels = assign_corpus_labels(spec);
  const TextLabeler labeler{shipped_stopwords(), shipped_rules()};
  std::vector<LabelVector> got;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto text = generate_report(labels[i], 1000 + i);
    got.push_back(labeler.label(text));
    if (got.back() != labels[i]) FAIL_CHECK(text);
  }
  double macro = 0.0;
  for (const auto& cm : confusion(got, labels)) macro += scores(cm).f1;
  CHECK(macro / kNumClasses == 1.0);
}

}
