#include "run_config.hpp"

#include <charconv>
#include <fstream>

namespace ecgdnn::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw InputError("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty())
    bad_value(key, value, std::is_floating_point_v<T> ? "a number" : "a non-negative integer");
  return out;
}

bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

template <typename T>
std::string format(T v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
  }
}

template <typename T>
T parse_value(const std::string& key, const std::string& value) {
  if constexpr (std::is_same_v<T, bool>)
    return parse_flag(key, value);
  else
    return parse_number<T>(key, value);
}

/// Key backed by a plain member reached through `ref`.
template <typename T, typename Ref>
ConfigKey field(std::string key, std::string help, Ref ref) {
  return {key, std::move(help),
          [key, ref](RunConfig& c, const std::string& v) { ref(c) = parse_value<T>(key, v); },
          [ref](const RunConfig& c) { return format<T>(ref(const_cast<RunConfig&>(c))); }};
}

template <typename T, typename Ref>
ConfigKey optional_field(std::string key, std::string help, Ref ref) {
  return {key, std::move(help),
          [key, ref](RunConfig& c, const std::string& v) {
            if (v.empty() || v == "none")
              ref(c).reset();
            else
              ref(c) = parse_value<T>(key, v);
          },
          [ref](const RunConfig& c) {
            const auto& o = ref(const_cast<RunConfig&>(c));
            return o ? format<T>(*o) : std::string("none");
          }};
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  // architecture
  k.push_back(field<std::size_t>("arch.n_residual_blocks", "residual blocks",
                                 [](RunConfig& c) -> auto& { return c.arch.n_residual_blocks; }));
  k.push_back(field<std::size_t>("arch.kernel_length", "convolution kernel length",
                                 [](RunConfig& c) -> auto& { return c.arch.kernel_length; }));
  k.push_back(field<std::size_t>("arch.initial_filters", "filters of the stem and first block",
                                 [](RunConfig& c) -> auto& { return c.arch.initial_filters; }));
  k.push_back(field<std::size_t>("arch.filter_growth", "filters added at each growth step",
                                 [](RunConfig& c) -> auto& { return c.arch.filter_growth; }));
  k.push_back(field<std::size_t>("arch.growth_every", "blocks between filter increases",
                                 [](RunConfig& c) -> auto& { return c.arch.growth_every; }));
  k.push_back(field<std::size_t>("arch.subsample_factor", "length reduction per block",
                                 [](RunConfig& c) -> auto& { return c.arch.subsample_factor; }));
  k.push_back(field<double>("arch.dropout_rate", "dropout drop probability",
                            [](RunConfig& c) -> auto& { return c.arch.dropout_rate; }));
  k.push_back(field<double>("arch.bn_momentum", "batch norm running-average momentum",
                            [](RunConfig& c) -> auto& { return c.arch.bn_momentum; }));
  k.push_back(field<double>("arch.bn_epsilon", "batch norm epsilon",
                            [](RunConfig& c) -> auto& { return c.arch.bn_epsilon; }));
  // training
  k.push_back(field<double>("train.lr0", "initial learning rate",
                            [](RunConfig& c) -> auto& { return c.train.lr0; }));
  k.push_back(field<double>("train.adam_beta1", "Adam first-moment decay",
                            [](RunConfig& c) -> auto& { return c.train.adam.beta1; }));
  k.push_back(field<double>("train.adam_beta2", "Adam second-moment decay",
                            [](RunConfig& c) -> auto& { return c.train.adam.beta2; }));
  k.push_back(field<double>("train.adam_epsilon", "Adam epsilon",
                            [](RunConfig& c) -> auto& { return c.train.adam.epsilon; }));
  k.push_back(field<std::size_t>("train.batch_size", "examples per step",
                                 [](RunConfig& c) -> auto& { return c.train.batch_size; }));
  k.push_back(field<int>("train.max_epochs", "epoch limit",
                         [](RunConfig& c) -> auto& { return c.train.max_epochs; }));
  k.push_back(field<int>("train.plateau_patience", "epochs without improvement before decay",
                         [](RunConfig& c) -> auto& { return c.train.plateau_patience; }));
  k.push_back(field<double>("train.lr_decay_factor", "learning-rate multiplier on plateau",
                            [](RunConfig& c) -> auto& { return c.train.lr_decay_factor; }));
  k.push_back(field<bool>("train.allow_overlap", "train and validate on every record",
                          [](RunConfig& c) -> auto& { return c.train.allow_overlap; }));
  // split
  k.push_back({"split.mode", "random, by_patient or chronological",
               [](RunConfig& c, const std::string& v) { c.split.mode = parse_split_mode(v); },
               [](const RunConfig& c) -> std::string {
                 switch (c.split.mode) {
                   case SplitMode::Random: return "random";
                   case SplitMode::ByPatient: return "by_patient";
                   case SplitMode::Chronological: return "chronological";
                 }
                 return "";
               }});
  k.push_back(field<double>("split.train", "training fraction",
                            [](RunConfig& c) -> auto& { return c.split.train; }));
  k.push_back(field<double>("split.val", "validation fraction",
                            [](RunConfig& c) -> auto& { return c.split.val; }));
  k.push_back(field<double>("split.test", "test fraction",
                            [](RunConfig& c) -> auto& { return c.split.test; }));
  // consolidation
  k.push_back(field<double>("consolidate.st_min_heart_rate", "ST rejected below, bpm",
                            [](RunConfig& c) -> auto& { return c.consolidate.st_min_heart_rate; }));
  k.push_back(field<double>("consolidate.sb_max_heart_rate", "SB rejected above, bpm",
                            [](RunConfig& c) -> auto& { return c.consolidate.sb_max_heart_rate; }));
  k.push_back(field<double>("consolidate.bbb_min_qrs", "RBBB/LBBB rejected below, ms",
                            [](RunConfig& c) -> auto& { return c.consolidate.bbb_min_qrs; }));
  k.push_back(field<double>("consolidate.avb_min_pr", "1dAVb rejected below, ms",
                            [](RunConfig& c) -> auto& { return c.consolidate.avb_min_pr; }));
  k.push_back(field<double>("consolidate.af_nn_sd", "medical AF accepted above this NN spread",
                            [](RunConfig& c) -> auto& { return c.consolidate.af_nn_sd; }));
  k.push_back(field<bool>("consolidate.measurements_veto_agreement",
                          "measurement checks run before expert/classifier agreement",
                          [](RunConfig& c) -> auto& { return c.consolidate.measurements_veto_agreement; }));
  // synthetic corpus
  k.push_back(field<std::size_t>("synth.n", "records",
                                 [](RunConfig& c) -> auto& { return c.synth.n; }));
  for (std::size_t i = 0; i < kNumClasses; ++i)
    k.push_back(field<double>("synth.prevalence." + std::string(kClassNames[i]),
                              "fraction of records carrying the class",
                              [i](RunConfig& c) -> auto& { return c.synth.prevalence[i]; }));
  k.push_back(field<double>("synth.noise_std", "additive noise, mV",
                            [](RunConfig& c) -> auto& { return c.synth.noise_std; }));
  k.push_back({"synth.sampling_rates", "comma-separated rates, Hz, assigned round robin",
               [](RunConfig& c, const std::string& v) {
                 std::vector<int> rates;
                 std::size_t start = 0;
                 while (start <= v.size()) {
                   const auto end = std::min(v.find(',', start), v.size());
                   rates.push_back(parse_number<int>("synth.sampling_rates", trim(v.substr(start, end - start))));
                   start = end + 1;
                 }
                 c.synth.sampling_rates = rates;
               },
               [](const RunConfig& c) {
                 std::string s;
                 for (int r : c.synth.sampling_rates) s += (s.empty() ? "" : ",") + std::to_string(r);
                 return s;
               }});
  k.push_back(field<double>("synth.min_duration", "shortest record, s",
                            [](RunConfig& c) -> auto& { return c.synth.min_duration; }));
  k.push_back(field<double>("synth.max_duration", "longest record, s",
                            [](RunConfig& c) -> auto& { return c.synth.max_duration; }));
  k.push_back(field<std::size_t>("synth.exams_per_patient", "consecutive records sharing a patient id",
                                 [](RunConfig& c) -> auto& { return c.synth.exams_per_patient; }));
  k.push_back({"synth.heart_rate_range", "lo,hi bpm for sinus-rhythm slices, or none",
               [](RunConfig& c, const std::string& v) {
                 if (v.empty() || v == "none") {
                   c.synth.heart_rate_range.reset();
                   return;
                 }
                 const auto comma = v.find(',');
                 if (comma == std::string::npos) bad_value("synth.heart_rate_range", v, "lo,hi");
                 c.synth.heart_rate_range = std::pair{
                     parse_number<double>("synth.heart_rate_range", trim(v.substr(0, comma))),
                     parse_number<double>("synth.heart_rate_range", trim(v.substr(comma + 1)))};
               },
               [](const RunConfig& c) {
                 if (!c.synth.heart_rate_range) return std::string("none");
                 return format(c.synth.heart_rate_range->first) + "," +
                        format(c.synth.heart_rate_range->second);
               }});
  k.push_back({"synth.id_prefix", "exam and patient id prefix",
               [](RunConfig& c, const std::string& v) { c.synth.id_prefix = v; },
               [](const RunConfig& c) { return c.synth.id_prefix; }});
  // evaluation and text labelling
  k.push_back(field<std::size_t>("eval.bootstrap_resamples", "bootstrap resamples, 0 to skip",
                                 [](RunConfig& c) -> auto& { return c.eval.bootstrap_resamples; }));
  k.push_back(field<double>("eval.hr_band", "bpm around the consensus line counted as borderline",
                            [](RunConfig& c) -> auto& { return c.eval.hr_band; }));
  k.push_back(optional_field<double>("textlabel.threshold", "score threshold, none keeps the rule base value",
                                     [](RunConfig& c) -> auto& { return c.text.threshold; }));
  k.push_back(optional_field<std::size_t>("textlabel.negation_window",
                                          "tokens after a negation marker, none keeps the rule base value",
                                          [](RunConfig& c) -> auto& { return c.text.negation_window; }));
  k.push_back(field<std::size_t>("predict.batch_size", "records per inference batch",
                                 [](RunConfig& c) -> auto& { return c.predict_batch_size; }));
  return k;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void apply_setting(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw InputError("expected key=value, got '" + assignment + "'");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  for (const auto& k : config_keys())
    if (k.key == key) {
      try {
        k.set(config, value);
      } catch (const std::invalid_argument& e) {
        throw InputError("config key '" + key + "': " + e.what());
      }
      return;
    }
  throw InputError("unknown config key '" + key + "'");
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      apply_setting(config, t);
    } catch (const InputError& e) {
      throw InputError(path.string() + ": line " + std::to_string(n) + ": " + e.what());
    }
  }
}

std::map<std::string, std::string> effective_config(const RunConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& k : config_keys()) out[k.key] = k.get(config);
  return out;
}

}  // namespace ecgdnn::cli
