#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "ecgdnn/consolidate.hpp"
#include "ecgdnn/evalstats.hpp"
#include "ecgdnn/model.hpp"
#include "ecgdnn/synth.hpp"
#include "ecgdnn/textlabel.hpp"

namespace py = pybind11;
using namespace ecgdnn;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::vector<bool> to_list(const LabelVector& y) { return std::vector<bool>(y.values.begin(), y.values.end()); }

LabelVector from_list(const std::vector<bool>& v) {
  if (v.size() != kNumClasses) throw py::value_error("expected 6 label flags");
  LabelVector y;
  for (std::size_t c = 0; c < kNumClasses; ++c) y[c] = v[c];
  return y;
}

std::vector<LabelVector> from_lists(const std::vector<std::vector<bool>>& rows) {
  std::vector<LabelVector> out;
  for (const auto& r : rows) out.push_back(from_list(r));
  return out;
}

FloatArray record_samples(const EcgRecord& r) {
  FloatArray a({kNumLeads, r.length()});
  std::memcpy(a.mutable_data(), r.samples.data(), r.samples.size() * sizeof(float));
  return a;
}

EcgRecord make_record(const FloatArray& samples, int sampling_rate, std::string exam_id) {
  if (samples.ndim() != 2 || samples.shape(0) != static_cast<py::ssize_t>(kNumLeads))
    throw py::value_error("samples must have shape (12, n)");
  EcgRecord r;
  r.exam_id = std::move(exam_id);
  r.patient_id = r.exam_id;
  r.sampling_rate = sampling_rate;
  r.samples.assign(samples.data(), samples.data() + samples.size());
  return r;
}

FloatArray preprocess_array(const FloatArray& samples, int sampling_rate) {
  const auto in = preprocess(make_record(samples, sampling_rate, "input"));
  FloatArray a({kNumLeads, kWindowLength});
  std::memcpy(a.mutable_data(), in.data.data(), in.data.size() * sizeof(float));
  return a;
}

py::array_t<float> predict_batch(const Model& model, const FloatArray& batch) {
  if (batch.ndim() != 3) throw py::value_error("batch must have shape (n, 12, 4096)");
  Shape shape{static_cast<std::size_t>(batch.shape(0)), static_cast<std::size_t>(batch.shape(1)),
              static_cast<std::size_t>(batch.shape(2))};
  Tensor<float> x(shape, std::vector<float>(batch.data(), batch.data() + batch.size()));
  Tensor<float> p;
  {
    py::gil_scoped_release release;
    p = model.predict(x);
  }
  py::array_t<float> out({p.dim(0), p.dim(1)});
  std::memcpy(out.mutable_data(), p.data().data(), p.size() * sizeof(float));
  return out;
}

}  // namespace

PYBIND11_MODULE(_ecgdnn, m) {
  m.doc() = "ECG abnormality classification: network, synthetic data, metrics and label tools";

  m.attr("CLASS_NAMES") = std::vector<std::string>(kClassNames.begin(), kClassNames.end());
  m.attr("WINDOW_LENGTH") = kWindowLength;
  m.attr("NETWORK_RATE") = kNetworkRate;

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<InvalidRecord>(m, "InvalidRecord", PyExc_ValueError);
  py::register_exception<CorruptCheckpoint>(m, "CorruptCheckpoint", PyExc_ValueError);
  py::register_exception<UnsupportedVersion>(m, "UnsupportedVersion", PyExc_ValueError);

  // ---- signal and synthesis
  py::class_<SynthParams>(m, "SynthParams")
      .def(py::init<>())
      .def_readwrite("heart_rate", &SynthParams::heart_rate)
      .def_readwrite("pr_interval", &SynthParams::pr_interval)
      .def_readwrite("qrs_duration", &SynthParams::qrs_duration)
      .def_readwrite("rr_jitter", &SynthParams::rr_jitter)
      .def_readwrite("af_mode", &SynthParams::af_mode)
      .def_property(
          "left_bundle", [](const SynthParams& p) { return p.bundle_branch == BundleBranch::Left; },
          [](SynthParams& p, bool left) { p.bundle_branch = left ? BundleBranch::Left : BundleBranch::Right; })
      .def_readwrite("noise_std", &SynthParams::noise_std)
      .def_readwrite("sampling_rate", &SynthParams::sampling_rate)
      .def_readwrite("duration", &SynthParams::duration)
      .def_readwrite("rng_seed", &SynthParams::rng_seed);

  m.def(
      "synthesize",
      [](const SynthParams& p) {
        const auto s = generate(p);
        return py::make_tuple(record_samples(s.record), to_list(s.labels));
      },
      py::arg("params"), "Returns (samples[12, n], labels[6]).");
  m.def("synth_labels", [](const SynthParams& p) { return to_list(synth_labels(p)); });
  m.def(
      "measure",
      [](const FloatArray& samples, int sampling_rate) {
        const auto r = measure(make_record(samples, sampling_rate, "input"));
        return py::dict(py::arg("heart_rate") = r.heart_rate, py::arg("pr_interval") = r.pr_interval,
                        py::arg("qrs_duration") = r.qrs_duration, py::arg("nn_sd") = r.nn_sd);
      },
      py::arg("samples"), py::arg("sampling_rate"));
  m.def("preprocess", &preprocess_array, py::arg("samples"), py::arg("sampling_rate"),
        "Resample to 400 Hz and centre in the 12 x 4096 window.");
  m.def(
      "resample",
      [](const FloatArray& samples, int from_rate, int to_rate) {
        return record_samples(resample(make_record(samples, from_rate, "input"), to_rate));
      },
      py::arg("samples"), py::arg("from_rate"), py::arg("to_rate"));

  // ---- model
  py::class_<Model>(m, "Model")
      .def_static("build", [](std::uint64_t seed) { return Model::build({}, seed); }, py::arg("seed") = 0)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def("predict", &predict_batch, py::arg("batch"), "Probabilities, shape (n, 6).");

  py::class_<ModelCheckpoint>(m, "Checkpoint")
      .def_readonly("model", &ModelCheckpoint::model)
      .def_readwrite("thresholds", &ModelCheckpoint::thresholds)
      .def_property_readonly("epoch", [](const ModelCheckpoint& c) { return c.training.epoch; })
      .def_property_readonly("val_loss", [](const ModelCheckpoint& c) { return c.training.val_loss; });
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
  m.def(
      "save_checkpoint",
      [](const Model& model, const std::array<double, kNumClasses>& thresholds,
         const std::filesystem::path& path) {
        save_checkpoint(ModelCheckpoint{model, thresholds, {}}, path);
      },
      py::arg("model"), py::arg("thresholds"), py::arg("path"));

  // ---- metrics
  m.def(
      "scores",
      [](std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
        const auto s = scores({tp, fp, tn, fn});
        return py::dict(py::arg("precision") = s.precision, py::arg("recall") = s.recall,
                        py::arg("specificity") = s.specificity, py::arg("f1") = s.f1);
      },
      py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));
  m.def(
      "pr_curve",
      [](const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
        const auto c = pr_curve(s, y);
        std::vector<std::tuple<double, double, double>> pts;
        for (const auto& p : c.points) pts.emplace_back(p.threshold, p.precision, p.recall);
        return pts;
      },
      py::arg("scores"), py::arg("truth"), "List of (threshold, precision, recall).");
  m.def(
      "average_precision",
      [](const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
        return average_precision(pr_curve(s, y));
      },
      py::arg("scores"), py::arg("truth"));
  m.def(
      "select_threshold",
      [](const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
        return select_threshold(pr_curve(s, y));
      },
      py::arg("scores"), py::arg("truth"));
  m.def(
      "micro_ap",
      [](const std::vector<ScoreRow>& probs, const std::vector<std::vector<bool>>& truth) {
        return micro_ap(probs, from_lists(truth));
      },
      py::arg("probabilities"), py::arg("truth"));
  m.def(
      "kappa",
      [](const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) { return kappa(a, b); },
      py::arg("rater_a"), py::arg("rater_b"));
  m.def("kappa_from_table", &kappa_from_table, py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"));
  m.def(
      "mcnemar",
      [](std::uint64_t b, std::uint64_t c) {
        const auto r = mcnemar(b, c);
        return py::dict(py::arg("b") = r.b, py::arg("c") = r.c, py::arg("statistic") = r.statistic,
                        py::arg("exact") = r.exact, py::arg("p_value") = r.p_value);
      },
      py::arg("b"), py::arg("c"));
  m.def(
      "bootstrap_quantiles",
      [](const std::vector<std::vector<bool>>& predicted, const std::vector<std::vector<bool>>& truth,
         std::size_t n_resamples, std::uint64_t seed) {
        return bootstrap(from_lists(predicted), from_lists(truth), n_resamples, seed).quantiles;
      },
      py::arg("predicted"), py::arg("truth"), py::arg("n_resamples") = 1000, py::arg("seed") = 0,
      "quantiles[class][score][q] at 2.5, 25, 50, 75 and 97.5 percent.");

  // ---- consolidation
  m.def(
      "consolidate",
      [](const std::vector<bool>& medical, const std::vector<bool>& unig, const std::vector<bool>& minnesota,
         std::optional<double> heart_rate, std::optional<double> pr_interval,
         std::optional<double> qrs_duration, std::optional<double> nn_sd, bool measurements_veto_agreement) {
        AnnotationInputs in;
        in.medical = from_list(medical);
        in.unig = from_list(unig);
        in.minnesota = from_list(minnesota);
        in.measurements = {heart_rate, pr_interval, qrs_duration, nn_sd};
        ConsolidationConfig cfg;
        cfg.measurements_veto_agreement = measurements_veto_agreement;
        const auto out = consolidate(in, cfg);
        std::vector<std::tuple<std::string, std::string, std::string>> rows;
        for (const auto& c : out.classes)
          rows.emplace_back(to_string(c.decision), to_string(c.fired_rule), to_string(c.reason));
        return rows;
      },
      py::arg("medical"), py::arg("unig"), py::arg("minnesota"), py::arg("heart_rate") = py::none(),
      py::arg("pr_interval") = py::none(), py::arg("qrs_duration") = py::none(),
      py::arg("nn_sd") = py::none(), py::arg("measurements_veto_agreement") = true,
      "Per class (decision, fired_rule, reason).");

  // ---- text labels
  m.def("tokenize", &tokenize, py::arg("text"));
  py::class_<TextLabeler>(m, "TextLabeler")
      .def(py::init([](const std::filesystem::path& rulebase, std::optional<std::filesystem::path> stopwords) {
             TextLabeler t;
             t.rulebase = load_rulebase(rulebase);
             if (stopwords) t.stopwords = load_stopwords(*stopwords);
             return t;
           }),
           py::arg("rulebase"), py::arg("stopwords") = py::none())
      .def("label", [](const TextLabeler& t, std::string_view s) { return to_list(t.label(s)); })
      .def("scores", &TextLabeler::scores);
}
