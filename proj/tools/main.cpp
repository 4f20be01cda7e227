// ecgdnn command-line tool. Exit codes: 0 success, 2 usage or input error,
// 3 internal invariant violation.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ecgdnn/consolidate.hpp"
#include "ecgdnn/csv.hpp"
#include "ecgdnn/evalstats.hpp"
#include "ecgdnn/model.hpp"
#include "ecgdnn/rng.hpp"
#include "ecgdnn/synth.hpp"
#include "ecgdnn/textlabel.hpp"
#include "ecgdnn/train.hpp"
#include "manifest.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace ecgdnn;
using namespace ecgdnn::cli;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitInternal = 3;

struct Globals {
  std::uint64_t seed = 0;
  std::optional<fs::path> config_file;
  std::vector<std::string> settings;
  fs::path out = "ecgdnn_out";
};

struct Context {
  const Globals& globals;
  RunConfig config;
  RunManifest manifest;

  fs::path output(const std::string& name) {
    const auto p = globals.out / name;
    manifest.outputs.push_back(p);
    return p;
  }
  std::ofstream open(const std::string& name) {
    const auto p = output(name);
    std::ofstream os(p, std::ios::binary);
    if (!os) throw InputError("cannot write " + p.string());
    return os;
  }
  void input(const std::string& role, const fs::path& p) {
    if (!fs::exists(p)) throw InputError(role + " not found: " + p.string());
    manifest.inputs[role] = p;
  }
};

std::map<std::string, std::size_t> index_ids(const std::vector<std::string>& ids, const std::string& what) {
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (!out.emplace(ids[i], i).second) throw InputError("duplicate exam_id '" + ids[i] + "' in " + what);
  return out;
}

std::vector<std::string> read_split_ids(const fs::path& path, const std::string& split) {
  const auto table = csv::read(path);
  const auto id = table.column("exam_id"), part = table.column("split");
  std::vector<std::string> ids;
  for (const auto& row : table.rows)
    if (row.fields[part] == split) ids.push_back(row.fields[id]);
  return ids;
}

// ---- synth -------------------------------------------------------------------------

struct SynthArgs {
  std::optional<std::size_t> n;
  std::vector<std::string> prevalence;
};

void cmd_synth(Context& ctx, const SynthArgs& args) {
  auto& spec = ctx.config.synth;
  if (args.n) spec.n = *args.n;
  for (const auto& p : args.prevalence) apply_setting(ctx.config, "synth.prevalence." + p);
  spec.seed = derive_seed(ctx.globals.seed, "synth");
  spec.validate();
  const auto corpus = generate_corpus(spec);
  write_corpus(ctx.globals.out, corpus, spec.seed);
  for (const char* f : {"manifest.json", "tracings.bin", "labels.csv", "measurements.csv", "reports.csv"})
    ctx.output(f);
  std::cerr << "wrote " << corpus.size() << " records to " << ctx.globals.out << '\n';
}

// ---- train ---------------------------------------------------------------------------

struct TrainArgs {
  fs::path dataset;
  std::optional<fs::path> labels;
};

struct Labelled {
  std::vector<EcgRecord> records;
  std::vector<LabelVector> labels;
};

Labelled read_labelled(Context& ctx, const fs::path& dataset, const std::optional<fs::path>& label_path) {
  const fs::path lp = label_path ? *label_path : dataset / "labels.csv";
  ctx.input("dataset", dataset);
  ctx.input("labels", lp);
  Labelled out;
  out.records = read_dataset(dataset);
  const auto file = csv::read_labels(lp);
  const auto index = index_ids(file.exam_ids, lp.string());
  for (const auto& r : out.records) {
    const auto it = index.find(r.exam_id);
    if (it == index.end()) throw InputError("no labels for exam '" + r.exam_id + "' in " + lp.string());
    out.labels.push_back(file.labels[it->second]);
  }
  return out;
}

LabeledSet make_set(const Labelled& data, const std::vector<std::size_t>& idx) {
  LabeledSet s;
  for (auto i : idx) {
    s.inputs.push_back(preprocess(data.records[i]));
    s.labels.push_back(data.labels[i]);
    s.exam_ids.push_back(data.records[i].exam_id);
  }
  return s;
}

std::vector<ScoreRow> widen(const std::vector<std::array<float, kNumClasses>>& p) {
  std::vector<ScoreRow> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t c = 0; c < kNumClasses; ++c) out[i][c] = p[i][c];
  return out;
}

void cmd_train(Context& ctx, const TrainArgs& args) {
  auto& cfg = ctx.config;
  cfg.arch.validate();
  cfg.train.rng_seed = derive_seed(ctx.globals.seed, "train");
  cfg.train.validate();
  const auto data = read_labelled(ctx, args.dataset, args.labels);

  std::vector<std::vector<std::size_t>> parts;
  if (cfg.train.allow_overlap) {
    std::vector<std::size_t> all(data.records.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    parts = {all, all, {}};
  } else {
    std::vector<SplitKey> keys;
    for (const auto& r : data.records) keys.push_back({r.exam_id, r.patient_id});
    const std::array<double, 3> fractions{cfg.split.train, cfg.split.val, cfg.split.test};
    parts = split_dataset(keys, cfg.split.mode, fractions, derive_seed(ctx.globals.seed, "split"));
  }
  {
    auto os = ctx.open("splits.csv");
    os << "exam_id,split\n";
    const char* names[] = {"train", "val", "test"};
    std::vector<std::string> which(data.records.size());
    for (std::size_t k = 0; k < 3; ++k)
      for (auto i : parts[k]) which[i] = which[i].empty() ? names[k] : which[i] + "+" + names[k];
    for (std::size_t i = 0; i < which.size(); ++i)
      csv::write_row(os, {data.records[i].exam_id, which[i].empty() ? "unused" : which[i]});
  }
  const auto train = make_set(data, parts[0]);
  const auto val = make_set(data, parts[1]);
  std::cerr << "train " << train.size() << ", val " << val.size() << ", test " << parts[2].size() << '\n';

  auto model = Model::build(cfg.arch, derive_seed(ctx.globals.seed, "init"));
  auto result = fit(std::move(model), train, val, cfg.train, [](const EpochReport& r) {
    std::cerr << "epoch " << r.record.epoch << " train_loss " << r.record.train_loss << " val_loss "
              << r.record.val_loss << " lr " << r.record.lr << " (" << r.record.seconds << " s)\n";
    return false;
  });

  auto& ck = result.checkpoint;
  std::vector<std::array<float, kNumClasses>> val_probs;
  evaluate_loss(ck.model, val, cfg.predict_batch_size, &val_probs);
  ck.thresholds = select_thresholds(pr_curves(widen(val_probs), val.labels));
  save_checkpoint(ck, ctx.output("model.ckpt"));
  auto log = ctx.open("train_log.csv");
  result.log.write_csv(log);
  std::cerr << "best epoch " << result.log.best_epoch << ", val_loss " << ck.training.val_loss << '\n';
}

// ---- predict ------------------------------------------------------------------------------

struct PredictArgs {
  fs::path checkpoint;
  fs::path dataset;
};

void cmd_predict(Context& ctx, const PredictArgs& args) {
  ctx.input("checkpoint", args.checkpoint);
  ctx.input("dataset", args.dataset);
  const auto ck = load_checkpoint(args.checkpoint);
  const auto records = read_dataset(args.dataset);
  std::vector<NetworkInput> inputs;
  csv::ScoreFile scores;
  for (const auto& r : records) {
    inputs.push_back(preprocess(r));
    scores.exam_ids.push_back(r.exam_id);
  }
  scores.scores = widen(predict_all(ck.model, inputs, ctx.config.predict_batch_size));
  auto os = ctx.open("scores.csv");
  csv::write_scores(os, scores);
}

// ---- evaluate --------------------------------------------------------------------------

struct EvaluateArgs {
  fs::path scores;
  fs::path truth;
  std::optional<fs::path> checkpoint;
  std::optional<fs::path> splits;
  std::string split = "test";
  std::optional<fs::path> measurements;
};

void cmd_evaluate(Context& ctx, const EvaluateArgs& args) {
  ctx.input("scores", args.scores);
  ctx.input("truth", args.truth);
  auto scores = csv::read_scores(args.scores);
  const auto truth_file = csv::read_labels(args.truth);
  const auto truth_index = index_ids(truth_file.exam_ids, args.truth.string());
  index_ids(scores.exam_ids, args.scores.string());

  std::optional<std::set<std::string>> keep;
  if (args.splits) {
    ctx.input("splits", *args.splits);
    const auto ids = read_split_ids(*args.splits, args.split);
    keep = std::set<std::string>(ids.begin(), ids.end());
  }
  std::vector<std::string> ids;
  std::vector<ScoreRow> probs;
  std::vector<LabelVector> truth;
  for (std::size_t i = 0; i < scores.exam_ids.size(); ++i) {
    const auto& id = scores.exam_ids[i];
    if (keep && !keep->contains(id)) continue;
    const auto it = truth_index.find(id);
    if (it == truth_index.end()) throw InputError("no truth labels for exam '" + id + "'");
    ids.push_back(id);
    probs.push_back(scores.scores[i]);
    truth.push_back(truth_file.labels[it->second]);
  }

  std::optional<std::array<double, kNumClasses>> thresholds;
  if (args.checkpoint) {
    ctx.input("checkpoint", *args.checkpoint);
    thresholds = load_checkpoint(*args.checkpoint).thresholds;
  }
  auto report = evaluate(probs, truth, thresholds);
  std::array<double, kNumClasses> used{};
  for (std::size_t c = 0; c < kNumClasses; ++c) used[c] = report.classes[c].threshold;
  const auto predicted = apply_thresholds(probs, used);
  if (ctx.config.eval.bootstrap_resamples > 0) {
    report.bootstrap = bootstrap(predicted, truth, ctx.config.eval.bootstrap_resamples,
                                 derive_seed(ctx.globals.seed, "bootstrap"));
    auto os = ctx.open("bootstrap.csv");
    write_bootstrap_csv(os, *report.bootstrap);
  }
  {
    auto os = ctx.open("report.json");
    write_report_json(os, report);
  }
  {
    auto os = ctx.open("metrics.csv");
    write_scores_csv(os, report);
  }
  {
    auto os = ctx.open("confusion.csv");
    write_confusion_csv(os, report);
  }
  {
    auto os = ctx.open("pr_curves.csv");
    write_pr_curves_csv(os, report);
  }
  if (args.measurements) {
    ctx.input("measurements", *args.measurements);
    const auto table = csv::read(*args.measurements);
    const auto idc = table.column("exam_id"), hrc = table.column("heart_rate");
    std::map<std::string, double> hr;
    for (const auto& row : table.rows)
      if (auto v = csv::parse_optional_double(row, hrc, args.measurements->string()))
        hr[row.fields[idc]] = *v;
    std::vector<std::string> hr_ids;
    std::vector<LabelVector> hr_pred, hr_truth;
    std::vector<double> rates;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (auto it = hr.find(ids[i]); it != hr.end()) {
        hr_ids.push_back(ids[i]);
        hr_pred.push_back(predicted[i]);
        hr_truth.push_back(truth[i]);
        rates.push_back(it->second);
      }
    for (auto cls : {Abnormality::SB, Abnormality::ST}) {
      const auto r = hr_vs_prediction_report(hr_ids, hr_pred, hr_truth, rates, cls);
      auto os = ctx.open(std::string(class_name(cls)) + "_heart_rate.csv");
      r.write_csv(os);
      std::cerr << class_name(cls) << ": share of errors within " << ctx.config.eval.hr_band
                << " bpm of " << r.consensus_bpm << ": " << r.error_fraction_near_line(ctx.config.eval.hr_band)
                << '\n';
    }
  }
  for (std::size_t c = 0; c < kNumClasses; ++c)
    std::cerr << kClassNames[c] << " F1 " << report.classes[c].scores.f1 << '\n';
  std::cerr << "micro AP " << report.micro_ap << '\n';
}

// ---- consolidate -----------------------------------------------------------------------

void cmd_consolidate(Context& ctx, const AnnotationFiles& files) {
  if (!files.medical && !files.unig && !files.minnesota)
    throw InputError("consolidate needs at least one of --medical, --unig, --minnesota");
  if (files.medical) ctx.input("medical", *files.medical);
  if (files.unig) ctx.input("unig", *files.unig);
  if (files.minnesota) ctx.input("minnesota", *files.minnesota);
  if (files.measurements) ctx.input("measurements", *files.measurements);
  ctx.config.consolidate.validate();
  const auto set = read_annotation_inputs(files);
  const auto batch = batch_consolidate(set.exam_ids, set.inputs, ctx.config.consolidate);
  {
    auto os = ctx.open("outcomes.csv");
    batch.write_outcomes_csv(os);
  }
  {
    auto os = ctx.open("review_queue.csv");
    batch.write_review_queue_csv(os);
  }
  {
    auto os = ctx.open("consolidated_labels.csv");
    batch.write_labels_csv(os);
  }
  auto os = ctx.open("rule_counters.csv");
  batch.write_counters_csv(os);
}

// ---- textlabel ---------------------------------------------------------------------------

struct TextArgs {
  fs::path reports;
  fs::path rulebase;
  std::optional<fs::path> stopwords;
};

void cmd_textlabel(Context& ctx, const TextArgs& args) {
  ctx.input("reports", args.reports);
  ctx.input("rulebase", args.rulebase);
  TextLabeler labeler;
  labeler.rulebase = load_rulebase(args.rulebase);
  if (ctx.config.text.threshold) labeler.rulebase.threshold = *ctx.config.text.threshold;
  if (ctx.config.text.negation_window) labeler.rulebase.negation_window = *ctx.config.text.negation_window;
  labeler.rulebase.validate();
  if (args.stopwords) {
    ctx.input("stopwords", *args.stopwords);
    labeler.stopwords = load_stopwords(*args.stopwords);
  }
  const auto table = csv::read(args.reports);
  csv::LabelFile labels;
  csv::ScoreFile scores;
  if (!table.header.empty()) {
    const auto id = table.column("exam_id");
    const auto text = table.find_column("report") ? table.column("report") : table.column("text");
    for (const auto& row : table.rows) {
      labels.exam_ids.push_back(row.fields[id]);
      labels.labels.push_back(labeler.label(row.fields[text]));
      scores.exam_ids.push_back(row.fields[id]);
      scores.scores.push_back(labeler.scores(row.fields[text]));
    }
  }
  {
    auto os = ctx.open("text_labels.csv");
    csv::write_labels(os, labels);
  }
  auto os = ctx.open("text_scores.csv");
  csv::write_scores(os, scores);
}

// ---- compare -----------------------------------------------------------------------------

struct CompareArgs {
  std::vector<std::string> raters;  // name=path
  std::optional<fs::path> truth;
};

void cmd_compare(Context& ctx, const CompareArgs& args) {
  if (args.raters.size() < 2) throw InputError("compare needs at least two --rater name=path");
  std::vector<std::string> names;
  std::vector<csv::LabelFile> files;
  for (const auto& r : args.raters) {
    const auto eq = r.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("expected --rater name=path, got '" + r + "'");
    names.push_back(r.substr(0, eq));
    const fs::path p = r.substr(eq + 1);
    ctx.input("rater:" + names.back(), p);
    files.push_back(csv::read_labels(p));
  }
  // Align every rater to the first one's exam order.
  const auto& ids = files[0].exam_ids;
  index_ids(ids, names[0]);
  auto align = [&](const csv::LabelFile& f, const std::string& who) {
    const auto index = index_ids(f.exam_ids, who);
    if (index.size() != ids.size()) throw InputError(who + " and " + names[0] + " cover different exams");
    std::vector<LabelVector> out;
    for (const auto& id : ids) {
      const auto it = index.find(id);
      if (it == index.end()) throw InputError("exam '" + id + "' missing from " + who);
      out.push_back(f.labels[it->second]);
    }
    return out;
  };
  std::vector<std::vector<LabelVector>> labels;
  for (std::size_t r = 0; r < files.size(); ++r) labels.push_back(align(files[r], names[r]));

  {
    auto os = ctx.open("kappa.csv");
    os << "rater_a,rater_b,class,kappa\n";
    os.precision(12);
    for (std::size_t a = 0; a < names.size(); ++a)
      for (std::size_t b = 0; b < names.size(); ++b) {
        const auto k = kappa(labels[a], labels[b]);
        for (std::size_t c = 0; c < kNumClasses; ++c)
          os << csv::quote(names[a]) << ',' << csv::quote(names[b]) << ',' << kClassNames[c] << ','
             << k[c] << '\n';
      }
  }
  if (!args.truth) return;
  ctx.input("truth", *args.truth);
  const auto truth = align(csv::read_labels(*args.truth), args.truth->string());
  auto os = ctx.open("mcnemar.csv");
  os << "rater_a,rater_b,class,b,c,statistic,exact,p_value\n";
  os.precision(12);
  for (std::size_t a = 0; a < names.size(); ++a)
    for (std::size_t b = a + 1; b < names.size(); ++b)
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        Flags ea, eb;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          ea.push_back(labels[a][i][c] != truth[i][c]);
          eb.push_back(labels[b][i][c] != truth[i][c]);
        }
        const auto m = mcnemar(ea, eb);
        os << csv::quote(names[a]) << ',' << csv::quote(names[b]) << ',' << kClassNames[c] << ','
           << m.b << ',' << m.c << ',' << m.statistic << ',' << (m.exact ? 1 : 0) << ',' << m.p_value
           << '\n';
      }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECG abnormality classification toolkit"};
  app.fallthrough();
  app.require_subcommand(0, 1);
  Globals g;
  bool list_config = false;
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--config", g.config_file, "File of key=value settings");
  app.add_option("--set", g.settings, "One key=value setting; overrides the config file");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--list-config", list_config, "Print every config key with its default");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a labelled synthetic dataset");
  s->add_option("--n", synth.n, "Number of records");
  s->add_option("--prevalence", synth.prevalence, "CLASS=fraction, repeatable");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model and write its checkpoint");
  t->add_option("--dataset", train.dataset, "Dataset directory")->required();
  t->add_option("--labels", train.labels, "Label CSV (default: dataset/labels.csv)");

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "Score every record of a dataset");
  p->add_option("--checkpoint", predict.checkpoint, "Checkpoint from train")->required();
  p->add_option("--dataset", predict.dataset, "Dataset directory")->required();

  EvaluateArgs eval;
  auto* e = app.add_subcommand("evaluate", "Score predictions against labels");
  e->add_option("--scores", eval.scores, "scores.csv from predict")->required();
  e->add_option("--truth", eval.truth, "Reference label CSV")->required();
  e->add_option("--checkpoint", eval.checkpoint, "Use its thresholds instead of max-F1 on this data");
  e->add_option("--splits", eval.splits, "splits.csv from train; restricts to --split");
  e->add_option("--split", eval.split, "Split name to keep (default test)");
  e->add_option("--measurements", eval.measurements, "Heart rates for the SB/ST borderline reports");
  e->add_option("--bootstrap", [&](const std::vector<std::string>& v) {
    g.settings.push_back("eval.bootstrap_resamples=" + v.at(0));
    return true;
  }, "Bootstrap resamples")->type_name("UINT");

  AnnotationFiles annotations;
  auto* c = app.add_subcommand("consolidate", "Merge expert, classifier and measurement labels");
  c->add_option("--medical", annotations.medical, "Expert label CSV");
  c->add_option("--unig", annotations.unig, "First automatic classifier label CSV");
  c->add_option("--minnesota", annotations.minnesota, "Minnesota code label CSV");
  c->add_option("--measurements", annotations.measurements, "heart_rate, pr_interval, qrs_duration, nn_sd per exam");

  TextArgs text;
  auto* x = app.add_subcommand("textlabel", "Label free-text reports with a rule base");
  x->add_option("--reports", text.reports, "CSV with exam_id and report columns")->required();
  x->add_option("--rulebase", text.rulebase, "JSON rule base")->required();
  x->add_option("--stopwords", text.stopwords, "Stop words, one per line");

  CompareArgs compare;
  auto* m = app.add_subcommand("compare", "Kappa and McNemar between raters");
  m->add_option("--rater", compare.raters, "name=labels.csv, repeatable")->required();
  m->add_option("--truth", compare.truth, "Reference labels for McNemar");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitInput;
  }

  try {
    Context ctx{g, {}, {}};
    if (g.config_file) {
      ctx.input("config", *g.config_file);
      apply_config_file(ctx.config, *g.config_file);
    }
    for (const auto& setting : g.settings) apply_setting(ctx.config, setting);
    if (list_config) {
      for (const auto& k : config_keys())
        std::cout << k.key << '=' << k.get(ctx.config) << "  # " << k.help << '\n';
      return 0;
    }
    const auto subs = app.get_subcommands();
    if (subs.empty()) {
      std::cerr << app.help();
      return kExitInput;
    }
    const std::string command = subs[0]->get_name();
    fs::create_directories(g.out);
    ctx.manifest.command = command;
    ctx.manifest.argv.assign(argv, argv + argc);
    ctx.manifest.seed = g.seed;

    if (command == "synth") cmd_synth(ctx, synth);
    else if (command == "train") cmd_train(ctx, train);
    else if (command == "predict") cmd_predict(ctx, predict);
    else if (command == "evaluate") cmd_evaluate(ctx, eval);
    else if (command == "consolidate") cmd_consolidate(ctx, annotations);
    else if (command == "textlabel") cmd_textlabel(ctx, text);
    else if (command == "compare") cmd_compare(ctx, compare);

    ctx.manifest.config = effective_config(ctx.config);
    ctx.manifest.write(g.out);
    return 0;
  } catch (const InputError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitInput;
  } catch (const InvalidRecord& err) {
    std::cerr << "error: invalid record: " << err.what() << '\n';
    return kExitInput;
  } catch (const InvalidSplit& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitInput;
  } catch (const CorruptCheckpoint& err) {
    std::cerr << "error: corrupt checkpoint: " << err.what() << '\n';
    return kExitInput;
  } catch (const UnsupportedVersion& err) {
    std::cerr << "error: unsupported checkpoint version: " << err.what() << '\n';
    return kExitInput;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitInput;
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << '\n';
    return kExitInternal;
  }
}
