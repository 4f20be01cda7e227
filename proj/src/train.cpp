#include "ecgdnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "ecgdnn/rng.hpp"

namespace ecgdnn {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("invalid train config: " + what);
  };
  if (!(lr0 > 0.0)) fail("lr0 must be positive");
  if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0)) fail("adam beta1 must be in (0, 1)");
  if (!(adam.beta2 > 0.0 && adam.beta2 < 1.0)) fail("adam beta2 must be in (0, 1)");
  if (!(adam.epsilon > 0.0)) fail("adam epsilon must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (max_epochs <= 0) fail("max_epochs must be positive");
  if (plateau_patience <= 0) fail("plateau_patience must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) fail("lr_decay_factor must be in (0, 1)");
}

template <typename T>
void adam_step(std::span<Tensor<T>* const> params, const std::vector<Tensor<T>>& grads,
               AdamState<T>& state, double lr, const AdamOptions& options) {
  if (grads.size() != params.size()) throw ShapeError("adam: gradient count mismatch");
  if (state.first_moment.empty()) {
    for (auto* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("adam: state count mismatch");
  ++state.step;
  const double b1 = options.beta1, b2 = options.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    const Tensor<T>& g = grads[i];
    Tensor<T>& m = state.first_moment[i];
    Tensor<T>& v = state.second_moment[i];
    if (g.shape() != p.shape() || m.shape() != p.shape())
      throw ShapeError("adam: shape mismatch for parameter " + std::to_string(i));
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double m_hat = mj / c1;
      const double v_hat = vj / c2;
      p[j] = static_cast<T>(p[j] - lr * m_hat / (std::sqrt(v_hat) + options.epsilon));
    }
  }
}

template void adam_step(std::span<Tensor<float>* const>, const std::vector<Tensor<float>>&,
                        AdamState<float>&, double, const AdamOptions&);
template void adam_step(std::span<Tensor<double>* const>, const std::vector<Tensor<double>>&,
                        AdamState<double>&, double, const AdamOptions&);

bool TrainLog::same_trajectory(const TrainLog& other) const {
  if (best_epoch != other.best_epoch || epochs.size() != other.epochs.size()) return false;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& a = epochs[i];
    const auto& b = other.epochs[i];
    if (a.epoch != b.epoch || a.train_loss != b.train_loss || a.val_loss != b.val_loss ||
        a.lr != b.lr)
      return false;
  }
  return true;
}

void TrainLog::write_csv(std::ostream& os) const {
  os << "epoch,train_loss,val_loss,lr,seconds\n";
  const auto precision = os.precision(17);
  for (const auto& e : epochs)
    os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.lr << ',' << e.seconds
       << '\n';
  os.precision(precision);
}

PlateauScheduler::PlateauScheduler(double lr, int patience, double factor)
    : lr_(lr), patience_(patience), factor_(factor) {}

double PlateauScheduler::observe(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ >= patience_) {
    lr_ *= factor_;
    bad_epochs_ = 0;
  }
  return lr_;
}

double lr_schedule(const TrainLog& log, double current_lr, int patience, double factor) {
  double best = std::numeric_limits<double>::infinity();
  int bad = 0;
  bool fired_last = false;
  for (const auto& e : log.epochs) {
    fired_last = false;
    if (e.val_loss < best) {
      best = e.val_loss;
      bad = 0;
    } else if (++bad >= patience) {
      bad = 0;
      fired_last = true;
    }
  }
  return fired_last ? current_lr * factor : current_lr;
}

SplitMode parse_split_mode(const std::string& name) {
  if (name == "random") return SplitMode::Random;
  if (name == "by_patient") return SplitMode::ByPatient;
  if (name == "chronological") return SplitMode::Chronological;
  throw InvalidSplit("unknown split mode: " + name);
}

namespace {

std::vector<std::size_t> target_counts(std::size_t n, std::span<const double> fractions) {
  std::vector<std::size_t> counts;
  double cumulative = 0.0;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    cumulative += fractions[i];
    const auto upto = i + 1 == fractions.size()
                          ? n
                          : static_cast<std::size_t>(std::llround(cumulative * static_cast<double>(n)));
    counts.push_back(upto - std::min(upto, assigned));
    assigned = std::max(assigned, upto);
  }
  return counts;
}

}  // namespace

std::vector<std::vector<std::size_t>> split_dataset(std::span<const SplitKey> keys, SplitMode mode,
                                                    std::span<const double> fractions,
                                                    std::uint64_t seed) {
  if (fractions.empty()) throw InvalidSplit("no split fractions given");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw InvalidSplit("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidSplit("split fractions must sum to 1");

  const std::size_t n = keys.size();
  std::vector<std::vector<std::size_t>> splits(fractions.size());
  const auto counts = target_counts(n, fractions);

  if (mode == SplitMode::ByPatient) {
    std::map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::string> order;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, inserted] = groups.try_emplace(keys[i].patient_id);
      if (inserted) order.push_back(keys[i].patient_id);
      it->second.push_back(i);
    }
    Rng rng(derive_seed(seed, "split.by_patient"));
    std::shuffle(order.begin(), order.end(), rng);
    // Fill splits in order; a patient goes to the first split still short of its target.
    std::size_t current = 0;
    for (const auto& pid : order) {
      while (current + 1 < splits.size() && splits[current].size() >= counts[current]) ++current;
      auto& members = groups[pid];
      splits[current].insert(splits[current].end(), members.begin(), members.end());
    }
    for (auto& s : splits) std::sort(s.begin(), s.end());
    return splits;
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (mode == SplitMode::Random) {
    Rng rng(derive_seed(seed, "split.random"));
    std::shuffle(idx.begin(), idx.end(), rng);
  }
  std::size_t pos = 0;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    splits[s].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                     idx.begin() + static_cast<std::ptrdiff_t>(pos + counts[s]));
    pos += counts[s];
  }
  return splits;
}

Tensor<float> make_targets(std::span<const LabelVector> labels) {
  Tensor<float> t(Shape{labels.size(), kNumClasses});
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t c = 0; c < kNumClasses; ++c) t[i * kNumClasses + c] = labels[i][c] ? 1.f : 0.f;
  return t;
}

double evaluate_loss(const Model& model, const LabeledSet& set, std::size_t batch_size,
                     std::vector<std::array<float, kNumClasses>>* probabilities) {
  if (set.size() == 0) throw InvalidSplit("cannot evaluate an empty set");
  if (probabilities) probabilities->clear();
  double total = 0.0;
  for (std::size_t begin = 0; begin < set.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, set.size() - begin);
    const auto batch = make_batch(std::span(set.inputs).subspan(begin, count));
    const auto logits = model.logits(batch);
    const auto targets = make_targets(std::span(set.labels).subspan(begin, count));
    total += bce_loss(logits, targets).loss * static_cast<double>(count);
    if (probabilities) {
      for (std::size_t i = 0; i < count; ++i) {
        std::array<float, kNumClasses> row{};
        for (std::size_t c = 0; c < kNumClasses; ++c) row[c] = sigmoid(logits[i * kNumClasses + c]);
        probabilities->push_back(row);
      }
    }
  }
  return total / static_cast<double>(set.size());
}

FitResult fit(Model model, const LabeledSet& train, const LabeledSet& val,
              const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train.size() == 0 || val.size() == 0) throw InvalidSplit("train and validation sets must be non-empty");
  if (train.labels.size() != train.size() || val.labels.size() != val.size())
    throw InvalidSplit("every record needs a label vector");
  if (!config.allow_overlap) {
    std::set<std::string> ids(train.exam_ids.begin(), train.exam_ids.end());
    for (const auto& id : val.exam_ids)
      if (ids.count(id)) throw InvalidSplit("exam " + id + " appears in both train and validation");
  }

  Rng shuffle_rng(derive_seed(config.rng_seed, "shuffle"));
  Rng dropout_rng(derive_seed(config.rng_seed, "dropout"));
  PlateauScheduler scheduler(config.lr0, config.plateau_patience, config.lr_decay_factor);
  AdamState<float> adam;

  FitResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::array<float, kNumClasses>> val_probs;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = scheduler.lr();
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double train_total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - begin);
      std::vector<const NetworkInput*> inputs;
      std::vector<LabelVector> labels;
      for (std::size_t i = begin; i < begin + count; ++i) {
        inputs.push_back(&train.inputs[order[i]]);
        labels.push_back(train.labels[order[i]]);
      }
      Tape<float> tape;
      const auto logits =
          model.logits(make_batch(std::span<const NetworkInput* const>(inputs)), Mode::Train,
                       &dropout_rng, &tape);
      auto loss = bce_loss(logits, make_targets(labels));
      train_total += loss.loss * static_cast<double>(count);
      const auto grads = model.backward(tape, loss.grad);
      std::vector<Tensor<float>*> params;
      for (auto& p : model.parameters()) params.push_back(p.tensor);
      adam_step(std::span<Tensor<float>* const>(params), grads, adam, lr, config.adam);
    }

    const double val_loss = evaluate_loss(model, val, config.batch_size, &val_probs);
    EpochRecord rec{epoch, train_total / static_cast<double>(train.size()), val_loss, lr,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()};
    result.log.epochs.push_back(rec);
    if (val_loss < best_val) {
      best_val = val_loss;
      result.log.best_epoch = epoch;
      result.checkpoint.model = model;
      result.checkpoint.training = {epoch, val_loss, config.rng_seed};
    }
    scheduler.observe(val_loss);
    if (on_epoch && on_epoch(EpochReport{result.log.epochs.back(), val_probs, model})) break;
  }
  return result;
}

}  // namespace ecgdnn
