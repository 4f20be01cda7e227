#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgdnn/labels.hpp"
#include "ecgdnn/model.hpp"

namespace ecgdnn {

class InvalidSplit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double lr0 = 0.001;
  AdamOptions adam;
  std::size_t batch_size = 32;
  int max_epochs = 50;
  int plateau_patience = 7;
  double lr_decay_factor = 0.1;
  std::uint64_t rng_seed = 0;
  /// The overfit recipe trains and validates on the same records.
  bool allow_overlap = false;

  void validate() const;
};

// ---- optimizer ------------------------------------------------------------

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update. Moments are created on first use.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, const std::vector<Tensor<T>>& grads,
               AdamState<T>& state, double lr, const AdamOptions& options = {});

// ---- learning-rate schedule --------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;

  /// Equality on everything except wall time.
  bool same_trajectory(const TrainLog& other) const;
  void write_csv(std::ostream& os) const;
};

/// Reduce-on-plateau rule: `patience` consecutive epochs without a strict
/// decrease of the best validation loss multiply lr by `factor` and reset the
/// counter.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, int patience, double factor);

  /// Feeds one completed epoch; returns the lr for the next epoch.
  double observe(double val_loss);
  double lr() const { return lr_; }
  int epochs_without_improvement() const { return bad_epochs_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

/// Learning rate for the epoch after `log`, replaying its validation losses.
double lr_schedule(const TrainLog& log, double current_lr, int patience = 7,
                   double factor = 0.1);

// ---- data -------------------------------------------------------------------

struct LabeledSet {
  std::vector<NetworkInput> inputs;
  std::vector<LabelVector> labels;
  std::vector<std::string> exam_ids;

  std::size_t size() const { return inputs.size(); }
};

enum class SplitMode { Random, ByPatient, Chronological };

SplitMode parse_split_mode(const std::string& name);

struct SplitKey {
  std::string exam_id;
  std::string patient_id;
};

/// Partitions indices of `keys` (given in acquisition order) into
/// fractions.size() groups. Fractions must sum to 1.
std::vector<std::vector<std::size_t>> split_dataset(std::span<const SplitKey> keys, SplitMode mode,
                                                    std::span<const double> fractions,
                                                    std::uint64_t seed);

// ---- training loop ------------------------------------------------------------

struct EpochReport {
  const EpochRecord& record;
  /// Infer-mode validation probabilities for this epoch, one row per record.
  const std::vector<std::array<float, kNumClasses>>& val_probabilities;
  const Model& model;
};

/// Return true to stop training after this epoch.
using EpochCallback = std::function<bool(const EpochReport&)>;

struct FitResult {
  ModelCheckpoint checkpoint;  // epoch-end snapshot with minimum validation loss
  TrainLog log;
};

Tensor<float> make_targets(std::span<const LabelVector> labels);

/// Mean BCE and probabilities for a labelled set in infer mode.
double evaluate_loss(const Model& model, const LabeledSet& set, std::size_t batch_size,
                     std::vector<std::array<float, kNumClasses>>* probabilities = nullptr);

FitResult fit(Model model, const LabeledSet& train, const LabeledSet& val,
              const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace ecgdnn
