#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgdnn/labels.hpp"
#include "ecgdnn/nn.hpp"
#include "ecgdnn/signal.hpp"

namespace ecgdnn {

struct ArchitectureConfig {
  std::size_t n_residual_blocks = 4;
  std::size_t kernel_length = 16;
  std::size_t initial_filters = 64;
  std::size_t filter_growth = 64;
  std::size_t growth_every = 2;  // blocks between filter increases
  std::size_t subsample_factor = 4;
  double dropout_rate = 0.2;  // drop probability; keeps 80% of activations
  std::size_t n_classes = kNumClasses;
  std::size_t input_channels = kNumLeads;
  std::size_t input_length = kWindowLength;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  void validate() const;

  /// Output length of each residual block.
  std::vector<std::size_t> block_lengths() const;
  /// Filter count of each residual block.
  std::vector<std::size_t> block_filters() const;
  std::size_t flatten_features() const;

  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

template <typename T>
struct ConvLayer {
  Tensor<T> kernel;  // out x in x k
  Tensor<T> bias;    // out
  std::size_t stride = 1;
};

template <typename T>
struct BatchNormLayer {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
};

template <typename T>
struct ResidualBlock {
  ConvLayer<T> conv1;
  BatchNormLayer<T> bn1;
  ConvLayer<T> conv2;  // strided
  BatchNormLayer<T> bn2;  // applied after the skip sum
  std::size_t downsample = 1;
  std::optional<ConvLayer<T>> skip;  // 1x1 conv when channel count changes
};

/// Name and storage of one array; used for gradients, optimizers and checkpoints.
template <typename TensorT>
struct NamedTensor {
  std::string name;
  TensorT* tensor;
};

/// One gradient array per learnable array, in `Network::parameters()` order.
template <typename T>
using GradientSet = std::vector<Tensor<T>>;

template <typename T>
struct BlockTape {
  Tensor<T> x_in;
  Shape y_in_shape;
  BatchNormCache<T> bn1;
  Tensor<T> a1;  // bn1 output, relu input
  Tensor<T> mask1;
  Tensor<T> h1;  // conv2 input
  std::vector<std::uint32_t> pool_argmax;
  Tensor<T> skip_in;  // 1x1 conv input
  BatchNormCache<T> bn2;
  Tensor<T> a2;
  Tensor<T> mask2;
};

/// Intermediate values recorded by a train-mode forward pass.
template <typename T>
struct Tape {
  Tensor<T> input;
  BatchNormCache<T> stem_bn;
  Tensor<T> stem_a;
  std::vector<BlockTape<T>> blocks;
  Tensor<T> flat;
};

/// Shapes observed at each stage of a forward pass.
struct ShapeTrace {
  Shape stem;
  std::vector<Shape> blocks;
  Shape flatten;
  Shape output;
};

/// Stem conv + pre-activation residual blocks + flatten + dense head.
template <typename T>
class Network {
 public:
  Network() = default;

  /// He-normal kernels, zero biases, unit BN scale.
  static Network build(const ArchitectureConfig& config, std::uint64_t seed);

  const ArchitectureConfig& config() const { return config_; }

  /// Raw logits, N x n_classes. Train mode needs `rng` (dropout) and updates
  /// BN running statistics; `tape` is required for a later backward call.
  Tensor<T> logits(const Tensor<T>& input, Mode mode, Rng* rng = nullptr,
                   Tape<T>* tape = nullptr, ShapeTrace* trace = nullptr);

  /// Infer-mode logits; reentrant on a shared model.
  Tensor<T> logits(const Tensor<T>& input, ShapeTrace* trace = nullptr) const;

  /// Infer-mode probabilities in (0, 1), N x n_classes.
  Tensor<T> predict(const Tensor<T>& input) const { return sigmoid(logits(input)); }

  GradientSet<T> backward(const Tape<T>& tape, const Tensor<T>& grad_logits) const;

  std::vector<NamedTensor<Tensor<T>>> parameters();
  std::vector<NamedTensor<const Tensor<T>>> parameters() const;
  /// BN running statistics.
  std::vector<NamedTensor<Tensor<T>>> buffers();
  std::vector<NamedTensor<const Tensor<T>>> buffers() const;

  std::size_t parameter_count() const;

  template <typename U>
  Network<U> cast() const;

 private:
  template <typename U>
  friend class Network;

  template <typename Self>
  static auto collect(Self& self, bool learnable);
  template <typename Self>
  static Tensor<T> run(Self& self, const Tensor<T>& input, Mode mode, Rng* rng, Tape<T>* tape,
                       ShapeTrace* trace);

  ArchitectureConfig config_;
  ConvLayer<T> stem_conv_;
  BatchNormLayer<T> stem_bn_;
  std::vector<ResidualBlock<T>> blocks_;
  Tensor<T> dense_weights_;  // features x classes
  Tensor<T> dense_bias_;
};

using Model = Network<float>;

/// Stacks network inputs into an N x 12 x 4096 batch.
Tensor<float> make_batch(std::span<const NetworkInput> inputs);
Tensor<float> make_batch(std::span<const NetworkInput* const> inputs);

/// Probabilities for many inputs, evaluated `batch_size` at a time.
std::vector<std::array<float, kNumClasses>> predict_all(const Model& model,
                                                        std::span<const NetworkInput> inputs,
                                                        std::size_t batch_size = 32);

// ---- checkpoints ------------------------------------------------------------

class CorruptCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedVersion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kCheckpointMagic = "ECGDNN01";
inline constexpr int kCheckpointVersion = 1;

struct TrainingMetadata {
  int epoch = -1;
  double val_loss = 0.0;
  std::uint64_t seed = 0;
};

struct ModelCheckpoint {
  Model model;
  std::array<double, kNumClasses> thresholds{0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  TrainingMetadata training;
};

/// Layout: magic, u64 little-endian header length, JSON header, float32 LE blob.
void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ecgdnn
