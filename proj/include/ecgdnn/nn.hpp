#pragma once

// Layer primitives for the 1-D residual network. Every op works on
// row-major tensors laid out as N x C x L (conv, batchnorm, pooling) or
// N x F (dense, loss). Backward functions take the forward inputs (or a
// cache produced by the forward call) and the upstream gradient.

#include <cstdint>
#include <random>

#include "ecgdnn/tensor.hpp"

namespace ecgdnn {

enum class Mode { Train, Infer };

using Rng = std::mt19937_64;

/// Left/right zero padding so that output length is ceil(length / stride).
struct SamePadding {
  std::size_t out_length;
  std::size_t left;
  std::size_t right;
};
SamePadding same_padding(std::size_t length, std::size_t kernel, std::size_t stride);

// ---- convolution ----------------------------------------------------------

/// Cross-correlation with 'same' zero padding. x: N x Cin x L (or Cin x L),
/// kernel: Cout x Cin x K, bias: Cout.
template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                         std::size_t stride);

template <typename T>
struct Conv1dGrads {
  Tensor<T> x;  // empty when not requested
  Tensor<T> kernel;
  Tensor<T> bias;
};

template <typename T>
Conv1dGrads<T> conv1d_backward(const Tensor<T>& x, const Tensor<T>& kernel,
                               const Tensor<T>& grad_out, std::size_t stride,
                               bool need_grad_x = true);

// ---- batch normalization --------------------------------------------------

struct BatchNormOptions {
  double momentum = 0.9;
  double epsilon = 1e-5;
};

template <typename T>
struct BatchNormCache {
  Mode mode = Mode::Train;
  Tensor<T> x_hat;
  std::vector<T> inv_std;  // per channel
};

/// Normalizes per channel over (N, L). Train mode uses batch statistics and
/// updates the running statistics in place; infer mode reads them.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                            Tensor<T>& running_mean, Tensor<T>& running_var, Mode mode,
                            const BatchNormOptions& options = {},
                            BatchNormCache<T>* cache = nullptr);

/// Infer-mode normalization against fixed running statistics.
template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          const Tensor<T>& running_mean, const Tensor<T>& running_var,
                          const BatchNormOptions& options = {},
                          BatchNormCache<T>* cache = nullptr);

template <typename T>
struct BatchNormGrads {
  Tensor<T> x;
  Tensor<T> gamma;
  Tensor<T> beta;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& grad_out, const Tensor<T>& gamma,
                                     const BatchNormCache<T>& cache);

// ---- elementwise ------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Derivative at exactly zero is taken as zero.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out);

/// Inverted dropout. In train mode `mask` receives the per-element scale
/// (0 or 1/(1-rate)); it is left empty otherwise.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, Rng& rng,
                  Tensor<T>* mask = nullptr);

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& mask, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
T sigmoid(T x);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

// ---- pooling ----------------------------------------------------------------

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  std::vector<std::uint32_t> argmax;  // index into the L axis, per output element
};

/// Windows start at multiples of `stride`; the last window may be partial.
/// Ties resolve to the first maximal element.
template <typename T>
MaxPoolResult<T> maxpool1d(const Tensor<T>& x, std::size_t window, std::size_t stride);

template <typename T>
Tensor<T> maxpool1d_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                             const Tensor<T>& grad_out);

// ---- dense --------------------------------------------------------------

/// x: N x F, weights: F x O, bias: O.
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
struct DenseGrads {
  Tensor<T> x;
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weights,
                             const Tensor<T>& grad_out);

// ---- loss -----------------------------------------------------------------

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  // d loss / d logits
};

/// Mean sigmoid cross-entropy over all N x C entries, in the fused form
/// log(1 + exp(-|z|)) + max(z, 0) - z * y.
template <typename T>
LossResult<T> bce_loss(const Tensor<T>& logits, const Tensor<T>& targets);

}  // namespace ecgdnn
