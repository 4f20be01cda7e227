#include "ecgdnn/nn.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace ecgdnn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct ConvDims {
  std::size_t n, c_in, length, c_out, k, stride;
  SamePadding pad;
};

template <typename T>
ConvDims conv_dims(const Tensor<T>& x, const Tensor<T>& kernel, std::size_t stride) {
  if (kernel.rank() != 3) throw ShapeError("conv kernel must be Cout x Cin x K");
  if (stride == 0) throw ShapeError("conv stride must be positive");
  std::size_t n = 1, c = 0, l = 0;
  if (x.rank() == 3) {
    n = x.dim(0), c = x.dim(1), l = x.dim(2);
  } else if (x.rank() == 2) {
    c = x.dim(0), l = x.dim(1);
  } else {
    throw ShapeError("conv input must be N x C x L or C x L, got " + to_string(x.shape()));
  }
  if (kernel.dim(1) != c)
    throw ShapeError("conv channel mismatch: input " + to_string(x.shape()) + ", kernel " +
                     to_string(kernel.shape()));
  return {n, c, l, kernel.dim(0), kernel.dim(2), stride, same_padding(l, kernel.dim(2), stride)};
}

// col[(ci * K + k), t] = x[ci, t * stride + k - left], zero outside the signal.
template <typename T>
void im2col(const T* x, const ConvDims& d, T* col, std::size_t left) {
  const auto lo = d.pad.out_length;
  for (std::size_t ci = 0; ci < d.c_in; ++ci) {
    const T* xc = x + ci * d.length;
    for (std::size_t k = 0; k < d.k; ++k) {
      T* row = col + (ci * d.k + k) * lo;
      const auto shift = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(left);
      if (d.stride == 1) {
        // valid t range: 0 <= t + shift < length
        const auto slo = static_cast<std::ptrdiff_t>(lo);
        const std::ptrdiff_t t0 = std::min(std::max<std::ptrdiff_t>(0, -shift), slo);
        const std::ptrdiff_t t1 = std::max(
            std::min(slo, static_cast<std::ptrdiff_t>(d.length) - shift), t0);
        std::fill(row, row + t0, T(0));
        std::copy(xc + t0 + shift, xc + t1 + shift, row + t0);
        std::fill(row + t1, row + slo, T(0));
      } else {
        for (std::size_t t = 0; t < lo; ++t) {
          const auto idx = static_cast<std::ptrdiff_t>(t * d.stride) + shift;
          row[t] = (idx >= 0 && idx < static_cast<std::ptrdiff_t>(d.length))
                       ? xc[static_cast<std::size_t>(idx)]
                       : T(0);
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvDims& d, T* dx) {
  const auto lo = d.pad.out_length;
  for (std::size_t ci = 0; ci < d.c_in; ++ci) {
    T* xc = dx + ci * d.length;
    for (std::size_t k = 0; k < d.k; ++k) {
      const T* row = col + (ci * d.k + k) * lo;
      const auto shift = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(d.pad.left);
      for (std::size_t t = 0; t < lo; ++t) {
        const auto idx = static_cast<std::ptrdiff_t>(t * d.stride) + shift;
        if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(d.length))
          xc[static_cast<std::size_t>(idx)] += row[t];
      }
    }
  }
}

bool is_pointwise(const ConvDims& d) { return d.k == 1 && d.stride == 1; }

}  // namespace

SamePadding same_padding(std::size_t length, std::size_t kernel, std::size_t stride) {
  const std::size_t out = (length + stride - 1) / stride;
  const std::size_t span = (out - 1) * stride + kernel;
  const std::size_t total = span > length ? span - length : 0;
  return {out, total / 2, total - total / 2};
}

template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                         std::size_t stride) {
  const auto d = conv_dims(x, kernel, stride);
  if (bias.size() != d.c_out) throw ShapeError("conv bias length must equal Cout");
  const auto lo = d.pad.out_length;
  Shape out_shape = x.rank() == 3 ? Shape{d.n, d.c_out, lo} : Shape{d.c_out, lo};
  Tensor<T> y(out_shape);

  const std::size_t rows = d.c_in * d.k;
  ConstMatMap<T> w(kernel.ptr(), static_cast<Eigen::Index>(d.c_out), static_cast<Eigen::Index>(rows));
  AlignedVector<T> col(is_pointwise(d) ? 0 : rows * lo);
  for (std::size_t s = 0; s < d.n; ++s) {
    const T* xs = x.ptr() + s * d.c_in * d.length;
    const T* cp = xs;
    if (!is_pointwise(d)) {
      im2col(xs, d, col.data(), d.pad.left);
      cp = col.data();
    }
    ConstMatMap<T> c(cp, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(lo));
    MatMap<T> out(y.ptr() + s * d.c_out * lo, static_cast<Eigen::Index>(d.c_out),
                  static_cast<Eigen::Index>(lo));
    out.noalias() = w * c;
    for (std::size_t co = 0; co < d.c_out; ++co)
      out.row(static_cast<Eigen::Index>(co)).array() += bias[co];
  }
  return y;
}

template <typename T>
Conv1dGrads<T> conv1d_backward(const Tensor<T>& x, const Tensor<T>& kernel,
                               const Tensor<T>& grad_out, std::size_t stride, bool need_grad_x) {
  const auto d = conv_dims(x, kernel, stride);
  const auto lo = d.pad.out_length;
  if (grad_out.size() != d.n * d.c_out * lo)
    throw ShapeError("conv grad_out shape " + to_string(grad_out.shape()) +
                     " incongruent with forward output");
  Conv1dGrads<T> g;
  g.kernel = Tensor<T>(kernel.shape());
  g.bias = Tensor<T>(Shape{d.c_out});
  if (need_grad_x) g.x = Tensor<T>(x.shape());

  const std::size_t rows = d.c_in * d.k;
  ConstMatMap<T> w(kernel.ptr(), static_cast<Eigen::Index>(d.c_out), static_cast<Eigen::Index>(rows));
  MatMap<T> gw(g.kernel.ptr(), static_cast<Eigen::Index>(d.c_out), static_cast<Eigen::Index>(rows));
  AlignedVector<T> col(is_pointwise(d) ? 0 : rows * lo);
  AlignedVector<T> dcol;
  if (need_grad_x && !is_pointwise(d))
    dcol.resize(d.stride == 1 ? d.c_out * d.k * d.length : rows * lo);
  AlignedVector<T> flipped;
  ConvDims flipped_dims = d;
  if (need_grad_x && !is_pointwise(d) && d.stride == 1) {
    flipped.resize(d.c_in * d.c_out * d.k);
    for (std::size_t co = 0; co < d.c_out; ++co)
      for (std::size_t ci = 0; ci < d.c_in; ++ci)
        for (std::size_t k = 0; k < d.k; ++k)
          flipped[(ci * d.c_out + co) * d.k + (d.k - 1 - k)] = kernel[(co * d.c_in + ci) * d.k + k];
    flipped_dims.c_in = d.c_out;
    flipped_dims.length = lo;
  }

  for (std::size_t s = 0; s < d.n; ++s) {
    const T* xs = x.ptr() + s * d.c_in * d.length;
    const T* cp = xs;
    if (!is_pointwise(d)) {
      im2col(xs, d, col.data(), d.pad.left);
      cp = col.data();
    }
    ConstMatMap<T> c(cp, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(lo));
    ConstMatMap<T> dy(grad_out.ptr() + s * d.c_out * lo, static_cast<Eigen::Index>(d.c_out),
                      static_cast<Eigen::Index>(lo));
    gw.noalias() += dy * c.transpose();
    for (std::size_t co = 0; co < d.c_out; ++co)
      g.bias[co] += dy.row(static_cast<Eigen::Index>(co)).sum();
    if (need_grad_x) {
      T* dxs = g.x.ptr() + s * d.c_in * d.length;
      if (is_pointwise(d)) {
        MatMap<T> dx(dxs, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(lo));
        dx.noalias() = w.transpose() * dy;
      } else if (d.stride == 1) {
        // dx is dy correlated with the flipped, channel-transposed kernel.
        im2col(grad_out.ptr() + s * d.c_out * lo, flipped_dims, dcol.data(), d.k - 1 - d.pad.left);
        MatMap<T>(dxs, static_cast<Eigen::Index>(d.c_in), static_cast<Eigen::Index>(d.length))
            .noalias() = ConstMatMap<T>(flipped.data(), static_cast<Eigen::Index>(d.c_in),
                                        static_cast<Eigen::Index>(d.c_out * d.k)) *
                         ConstMatMap<T>(dcol.data(), static_cast<Eigen::Index>(d.c_out * d.k),
                                        static_cast<Eigen::Index>(d.length));
      } else {
        MatMap<T> dc(dcol.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(lo));
        dc.noalias() = w.transpose() * dy;
        col2im_add(dcol.data(), d, dxs);
      }
    }
  }
  return g;
}

namespace {

template <typename T>
Tensor<T> normalize(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    const std::vector<T>& mean, std::vector<T> inv_std, Mode mode,
                    BatchNormCache<T>* cache) {
  const std::size_t n = x.dim(0), c = x.dim(1), l = x.dim(2);
  Tensor<T> y(x.shape());
  Tensor<T> x_hat;
  if (cache) x_hat = Tensor<T>(x.shape());
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (s * c + ch) * l;
      const T* p = x.ptr() + off;
      T* q = y.ptr() + off;
      const T mu = mean[ch], is = inv_std[ch], g = gamma[ch], b = beta[ch];
      if (cache) {
        T* h = x_hat.ptr() + off;
        for (std::size_t t = 0; t < l; ++t) {
          h[t] = (p[t] - mu) * is;
          q[t] = g * h[t] + b;
        }
      } else {
        for (std::size_t t = 0; t < l; ++t) q[t] = g * ((p[t] - mu) * is) + b;
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
void check_bn_shapes(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     const Tensor<T>& running_mean, const Tensor<T>& running_var) {
  if (x.rank() != 3) throw ShapeError("batchnorm input must be N x C x L");
  const std::size_t c = x.dim(1);
  if (gamma.size() != c || beta.size() != c || running_mean.size() != c ||
      running_var.size() != c)
    throw ShapeError("batchnorm parameter length must equal channel count");
}

}  // namespace

template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          const Tensor<T>& running_mean, const Tensor<T>& running_var,
                          const BatchNormOptions& options, BatchNormCache<T>* cache) {
  check_bn_shapes(x, gamma, beta, running_mean, running_var);
  const std::size_t c = x.dim(1);
  std::vector<T> mean(c), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    mean[ch] = running_mean[ch];
    inv_std[ch] = static_cast<T>(
        1.0 / std::sqrt(static_cast<double>(running_var[ch]) + options.epsilon));
  }
  return normalize(x, gamma, beta, mean, std::move(inv_std), Mode::Infer, cache);
}

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                            Tensor<T>& running_mean, Tensor<T>& running_var, Mode mode,
                            const BatchNormOptions& options, BatchNormCache<T>* cache) {
  if (mode == Mode::Infer)
    return batchnorm_infer(x, gamma, beta, running_mean, running_var, options, cache);
  check_bn_shapes(x, gamma, beta, running_mean, running_var);
  const std::size_t n = x.dim(0), c = x.dim(1), l = x.dim(2);
  const std::size_t m = n * l;
  if (m < 2) throw ShapeError("batchnorm train mode needs more than one value per channel");

  std::vector<T> mean(c), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const T* p = x.ptr() + (s * c + ch) * l;
      for (std::size_t t = 0; t < l; ++t) sum += p[t];
    }
    const double mu = sum / static_cast<double>(m);
    double sq = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const T* p = x.ptr() + (s * c + ch) * l;
      for (std::size_t t = 0; t < l; ++t) {
        const double dv = p[t] - mu;
        sq += dv * dv;
      }
    }
    const double var = sq / static_cast<double>(m);
    mean[ch] = static_cast<T>(mu);
    inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var + options.epsilon));
    running_mean[ch] =
        static_cast<T>(options.momentum * running_mean[ch] + (1.0 - options.momentum) * mu);
    running_var[ch] =
        static_cast<T>(options.momentum * running_var[ch] + (1.0 - options.momentum) * var);
  }
  return normalize(x, gamma, beta, mean, std::move(inv_std), Mode::Train, cache);
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& grad_out, const Tensor<T>& gamma,
                                     const BatchNormCache<T>& cache) {
  if (grad_out.shape() != cache.x_hat.shape())
    throw ShapeError("batchnorm grad_out shape mismatch");
  const std::size_t n = grad_out.dim(0), c = grad_out.dim(1), l = grad_out.dim(2);
  const double m = static_cast<double>(n * l);
  BatchNormGrads<T> g{Tensor<T>(grad_out.shape()), Tensor<T>(Shape{c}), Tensor<T>(Shape{c})};
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * c + ch) * l;
      const T* dy = grad_out.ptr() + off;
      const T* h = cache.x_hat.ptr() + off;
      for (std::size_t t = 0; t < l; ++t) {
        sum_dy += dy[t];
        sum_dy_xhat += static_cast<double>(dy[t]) * h[t];
      }
    }
    g.gamma[ch] = static_cast<T>(sum_dy_xhat);
    g.beta[ch] = static_cast<T>(sum_dy);
    const T scale = gamma[ch] * cache.inv_std[ch];
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * c + ch) * l;
      const T* dy = grad_out.ptr() + off;
      const T* h = cache.x_hat.ptr() + off;
      T* dx = g.x.ptr() + off;
      if (cache.mode == Mode::Train) {
        const T mean_dy = static_cast<T>(sum_dy / m);
        const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / m);
        for (std::size_t t = 0; t < l; ++t)
          dx[t] = scale * (dy[t] - mean_dy - h[t] * mean_dy_xhat);
      } else {
        for (std::size_t t = 0; t < l; ++t) dx[t] = scale * dy[t];
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  if (x.size() != grad_out.size()) throw ShapeError("relu grad_out shape mismatch");
  Tensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T(0) ? grad_out[i] : T(0);
  return g;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, Rng& rng, Tensor<T>* mask) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  if (mode == Mode::Infer || rate == 0.0) {
    if (mask) *mask = Tensor<T>();
    return x;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> m(x.shape());
  Tensor<T> y(x.shape());
  // Two 32-bit uniforms per generator call.
  const auto threshold = static_cast<std::uint64_t>(std::ldexp(rate, 32));
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::uint64_t u;
    if (i % 2 == 0) {
      bits = rng();
      u = bits & 0xFFFFFFFFu;
    } else {
      u = bits >> 32;
    }
    m[i] = u < threshold ? T(0) : keep_scale;
    y[i] = x[i] * m[i];
  }
  if (mask) *mask = std::move(m);
  return y;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& mask, const Tensor<T>& grad_out) {
  if (mask.empty()) return grad_out;
  if (mask.size() != grad_out.size()) throw ShapeError("dropout grad_out shape mismatch");
  Tensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * mask[i];
  return g;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("add shape mismatch: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
  return y;
}

template <typename T>
MaxPoolResult<T> maxpool1d(const Tensor<T>& x, std::size_t window, std::size_t stride) {
  if (x.rank() != 3) throw ShapeError("maxpool input must be N x C x L");
  if (window == 0 || stride == 0) throw ShapeError("maxpool window and stride must be positive");
  const std::size_t n = x.dim(0), c = x.dim(1), l = x.dim(2);
  const std::size_t lo = (l + stride - 1) / stride;
  MaxPoolResult<T> r{Tensor<T>(Shape{n, c, lo}), std::vector<std::uint32_t>(n * c * lo)};
  for (std::size_t row = 0; row < n * c; ++row) {
    const T* p = x.ptr() + row * l;
    for (std::size_t t = 0; t < lo; ++t) {
      const std::size_t begin = t * stride;
      const std::size_t end = std::min(begin + window, l);
      std::size_t best = begin;
      for (std::size_t i = begin + 1; i < end; ++i)
        if (p[i] > p[best]) best = i;
      r.output[row * lo + t] = p[best];
      r.argmax[row * lo + t] = static_cast<std::uint32_t>(best);
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool1d_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                             const Tensor<T>& grad_out) {
  if (input_shape.size() != 3 || grad_out.size() != argmax.size())
    throw ShapeError("maxpool backward shape mismatch");
  const std::size_t rows = input_shape[0] * input_shape[1];
  const std::size_t l = input_shape[2];
  const std::size_t lo = grad_out.size() / rows;
  Tensor<T> g(input_shape);
  for (std::size_t row = 0; row < rows; ++row)
    for (std::size_t t = 0; t < lo; ++t)
      g[row * l + argmax[row * lo + t]] += grad_out[row * lo + t];
  return g;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias) {
  if (x.rank() != 2 || weights.rank() != 2 || weights.dim(0) != x.dim(1) ||
      bias.size() != weights.dim(1))
    throw ShapeError("dense shape mismatch: x " + to_string(x.shape()) + ", W " +
                     to_string(weights.shape()));
  const auto n = static_cast<Eigen::Index>(x.dim(0));
  const auto f = static_cast<Eigen::Index>(x.dim(1));
  const auto o = static_cast<Eigen::Index>(weights.dim(1));
  Tensor<T> y(Shape{x.dim(0), weights.dim(1)});
  MatMap<T> ym(y.ptr(), n, o);
  ym.noalias() = ConstMatMap<T>(x.ptr(), n, f) * ConstMatMap<T>(weights.ptr(), f, o);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < o; ++j) ym(i, j) += bias[static_cast<std::size_t>(j)];
  return y;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weights,
                             const Tensor<T>& grad_out) {
  if (grad_out.rank() != 2 || grad_out.dim(0) != x.dim(0) || grad_out.dim(1) != weights.dim(1))
    throw ShapeError("dense grad_out shape mismatch");
  const auto n = static_cast<Eigen::Index>(x.dim(0));
  const auto f = static_cast<Eigen::Index>(x.dim(1));
  const auto o = static_cast<Eigen::Index>(weights.dim(1));
  DenseGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(weights.shape()), Tensor<T>(Shape{weights.dim(1)})};
  ConstMatMap<T> xm(x.ptr(), n, f), wm(weights.ptr(), f, o), dy(grad_out.ptr(), n, o);
  MatMap<T>(g.x.ptr(), n, f).noalias() = dy * wm.transpose();
  MatMap<T>(g.weights.ptr(), f, o).noalias() = xm.transpose() * dy;
  for (Eigen::Index j = 0; j < o; ++j) g.bias[static_cast<std::size_t>(j)] = dy.col(j).sum();
  return g;
}

template <typename T>
LossResult<T> bce_loss(const Tensor<T>& logits, const Tensor<T>& targets) {
  if (logits.shape() != targets.shape()) throw ShapeError("loss logits/targets shape mismatch");
  LossResult<T> r{0.0, Tensor<T>(logits.shape())};
  const double count = static_cast<double>(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = targets[i];
    total += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * y;
    r.grad[i] = static_cast<T>((sigmoid(z) - y) / count);
  }
  r.loss = total / count;
  return r;
}

#define ECGDNN_INSTANTIATE(T)                                                                   \
  template Tensor<T> conv1d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                    std::size_t);                                               \
  template Conv1dGrads<T> conv1d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                          std::size_t, bool);                                   \
  template Tensor<T> batchnorm_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                       Tensor<T>&, Tensor<T>&, Mode, const BatchNormOptions&,   \
                                       BatchNormCache<T>*);                                     \
  template Tensor<T> batchnorm_infer(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                     const Tensor<T>&, const Tensor<T>&, const BatchNormOptions&, \
                                     BatchNormCache<T>*);                                       \
  template BatchNormGrads<T> batchnorm_backward(const Tensor<T>&, const Tensor<T>&,             \
                                                const BatchNormCache<T>&);                      \
  template Tensor<T> relu(const Tensor<T>&);                                                    \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> dropout(const Tensor<T>&, double, Mode, Rng&, Tensor<T>*);                 \
  template Tensor<T> dropout_backward(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
  template T sigmoid(T);                                                                        \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                 \
  template MaxPoolResult<T> maxpool1d(const Tensor<T>&, std::size_t, std::size_t);              \
  template Tensor<T> maxpool1d_backward(const Shape&, const std::vector<std::uint32_t>&,         \
                                        const Tensor<T>&);                                      \
  template Tensor<T> dense_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template LossResult<T> bce_loss(const Tensor<T>&, const Tensor<T>&);

ECGDNN_INSTANTIATE(float)
ECGDNN_INSTANTIATE(double)

#undef ECGDNN_INSTANTIATE

}  // namespace ecgdnn
