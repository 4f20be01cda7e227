#include "ecgdnn/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <type_traits>

#include "json.hpp"

namespace ecgdnn {

void ArchitectureConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("invalid architecture config: " + what);
  };
  if (n_residual_blocks == 0) fail("n_residual_blocks must be positive");
  if (kernel_length == 0) fail("kernel_length must be positive");
  if (initial_filters == 0) fail("initial_filters must be positive");
  if (growth_every == 0) fail("growth_every must be positive");
  if (subsample_factor == 0) fail("subsample_factor must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must be in [0, 1)");
  if (n_classes == 0 || input_channels == 0 || input_length == 0) fail("zero dimension");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) fail("bn_momentum must be in [0, 1)");
  if (!(bn_epsilon > 0.0)) fail("bn_epsilon must be positive");
}

std::vector<std::size_t> ArchitectureConfig::block_lengths() const {
  std::vector<std::size_t> out;
  std::size_t length = input_length;
  for (std::size_t b = 0; b < n_residual_blocks; ++b) {
    length = (length + subsample_factor - 1) / subsample_factor;
    out.push_back(length);
  }
  return out;
}

std::vector<std::size_t> ArchitectureConfig::block_filters() const {
  std::vector<std::size_t> out;
  for (std::size_t b = 0; b < n_residual_blocks; ++b)
    out.push_back(initial_filters + filter_growth * (b / growth_every));
  return out;
}

std::size_t ArchitectureConfig::flatten_features() const {
  return block_lengths().back() * block_filters().back();
}

namespace {

template <typename T>
ConvLayer<T> make_conv(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                       Rng& rng) {
  ConvLayer<T> c{Tensor<T>(Shape{out, in, k}), Tensor<T>(Shape{out}), stride};
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in * k)));
  for (auto& w : c.kernel.data()) w = static_cast<T>(normal(rng));
  return c;
}

template <typename T>
BatchNormLayer<T> make_bn(std::size_t ch) {
  return {Tensor<T>(Shape{ch}, T(1)), Tensor<T>(Shape{ch}), Tensor<T>(Shape{ch}),
          Tensor<T>(Shape{ch}, T(1))};
}

BatchNormOptions bn_options(const ArchitectureConfig& c) {
  return {c.bn_momentum, c.bn_epsilon};
}

template <typename T>
Tensor<T> apply_bn(BatchNormLayer<T>& bn, const Tensor<T>& x, Mode mode,
                   const BatchNormOptions& opt, BatchNormCache<T>* cache) {
  return batchnorm_forward(x, bn.gamma, bn.beta, bn.running_mean, bn.running_var, mode, opt,
                           cache);
}

template <typename T>
Tensor<T> apply_bn(const BatchNormLayer<T>& bn, const Tensor<T>& x, Mode,
                   const BatchNormOptions& opt, BatchNormCache<T>* cache) {
  return batchnorm_infer(x, bn.gamma, bn.beta, bn.running_mean, bn.running_var, opt, cache);
}

template <typename T>
Tensor<T> apply_conv(const ConvLayer<T>& c, const Tensor<T>& x) {
  return conv1d_forward(x, c.kernel, c.bias, c.stride);
}

template <typename T>
void push_conv_grads(GradientSet<T>& out, Conv1dGrads<T>& g) {
  out.push_back(std::move(g.kernel));
  out.push_back(std::move(g.bias));
}

template <typename T>
void push_bn_grads(GradientSet<T>& out, BatchNormGrads<T>& g) {
  out.push_back(std::move(g.gamma));
  out.push_back(std::move(g.beta));
}

template <typename T, typename U>
ConvLayer<U> cast_conv(const ConvLayer<T>& c) {
  return {c.kernel.template cast<U>(), c.bias.template cast<U>(), c.stride};
}

template <typename T, typename U>
BatchNormLayer<U> cast_bn(const BatchNormLayer<T>& b) {
  return {b.gamma.template cast<U>(), b.beta.template cast<U>(),
          b.running_mean.template cast<U>(), b.running_var.template cast<U>()};
}

}  // namespace

template <typename T>
Network<T> Network<T>::build(const ArchitectureConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Network net;
  net.config_ = config;
  const auto k = config.kernel_length;
  net.stem_conv_ = make_conv<T>(config.input_channels, config.initial_filters, k, 1, rng);
  net.stem_bn_ = make_bn<T>(config.initial_filters);
  std::size_t channels = config.initial_filters;
  const auto filters = config.block_filters();
  for (std::size_t b = 0; b < config.n_residual_blocks; ++b) {
    ResidualBlock<T> block;
    const std::size_t out = filters[b];
    block.downsample = config.subsample_factor;
    block.conv1 = make_conv<T>(channels, out, k, 1, rng);
    block.bn1 = make_bn<T>(out);
    block.conv2 = make_conv<T>(out, out, k, config.subsample_factor, rng);
    block.bn2 = make_bn<T>(out);
    if (out != channels) block.skip = make_conv<T>(channels, out, 1, 1, rng);
    net.blocks_.push_back(std::move(block));
    channels = out;
  }
  const std::size_t features = config.flatten_features();
  net.dense_weights_ = Tensor<T>(Shape{features, config.n_classes});
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(features)));
  for (auto& w : net.dense_weights_.data()) w = static_cast<T>(normal(rng));
  net.dense_bias_ = Tensor<T>(Shape{config.n_classes});
  return net;
}

template <typename T>
template <typename Self>
Tensor<T> Network<T>::run(Self& self, const Tensor<T>& input, Mode mode, Rng* rng, Tape<T>* tape,
                          ShapeTrace* trace) {
  const auto& cfg = self.config_;
  if (input.rank() != 3 || input.dim(1) != cfg.input_channels || input.dim(2) != cfg.input_length)
    throw ShapeError("network input must be N x " + std::to_string(cfg.input_channels) + " x " +
                     std::to_string(cfg.input_length) + ", got " + to_string(input.shape()));
  if (mode == Mode::Train && !rng && cfg.dropout_rate > 0.0)
    throw std::invalid_argument("train-mode forward needs a random generator");
  const auto opt = bn_options(cfg);
  Rng unused(0);
  Rng& drop_rng = rng ? *rng : unused;

  if (tape) {
    tape->input = input;
    tape->blocks.assign(self.blocks_.size(), {});
  }
  Tensor<T> h = apply_conv(self.stem_conv_, input);
  h = apply_bn(self.stem_bn_, h, mode, opt, tape ? &tape->stem_bn : nullptr);
  Tensor<T> x = relu(h);
  if (tape) tape->stem_a = std::move(h);
  if (trace) {
    *trace = {};
    trace->stem = x.shape();
  }
  Tensor<T> y = x;

  for (std::size_t b = 0; b < self.blocks_.size(); ++b) {
    auto& blk = self.blocks_[b];
    BlockTape<T>* bt = tape ? &tape->blocks[b] : nullptr;

    Tensor<T> skip;
    if (blk.downsample > 1) {
      auto pooled = maxpool1d(y, blk.downsample, blk.downsample);
      if (bt) {
        bt->y_in_shape = y.shape();
        bt->pool_argmax = std::move(pooled.argmax);
      }
      skip = std::move(pooled.output);
    } else {
      skip = y;
      if (bt) bt->y_in_shape = y.shape();
    }
    if (blk.skip) {
      Tensor<T> s = apply_conv(*blk.skip, skip);
      if (bt) bt->skip_in = std::move(skip);
      skip = std::move(s);
    }

    Tensor<T> a1 = apply_bn(blk.bn1, apply_conv(blk.conv1, x), mode, opt, bt ? &bt->bn1 : nullptr);
    Tensor<T> h1 = dropout(relu(a1), cfg.dropout_rate, mode, drop_rng, bt ? &bt->mask1 : nullptr);
    Tensor<T> sum = add(apply_conv(blk.conv2, h1), skip);
    Tensor<T> a2 = apply_bn(blk.bn2, sum, mode, opt, bt ? &bt->bn2 : nullptr);
    Tensor<T> x_out =
        dropout(relu(a2), cfg.dropout_rate, mode, drop_rng, bt ? &bt->mask2 : nullptr);
    if (bt) {
      bt->x_in = std::move(x);
      bt->a1 = std::move(a1);
      bt->h1 = std::move(h1);
      bt->a2 = std::move(a2);
    }
    x = std::move(x_out);
    y = std::move(sum);
    if (trace) trace->blocks.push_back(x.shape());
  }

  const std::size_t n = x.dim(0);
  const std::size_t features = x.size() / n;
  Tensor<T> flat = std::move(x).reshaped(Shape{n, features});
  if (trace) trace->flatten = flat.shape();
  Tensor<T> out = dense_forward(flat, self.dense_weights_, self.dense_bias_);
  if (tape) tape->flat = std::move(flat);
  if (trace) trace->output = out.shape();
  return out;
}

template <typename T>
Tensor<T> Network<T>::logits(const Tensor<T>& input, Mode mode, Rng* rng, Tape<T>* tape,
                             ShapeTrace* trace) {
  return run(*this, input, mode, rng, tape, trace);
}

template <typename T>
Tensor<T> Network<T>::logits(const Tensor<T>& input, ShapeTrace* trace) const {
  return run(*this, input, Mode::Infer, nullptr, nullptr, trace);
}

template <typename T>
GradientSet<T> Network<T>::backward(const Tape<T>& tape, const Tensor<T>& grad_logits) const {
  if (tape.blocks.size() != blocks_.size()) throw ShapeError("tape does not match network");
  // Gradients are produced head-first and reordered at the end.
  auto dense = dense_backward(tape.flat, dense_weights_, grad_logits);
  const std::size_t n = tape.flat.dim(0);
  const auto last_filters = config_.block_filters().back();
  Tensor<T> gx = std::move(dense.x).reshaped(Shape{n, last_filters, tape.flat.dim(1) / last_filters});
  Tensor<T> gy;  // gradient w.r.t. the skip stream leaving the current block

  std::vector<GradientSet<T>> block_grads(blocks_.size());
  for (std::size_t bi = blocks_.size(); bi-- > 0;) {
    const auto& blk = blocks_[bi];
    const auto& bt = tape.blocks[bi];

    Tensor<T> g = relu_backward(bt.a2, dropout_backward(bt.mask2, gx));
    auto bn2 = batchnorm_backward(g, blk.bn2.gamma, bt.bn2);
    Tensor<T> g_sum = gy.empty() ? std::move(bn2.x) : add(bn2.x, gy);

    auto c2 = conv1d_backward(bt.h1, blk.conv2.kernel, g_sum, blk.conv2.stride);
    g = relu_backward(bt.a1, dropout_backward(bt.mask1, c2.x));
    auto bn1 = batchnorm_backward(g, blk.bn1.gamma, bt.bn1);
    auto c1 = conv1d_backward(bt.x_in, blk.conv1.kernel, bn1.x, blk.conv1.stride);

    Tensor<T> g_skip = std::move(g_sum);
    std::optional<Conv1dGrads<T>> cs;
    if (blk.skip) {
      cs = conv1d_backward(bt.skip_in, blk.skip->kernel, g_skip, 1);
      g_skip = std::move(cs->x);
    }
    Tensor<T> g_y_in = blk.downsample > 1
                           ? maxpool1d_backward(bt.y_in_shape, bt.pool_argmax, g_skip)
                           : std::move(g_skip);

    auto& out = block_grads[bi];
    push_conv_grads(out, c1);
    push_bn_grads(out, bn1);
    push_conv_grads(out, c2);
    push_bn_grads(out, bn2);
    if (cs) push_conv_grads(out, *cs);

    gx = std::move(c1.x);
    gy = std::move(g_y_in);
  }

  // Stem output feeds both streams of the first block.
  Tensor<T> g_stem = add(gx, gy);
  g_stem = relu_backward(tape.stem_a, g_stem);
  auto stem_bn = batchnorm_backward(g_stem, stem_bn_.gamma, tape.stem_bn);
  auto stem_conv = conv1d_backward(tape.input, stem_conv_.kernel, stem_bn.x, stem_conv_.stride,
                                   /*need_grad_x=*/false);

  GradientSet<T> grads;
  push_conv_grads(grads, stem_conv);
  push_bn_grads(grads, stem_bn);
  for (auto& bg : block_grads)
    for (auto& t : bg) grads.push_back(std::move(t));
  grads.push_back(std::move(dense.weights));
  grads.push_back(std::move(dense.bias));
  return grads;
}

template <typename T>
template <typename Self>
auto Network<T>::collect(Self& self, bool learnable) {
  using TensorT = std::conditional_t<std::is_const_v<Self>, const Tensor<T>, Tensor<T>>;
  std::vector<NamedTensor<TensorT>> out;
  auto conv = [&](const std::string& prefix, auto& c) {
    if (!learnable) return;
    out.push_back({prefix + ".kernel", &c.kernel});
    out.push_back({prefix + ".bias", &c.bias});
  };
  auto bn = [&](const std::string& prefix, auto& b) {
    if (learnable) {
      out.push_back({prefix + ".gamma", &b.gamma});
      out.push_back({prefix + ".beta", &b.beta});
    } else {
      out.push_back({prefix + ".running_mean", &b.running_mean});
      out.push_back({prefix + ".running_var", &b.running_var});
    }
  };
  conv("stem.conv", self.stem_conv_);
  bn("stem.bn", self.stem_bn_);
  for (std::size_t b = 0; b < self.blocks_.size(); ++b) {
    auto& blk = self.blocks_[b];
    const std::string p = "block" + std::to_string(b + 1);
    conv(p + ".conv1", blk.conv1);
    bn(p + ".bn1", blk.bn1);
    conv(p + ".conv2", blk.conv2);
    bn(p + ".bn2", blk.bn2);
    if (blk.skip) conv(p + ".skip", *blk.skip);
  }
  if (learnable) {
    out.push_back({"dense.weights", &self.dense_weights_});
    out.push_back({"dense.bias", &self.dense_bias_});
  }
  return out;
}

template <typename T>
std::vector<NamedTensor<Tensor<T>>> Network<T>::parameters() {
  return collect(*this, true);
}
template <typename T>
std::vector<NamedTensor<const Tensor<T>>> Network<T>::parameters() const {
  return collect(*this, true);
}
template <typename T>
std::vector<NamedTensor<Tensor<T>>> Network<T>::buffers() {
  return collect(*this, false);
}
template <typename T>
std::vector<NamedTensor<const Tensor<T>>> Network<T>::buffers() const {
  return collect(*this, false);
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor->size();
  return n;
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  Network<U> out;
  out.config_ = config_;
  out.stem_conv_ = cast_conv<T, U>(stem_conv_);
  out.stem_bn_ = cast_bn<T, U>(stem_bn_);
  for (const auto& b : blocks_) {
    ResidualBlock<U> nb;
    nb.conv1 = cast_conv<T, U>(b.conv1);
    nb.bn1 = cast_bn<T, U>(b.bn1);
    nb.conv2 = cast_conv<T, U>(b.conv2);
    nb.bn2 = cast_bn<T, U>(b.bn2);
    nb.downsample = b.downsample;
    if (b.skip) nb.skip = cast_conv<T, U>(*b.skip);
    out.blocks_.push_back(std::move(nb));
  }
  out.dense_weights_ = dense_weights_.template cast<U>();
  out.dense_bias_ = dense_bias_.template cast<U>();
  return out;
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template Network<float> Network<float>::cast<float>() const;

Tensor<float> make_batch(std::span<const NetworkInput* const> inputs) {
  if (inputs.empty()) throw ShapeError("empty batch");
  Tensor<float> batch(Shape{inputs.size(), kNumLeads, kWindowLength});
  const std::size_t stride = kNumLeads * kWindowLength;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    std::copy(inputs[i]->data.begin(), inputs[i]->data.end(),
              batch.ptr() + static_cast<std::ptrdiff_t>(i * stride));
  return batch;
}

Tensor<float> make_batch(std::span<const NetworkInput> inputs) {
  std::vector<const NetworkInput*> ptrs;
  ptrs.reserve(inputs.size());
  for (const auto& in : inputs) ptrs.push_back(&in);
  return make_batch(std::span<const NetworkInput* const>(ptrs));
}

std::vector<std::array<float, kNumClasses>> predict_all(const Model& model,
                                                        std::span<const NetworkInput> inputs,
                                                        std::size_t batch_size) {
  if (model.config().n_classes != kNumClasses)
    throw ShapeError("predict_all expects a six-class model");
  std::vector<std::array<float, kNumClasses>> out;
  out.reserve(inputs.size());
  for (std::size_t begin = 0; begin < inputs.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, inputs.size() - begin);
    const auto probs = model.predict(make_batch(inputs.subspan(begin, count)));
    for (std::size_t i = 0; i < count; ++i) {
      std::array<float, kNumClasses> row{};
      for (std::size_t c = 0; c < kNumClasses; ++c) row[c] = probs[i * kNumClasses + c];
      out.push_back(row);
    }
  }
  return out;
}

// ---- checkpoints ------------------------------------------------------------

namespace {

nlohmann::json config_to_json(const ArchitectureConfig& c) {
  return {{"n_residual_blocks", c.n_residual_blocks},
          {"kernel_length", c.kernel_length},
          {"initial_filters", c.initial_filters},
          {"filter_growth", c.filter_growth},
          {"growth_every", c.growth_every},
          {"subsample_factor", c.subsample_factor},
          {"dropout_rate", c.dropout_rate},
          {"n_classes", c.n_classes},
          {"input_channels", c.input_channels},
          {"input_length", c.input_length},
          {"bn_momentum", c.bn_momentum},
          {"bn_epsilon", c.bn_epsilon}};
}

ArchitectureConfig config_from_json(const nlohmann::json& j) {
  ArchitectureConfig c;
  c.n_residual_blocks = j.at("n_residual_blocks").get<std::size_t>();
  c.kernel_length = j.at("kernel_length").get<std::size_t>();
  c.initial_filters = j.at("initial_filters").get<std::size_t>();
  c.filter_growth = j.at("filter_growth").get<std::size_t>();
  c.growth_every = j.at("growth_every").get<std::size_t>();
  c.subsample_factor = j.at("subsample_factor").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.n_classes = j.at("n_classes").get<std::size_t>();
  c.input_channels = j.at("input_channels").get<std::size_t>();
  c.input_length = j.at("input_length").get<std::size_t>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.bn_epsilon = j.at("bn_epsilon").get<double>();
  return c;
}

void write_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64_le(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f32_le(std::string& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

float get_f32_le(const unsigned char* b) {
  const std::uint32_t u = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                          (static_cast<std::uint32_t>(b[2]) << 16) |
                          (static_cast<std::uint32_t>(b[3]) << 24);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path) {
  const Model& m = checkpoint.model;
  nlohmann::json arrays = nlohmann::json::array();
  std::string blob;
  std::size_t offset = 0;
  auto add_all = [&](const auto& named) {
    for (const auto& t : named) {
      arrays.push_back({{"name", t.name}, {"shape", t.tensor->shape()}, {"offset", offset}});
      for (float v : t.tensor->data()) put_f32_le(blob, v);
      offset += t.tensor->size();
    }
  };
  add_all(m.parameters());
  add_all(m.buffers());

  nlohmann::json header = {
      {"format_version", kCheckpointVersion},
      {"config", config_to_json(m.config())},
      {"arrays", arrays},
      {"thresholds", checkpoint.thresholds},
      {"training",
       {{"epoch", checkpoint.training.epoch},
        {"val_loss", checkpoint.training.val_loss},
        {"seed", checkpoint.training.seed}}},
      {"blob_floats", offset}};
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  write_u64_le(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CorruptCheckpoint("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t magic_len = kCheckpointMagic.size();
  if (bytes.size() < magic_len + 8 || bytes.compare(0, magic_len, kCheckpointMagic) != 0)
    throw CorruptCheckpoint(path.string() + ": bad magic");
  const std::uint64_t header_len = read_u64_le(raw + magic_len);
  const std::size_t header_begin = magic_len + 8;
  if (header_len > bytes.size() - header_begin)
    throw CorruptCheckpoint(path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(header_begin, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(path.string() + ": unreadable header: " + e.what());
  }

  ModelCheckpoint ck;
  try {
    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointVersion)
      throw UnsupportedVersion(path.string() + ": checkpoint format version " +
                               std::to_string(version) + ", expected " +
                               std::to_string(kCheckpointVersion));
    const auto config = config_from_json(header.at("config"));
    ck.model = Model::build(config, 0);
    ck.thresholds = header.at("thresholds").get<std::array<double, kNumClasses>>();
    const auto& tr = header.at("training");
    ck.training = {tr.at("epoch").get<int>(), tr.at("val_loss").get<double>(),
                   tr.at("seed").get<std::uint64_t>()};

    const std::size_t blob_begin = header_begin + header_len;
    const std::size_t blob_floats = header.at("blob_floats").get<std::size_t>();
    if (bytes.size() - blob_begin != blob_floats * 4)
      throw CorruptCheckpoint(path.string() + ": truncated parameter blob");

    std::map<std::string, const nlohmann::json*> by_name;
    for (const auto& a : header.at("arrays")) by_name[a.at("name").get<std::string>()] = &a;
    auto load_all = [&](std::vector<NamedTensor<Tensor<float>>> named) {
      for (auto& t : named) {
        const auto it = by_name.find(t.name);
        if (it == by_name.end()) throw CorruptCheckpoint(path.string() + ": missing " + t.name);
        const auto& a = *it->second;
        if (a.at("shape").get<Shape>() != t.tensor->shape())
          throw CorruptCheckpoint(path.string() + ": shape mismatch for " + t.name);
        const std::size_t off = a.at("offset").get<std::size_t>();
        if (off + t.tensor->size() > blob_floats)
          throw CorruptCheckpoint(path.string() + ": array out of range: " + t.name);
        for (std::size_t i = 0; i < t.tensor->size(); ++i)
          (*t.tensor)[i] = get_f32_le(raw + blob_begin + 4 * (off + i));
      }
    };
    load_all(ck.model.parameters());
    load_all(ck.model.buffers());
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(path.string() + ": malformed header: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CorruptCheckpoint(path.string() + ": " + e.what());
  }
  return ck;
}

}  // namespace ecgdnn
