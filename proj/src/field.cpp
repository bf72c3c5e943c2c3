// SPDX-License-Identifier: Apache-2.0

#include "lidarfield/field.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "lidarfield/random.hpp"

namespace lidarfield {

int FieldLayout::layer_input_dim(std::size_t layer) const {
  int dim = layer == 0 ? input_dim() : hidden[layer - 1];
  if (layer != 0 && static_cast<int>(layer) == skip_layer) dim += input_dim();
  return dim;
}

std::size_t FieldLayout::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    n += static_cast<std::size_t>(hidden[l]) * (layer_input_dim(l) + 1);
  }
  const int head_in = hidden.empty() ? input_dim() : hidden.back();
  return n + static_cast<std::size_t>(head_in) + 1;
}

void FieldLayout::validate() const {
  if (enc_levels < 0) throw ConfigError("encoding levels must be >= 0");
  for (int w : hidden) {
    if (w <= 0) throw ConfigError("hidden layer widths must be positive");
  }
  if (skip_layer >= static_cast<int>(hidden.size())) throw ConfigError("skip layer index out of range");
}

std::vector<double> positional_encode(const Vec3& x, int levels) {
  const Eigen::MatrixXd enc = positional_encode(Eigen::Matrix3Xd(x), levels);
  return std::vector<double>(enc.data(), enc.data() + enc.size());
}

Eigen::MatrixXd positional_encode(const Eigen::Matrix3Xd& x, int levels) {
  Eigen::MatrixXd out(3 + 6 * levels, x.cols());
  out.topRows<3>() = x;
  if (levels == 0) return out;
  // Higher octaves by the double-angle recurrence; one sin/cos per coordinate.
  Eigen::Array3Xd s = (std::numbers::pi * x.array()).sin();
  Eigen::Array3Xd c = (std::numbers::pi * x.array()).cos();
  for (int k = 0; k < levels; ++k) {
    out.middleRows<3>(3 + 6 * k) = s.matrix();
    out.middleRows<3>(6 + 6 * k) = c.matrix();
    if (k + 1 < levels) {
      Eigen::Array3Xd s2 = 2.0 * s * c;
      c = (c - s) * (c + s);
      s = std::move(s2);
    }
  }
  return out;
}

SceneNormalizer SceneNormalizer::for_box(const Aabb& box) {
  SceneNormalizer n;
  n.center = box.center();
  n.half_extent = (0.5 * box.extent()).cwiseMax(Vec3::Constant(1e-9));
  return n;
}

Vec3 SceneNormalizer::apply(const Vec3& world) const {
  return ((world - center).cwiseQuotient(half_extent)).cwiseMax(Vec3::Constant(-1.0)).cwiseMin(Vec3::Ones());
}

Eigen::Matrix3Xd SceneNormalizer::apply(const Eigen::Matrix3Xd& world) const {
  Eigen::Matrix3Xd out = (world.colwise() - center).array().colwise() / half_extent.array();
  return out.cwiseMax(-1.0).cwiseMin(1.0);
}

double softplus(double x) { return x > 20.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

FieldModel::FieldModel(FieldLayout layout) : layout_(std::move(layout)) {
  layout_.validate();
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout_.param_count()));
  std::size_t offset = 0;
  for (std::size_t l = 0; l <= layout_.hidden.size(); ++l) {
    offsets_.push_back(offset);
    const int in = l < layout_.hidden.size() ? layout_.layer_input_dim(l)
                                             : (layout_.hidden.empty() ? layout_.input_dim() : layout_.hidden.back());
    const int out = l < layout_.hidden.size() ? layout_.hidden[l] : 1;
    offset += static_cast<std::size_t>(out) * (in + 1);
  }
}

FieldModel FieldModel::initialized(FieldLayout layout, std::uint64_t seed) {
  FieldModel model(std::move(layout));
  Rng rng(seed);
  for (std::size_t l = 0; l <= model.layout_.hidden.size(); ++l) {
    const LayerView view = model.layer(l);
    const double bound = std::sqrt(6.0 / static_cast<double>(view.weight.cols()));
    double* w = model.params_.data() + model.offsets_[l];
    for (Eigen::Index i = 0; i < view.weight.size(); ++i) w[i] = rng.uniform(-bound, bound);
  }
  return model;
}

std::size_t FieldModel::layer_offset(std::size_t index) const { return offsets_[index]; }

FieldModel::LayerView FieldModel::layer(std::size_t index) const {
  const bool head = index == layout_.hidden.size();
  const int in = head ? (layout_.hidden.empty() ? layout_.input_dim() : layout_.hidden.back())
                      : layout_.layer_input_dim(index);
  const int out = head ? 1 : layout_.hidden[index];
  const double* base = params_.data() + offsets_[index];
  return LayerView{Eigen::Map<const Eigen::MatrixXd>(base, out, in),
                   Eigen::Map<const Eigen::VectorXd>(base + static_cast<std::size_t>(out) * in, out)};
}

Eigen::VectorXd FieldModel::forward(const Eigen::Matrix3Xd& normalized, ForwardCache* cache) const {
  const Eigen::MatrixXd enc = positional_encode(normalized, layout_.enc_levels);
  Eigen::MatrixXd h = enc;
  if (cache) {
    cache->layer_inputs.clear();
    cache->pre_activations.clear();
  }
  for (std::size_t l = 0; l < layout_.hidden.size(); ++l) {
    if (static_cast<int>(l) == layout_.skip_layer && l != 0) {
      Eigen::MatrixXd joined(h.rows() + enc.rows(), h.cols());
      joined << h, enc;
      h = std::move(joined);
    }
    const LayerView view = layer(l);
    Eigen::MatrixXd z = view.weight * h;
    z.colwise() += view.bias;
    if (cache) {
      cache->layer_inputs.push_back(std::move(h));
      h = z.cwiseMax(0.0);
      cache->pre_activations.push_back(std::move(z));
    } else {
      h = z.cwiseMax(0.0);
    }
  }
  const LayerView head = layer(layout_.hidden.size());
  Eigen::RowVectorXd raw = head.weight * h;
  raw.array() += head.bias[0];
  Eigen::VectorXd sigma(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) sigma[i] = softplus(raw[i]);
  if (cache) {
    cache->layer_inputs.push_back(std::move(h));
    cache->raw = std::move(raw);
  }
  return sigma;
}

void FieldModel::backward(const ForwardCache& cache, const Eigen::VectorXd& d_sigma, Eigen::VectorXd& grad) const {
  const std::size_t n_hidden = layout_.hidden.size();
  Eigen::RowVectorXd d_raw(d_sigma.size());
  for (Eigen::Index i = 0; i < d_sigma.size(); ++i) d_raw[i] = d_sigma[i] * sigmoid(cache.raw[i]);

  {
    const LayerView head = layer(n_hidden);
    const Eigen::MatrixXd& in = cache.layer_inputs[n_hidden];
    double* g = grad.data() + offsets_[n_hidden];
    Eigen::Map<Eigen::MatrixXd>(g, 1, in.rows()).noalias() += d_raw * in.transpose();
    g[in.rows()] += d_raw.sum();
    if (n_hidden == 0) return;
    Eigen::MatrixXd d_h = head.weight.transpose() * d_raw;

    for (std::size_t l = n_hidden; l-- > 0;) {
      const LayerView view = layer(l);
      const Eigen::MatrixXd& z = cache.pre_activations[l];
      const Eigen::MatrixXd& x = cache.layer_inputs[l];
      const Eigen::MatrixXd d_z = (z.array() > 0.0).select(d_h, 0.0);
      double* gl = grad.data() + offsets_[l];
      Eigen::Map<Eigen::MatrixXd>(gl, view.weight.rows(), view.weight.cols()).noalias() += d_z * x.transpose();
      Eigen::Map<Eigen::VectorXd>(gl + view.weight.size(), view.bias.size()) += d_z.rowwise().sum();
      if (l == 0) break;
      Eigen::MatrixXd d_x = view.weight.transpose() * d_z;
      if (static_cast<int>(l) == layout_.skip_layer) {
        d_h = d_x.topRows(layout_.hidden[l - 1]);
      } else {
        d_h = std::move(d_x);
      }
    }
  }
}

double density_at(const FieldModel& model, const Vec3& x_world, const SceneNormalizer& norm) {
  return model.forward(Eigen::Matrix3Xd(norm.apply(x_world)))[0];
}

OptimizerState OptimizerState::fresh(std::size_t n_params, double base_lr, AdamConfig config) {
  OptimizerState s;
  s.m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params));
  s.v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params));
  s.config = config;
  s.base_lr = base_lr;
  return s;
}

void adam_step(OptimizerState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  if (grad.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ValidationError("adam_step: parameter, gradient and moment sizes differ");
  }
  if (!grad.allFinite()) throw NumericalError("adam_step: non-finite gradient");
  const AdamConfig& c = state.config;
  const std::int64_t t = state.step + 1;
  Eigen::VectorXd m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
  Eigen::VectorXd v = c.beta2 * state.v + (1.0 - c.beta2) * grad.cwiseAbs2();
  const double m_scale = 1.0 / (1.0 - std::pow(c.beta1, static_cast<double>(t)));
  const double v_scale = 1.0 / (1.0 - std::pow(c.beta2, static_cast<double>(t)));
  Eigen::VectorXd update =
      -lr * (m * m_scale).array() / ((v * v_scale).array().sqrt() + c.epsilon);
  if (!update.allFinite()) throw NumericalError("adam_step: non-finite update");
  params += update;
  state.m = std::move(m);
  state.v = std::move(v);
  state.step = t;
}

double lr_at(int epoch, double base) {
  if (epoch < 5) return base;
  if (epoch < 120) return base * 0.1;
  return base * 0.01;
}

namespace {

constexpr char kMagic[8] = {'L', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};

class ByteWriter {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::byte*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_vector(const Eigen::VectorXd& v) {
    const auto* p = reinterpret_cast<const std::byte*>(v.data());
    bytes.insert(bytes.end(), p, p + sizeof(double) * static_cast<std::size_t>(v.size()));
  }
  std::vector<std::byte> bytes;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> b) : bytes_(b) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  Eigen::VectorXd get_vector(std::size_t n) {
    need(n * sizeof(double));
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(std::span<const std::byte> bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::vector<std::byte> serialize_checkpoint(const Checkpoint& ckpt, std::uint32_t version) {
  ByteWriter w;
  for (char c : kMagic) w.put(c);
  w.put(version);
  const FieldLayout& layout = ckpt.model.layout();
  w.put(static_cast<std::int32_t>(layout.enc_levels));
  w.put(static_cast<std::int32_t>(layout.skip_layer));
  w.put(static_cast<std::uint32_t>(layout.hidden.size()));
  for (int width : layout.hidden) w.put(static_cast<std::int32_t>(width));
  for (int i = 0; i < 3; ++i) w.put(ckpt.normalizer.center[i]);
  for (int i = 0; i < 3; ++i) w.put(ckpt.normalizer.half_extent[i]);
  w.put(static_cast<std::uint64_t>(ckpt.model.param_count()));
  w.put_vector(ckpt.model.params());
  const OptimizerState& opt = ckpt.optimizer;
  const bool has_moments = opt.m.size() == ckpt.model.params().size();
  w.put(static_cast<std::uint8_t>(has_moments));
  if (has_moments) {
    w.put_vector(opt.m);
    w.put_vector(opt.v);
  }
  w.put(static_cast<std::int64_t>(opt.step));
  w.put(opt.config.beta1);
  w.put(opt.config.beta2);
  w.put(opt.config.epsilon);
  w.put(opt.base_lr);
  w.put(static_cast<std::int32_t>(ckpt.epoch));
  w.put(fnv1a(w.bytes));
  return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  for (char expected : kMagic) {
    if (r.get<char>() != expected) throw FormatError("not a checkpoint file (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " does not match supported version " +
                      std::to_string(kCheckpointVersion));
  }
  FieldLayout layout;
  layout.enc_levels = r.get<std::int32_t>();
  layout.skip_layer = r.get<std::int32_t>();
  const auto n_hidden = r.get<std::uint32_t>();
  if (n_hidden > 1024) throw FormatError("checkpoint layout is corrupt");
  layout.hidden.resize(n_hidden);
  for (auto& width : layout.hidden) width = r.get<std::int32_t>();
  try {
    layout.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint layout is corrupt: ") + e.what());
  }
  Checkpoint ckpt;
  for (int i = 0; i < 3; ++i) ckpt.normalizer.center[i] = r.get<double>();
  for (int i = 0; i < 3; ++i) ckpt.normalizer.half_extent[i] = r.get<double>();
  const auto n_params = r.get<std::uint64_t>();
  if (n_params != layout.param_count()) throw FormatError("checkpoint parameter count does not match its layout");
  ckpt.model = FieldModel(layout);
  ckpt.model.params() = r.get_vector(n_params);
  if (r.get<std::uint8_t>() != 0) {
    ckpt.optimizer.m = r.get_vector(n_params);
    ckpt.optimizer.v = r.get_vector(n_params);
  }
  ckpt.optimizer.step = r.get<std::int64_t>();
  ckpt.optimizer.config.beta1 = r.get<double>();
  ckpt.optimizer.config.beta2 = r.get<double>();
  ckpt.optimizer.config.epsilon = r.get<double>();
  ckpt.optimizer.base_lr = r.get<double>();
  ckpt.epoch = r.get<std::int32_t>();
  const std::size_t payload = r.pos();
  const auto checksum = r.get<std::uint64_t>();
  if (checksum != fnv1a(bytes.first(payload))) throw FormatError("checkpoint checksum mismatch");
  if (r.remaining() != 0) throw FormatError("checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(std::as_bytes(std::span<const char>(raw)));
}

}  // namespace lidarfield
