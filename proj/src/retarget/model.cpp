#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "phonosynth/errors.hpp"
#include "phonosynth/hash.hpp"
#include "phonosynth/retarget.hpp"

namespace phonosynth {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'R', 'T', 'M', 'D', 'L', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) throw SchemaError("/", "truncated model checkpoint");
    char buf[sizeof(T)];
    std::memcpy(buf, data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }
  std::string_view take(std::size_t n) {
    if (pos_ + n > data_.size()) throw SchemaError("/", "truncated model checkpoint");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

// Row-major little-endian f32 for every tensor in layer order.
std::string weight_bytes(const NetworkParams<float>& p) {
  std::string out;
  out.reserve(p.size() * sizeof(float));
  for (int l = 0; l < kLayers; ++l) {
    const auto& w = p.w[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) put(out, w(r, c));
    }
    for (Eigen::Index r = 0; r < p.b[l].size(); ++r) put(out, p.b[l](r));
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (hidden < 1) throw Error("hidden width must be >= 1");
  if (history < 0) throw Error("history must be >= 0");
  if (window < 1) throw Error("window length must be >= 1");
  for (double r : dropout.rate) {
    if (!(r >= 0.0 && r < 1.0)) throw Error("dropout rates must lie in [0, 1)");
  }
  if (!(lambda >= 0.0)) throw Error("lambda must be >= 0");
  if (!(output_init_scale >= 0.0)) throw Error("output_init_scale must be >= 0");
}

RetargetModel::RetargetModel(ModelConfig cfg, Network<float> net) : config_(std::move(cfg)), net_(std::move(net)) {
  config_.validate();
  if (!(net_.shape() == config_.shape())) throw ShapeError("network shape does not match model config");
}

RetargetModel RetargetModel::zeros(const ModelConfig& cfg) {
  cfg.validate();
  return RetargetModel(cfg, Network<float>(cfg.shape(), NetworkParams<float>::zeros(cfg.shape())));
}

RetargetModel RetargetModel::initialize(const ModelConfig& cfg) {
  cfg.validate();
  NetworkParams<float> p = NetworkParams<float>::zeros(cfg.shape());
  std::mt19937_64 rng(cfg.seed);
  for (int l = 0; l < kLayers; ++l) {
    const double fan_in = static_cast<double>(p.w[l].cols());
    const double fan_out = static_cast<double>(p.w[l].rows());
    const double stddev = l < kHiddenLayers ? std::sqrt(2.0 / fan_in)
                                            : cfg.output_init_scale * std::sqrt(2.0 / (fan_in + fan_out));
    if (stddev == 0.0) continue;
    std::normal_distribution<double> dist(0.0, stddev);
    for (Eigen::Index k = 0; k < p.w[l].size(); ++k) p.w[l].data()[k] = static_cast<float>(dist(rng));
  }
  return RetargetModel(cfg, Network<float>(cfg.shape(), std::move(p)));
}

std::uint64_t RetargetModel::checksum() const { return fnv1a64(weight_bytes(net_.params())); }

std::string RetargetModel::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(kExpressionDim));
  put(out, static_cast<std::uint32_t>(config_.hidden));
  put(out, static_cast<std::uint32_t>(config_.history));
  put(out, static_cast<std::uint32_t>(config_.window));
  for (double r : config_.dropout.rate) put(out, r);
  put(out, config_.lambda);
  put(out, config_.seed);
  put(out, config_.output_init_scale);
  out += weight_bytes(net_.params());
  return out;
}

RetargetModel RetargetModel::deserialize(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw SchemaError("/", "not a retargeting model checkpoint");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) throw SchemaError("/version", "unsupported checkpoint version " + std::to_string(version));
  if (in.get<std::uint32_t>() != kExpressionDim) throw SchemaError("/dim", "expression dimension must be 64");
  ModelConfig cfg;
  cfg.hidden = static_cast<int>(in.get<std::uint32_t>());
  cfg.history = static_cast<int>(in.get<std::uint32_t>());
  cfg.window = static_cast<int>(in.get<std::uint32_t>());
  for (double& r : cfg.dropout.rate) r = in.get<double>();
  cfg.lambda = in.get<double>();
  cfg.seed = in.get<std::uint64_t>();
  cfg.output_init_scale = in.get<double>();
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw SchemaError("/config", e.what());
  }
  NetworkParams<float> p = NetworkParams<float>::zeros(cfg.shape());
  for (int l = 0; l < kLayers; ++l) {
    auto& w = p.w[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = in.get<float>();
    }
    for (Eigen::Index r = 0; r < p.b[l].size(); ++r) p.b[l](r) = in.get<float>();
  }
  if (!in.done()) throw SchemaError("/", "trailing bytes after model weights");
  return RetargetModel(cfg, Network<float>(cfg.shape(), std::move(p)));
}

void RetargetModel::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

RetargetModel RetargetModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace phonosynth
