#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "phonosynth/errors.hpp"
#include "phonosynth/retarget.hpp"

namespace phonosynth {

using Matrix = Network<float>::Matrix;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
  if (!(decay_rate > 0.0)) throw Error("decay_rate must be positive");
  if (decay_period < 1) throw Error("decay_period must be >= 1");
  if (!(clip_norm > 0.0)) throw Error("clip_norm must be positive");
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (max_epochs < 1) throw Error("max_epochs must be >= 1");
  if (!(lambda >= 0.0)) throw Error("lambda must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw Error("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
}

double TrainConfig::rate_at(int epoch) const {
  return learning_rate * std::pow(decay_rate, static_cast<double>(epoch / decay_period));
}

std::vector<WindowRef> training_windows(const std::vector<CorrespondencePair>& pairs, int window) {
  if (window < 1) throw Error("window length must be >= 1");
  const auto T = static_cast<std::size_t>(window);
  std::vector<WindowRef> out;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (pairs[p].source.size() != pairs[p].target.size()) throw ShapeError("pair source/target length mismatch");
    if (pairs[p].source.size() < T) continue;
    for (std::size_t o = 0; o + T <= pairs[p].source.size(); ++o) out.push_back({p, o});
  }
  return out;
}

double clip_global_norm(NetworkParams<float>& grads, double max_norm) {
  double sq = 0.0;
  grads.for_each_tensor([&](const float* g, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) sq += static_cast<double>(g[k]) * static_cast<double>(g[k]);
  });
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const auto scale = static_cast<float>(max_norm / norm);
    grads.for_each_tensor([&](float* g, std::size_t n) {
      for (std::size_t k = 0; k < n; ++k) g[k] *= scale;
    });
  }
  return norm;
}

namespace {

void gather(const std::vector<CorrespondencePair>& pairs, std::span<const WindowRef> batch, std::size_t T,
            std::vector<Matrix>& s, std::vector<Matrix>& t) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto d = static_cast<Eigen::Index>(kExpressionDim);
  s.assign(T, Matrix(d, B));
  t.assign(T, Matrix(d, B));
  for (Eigen::Index c = 0; c < B; ++c) {
    const WindowRef& w = batch[static_cast<std::size_t>(c)];
    const CorrespondencePair& p = pairs[w.pair];
    for (std::size_t i = 0; i < T; ++i) {
      s[i].col(c) = Eigen::Map<const Eigen::VectorXf>(p.source[w.offset + i].values.data(), d);
      t[i].col(c) = Eigen::Map<const Eigen::VectorXf>(p.target[w.offset + i].values.data(), d);
    }
  }
}

struct Adam {
  NetworkParams<float> m, v;
  long step = 0;

  explicit Adam(const NetworkShape& shape)
      : m(NetworkParams<float>::zeros(shape)), v(NetworkParams<float>::zeros(shape)) {}

  void update(NetworkParams<float>& params, NetworkParams<float>& grads, const TrainConfig& cfg, double lr) {
    ++step;
    const auto b1 = static_cast<float>(cfg.beta1);
    const auto b2 = static_cast<float>(cfg.beta2);
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    const auto step_size = static_cast<float>(lr * std::sqrt(c2) / c1);
    const auto eps = static_cast<float>(cfg.epsilon * std::sqrt(c2));
    auto apply = [&](auto& p, auto& g, auto& mm, auto& vv) {
      auto pa = p.array();
      auto ga = g.array();
      auto ma = mm.array();
      auto va = vv.array();
      ma = b1 * ma + (1.0f - b1) * ga;
      va = b2 * va + (1.0f - b2) * ga.square();
      pa -= step_size * ma / (va.sqrt() + eps);
    };
    for (int l = 0; l < kLayers; ++l) {
      apply(params.w[l], grads.w[l], m.w[l], v.w[l]);
      apply(params.b[l], grads.b[l], m.b[l], v.b[l]);
    }
  }
};

}  // namespace

TrainResult train(const std::vector<CorrespondencePair>& pairs, RetargetModel model, const TrainConfig& cfg) {
  cfg.validate();
  model.config().lambda = cfg.lambda;
  const ModelConfig& mc = model.config();
  const auto T = static_cast<std::size_t>(mc.window);
  const std::vector<WindowRef> windows = training_windows(pairs, mc.window);
  if (windows.empty()) {
    throw TrainingError("no training windows: every correspondence pair is shorter than " + std::to_string(T) +
                        " frames");
  }

  Network<float>& net = model.network();
  NetworkParams<float> grads = NetworkParams<float>::zeros(net.shape());
  Adam adam(net.shape());
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

  std::vector<std::size_t> order(windows.size());
  std::vector<WindowRef> batch;
  std::vector<Matrix> s, t, dy;
  Network<float>::Cache cache;
  TrainResult result;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = cfg.rate_at(epoch);
    double loss_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(windows[order[k]]);
      gather(pairs, batch, T, s, t);

      const auto y = net.forward(s, &mc.dropout, &dropout_rng, &cache);
      const LossTerms<float> terms = window_loss<float>(y, t, cfg.lambda, &dy);
      if (!std::isfinite(terms.total())) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << batch_no << " (data " << terms.data
            << ", regularizer " << terms.regularizer << ", learning rate " << lr << ")";
        throw TrainingError(msg.str());
      }
      grads.set_zero();
      net.backward(cache, std::move(dy), grads);
      const double norm = clip_global_norm(grads, cfg.clip_norm);
      if (!std::isfinite(norm)) {
        throw TrainingError("non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_no));
      }
      adam.update(net.params(), grads, cfg, lr);
      loss_sum += static_cast<double>(terms.total()) * static_cast<double>(batch.size());
    }
    const double mean = loss_sum / static_cast<double>(windows.size());
    result.loss_history.push_back(mean);
    if (cfg.on_epoch) {
      EpochReport rep;
      rep.epoch = epoch;
      rep.mean_loss = mean;
      rep.learning_rate = lr;
      rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rep.windows = windows.size();
      rep.model = &model;
      if (!cfg.on_epoch(rep)) break;
    }
  }
  result.model = std::move(model);
  return result;
}

double evaluate_loss(const RetargetModel& model, const std::vector<CorrespondencePair>& pairs,
                     const std::vector<WindowRef>& windows, double lambda) {
  if (windows.empty()) return 0.0;
  const auto T = static_cast<std::size_t>(model.config().window);
  std::vector<Matrix> s, t;
  double sum = 0.0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    const std::size_t end = std::min(windows.size(), start + kChunk);
    const std::span<const WindowRef> chunk(windows.data() + start, end - start);
    gather(pairs, chunk, T, s, t);
    const auto y = model.network().forward(s);
    sum += static_cast<double>(window_loss<float>(y, t, lambda).total()) * static_cast<double>(chunk.size());
  }
  return sum / static_cast<double>(windows.size());
}

}  // namespace phonosynth
