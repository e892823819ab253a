#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "phonosynth/correspondence.hpp"
#include "phonosynth/expression.hpp"
#include "phonosynth/network.hpp"

namespace phonosynth {

struct ModelConfig {
  int hidden = 1024;
  int history = 2;  // H
  int window = 7;   // T
  DropoutRates dropout;
  double lambda = 10.0;  // set by train() from TrainConfig
  std::uint64_t seed = 1;
  // Output layer weights are drawn with this multiple of the Glorot scale;
  // 0 starts from the identity map.
  double output_init_scale = 0.1;

  void validate() const;
  NetworkShape shape() const { return {static_cast<int>(kExpressionDim), hidden, history}; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

class RetargetModel {
 public:
  // He-initialized hidden layers, zero biases, small output layer.
  static RetargetModel initialize(const ModelConfig& cfg);
  // All weights zero: the identity map.
  static RetargetModel zeros(const ModelConfig& cfg);

  RetargetModel() = default;
  RetargetModel(ModelConfig cfg, Network<float> net);

  const ModelConfig& config() const { return config_; }
  ModelConfig& config() { return config_; }
  const Network<float>& network() const { return net_; }
  Network<float>& network() { return net_; }

  // FNV-1a 64 over the little-endian weight bytes in checkpoint order.
  std::uint64_t checksum() const;

  std::string serialize() const;
  static RetargetModel deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static RetargetModel load(const std::filesystem::path& path);

  friend bool operator==(const RetargetModel& a, const RetargetModel& b) {
    return a.config_ == b.config_ && a.serialize() == b.serialize();
  }

 private:
  ModelConfig config_;
  Network<float> net_;
};

struct EpochReport {
  int epoch = 0;  // 0-based
  double mean_loss = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
  std::size_t windows = 0;
  const RetargetModel* model = nullptr;  // weights after this epoch
};

struct TrainConfig {
  double learning_rate = 2e-4;
  double decay_rate = 0.5;
  int decay_period = 30;  // epochs between decays
  double clip_norm = 5.0;
  std::size_t batch_size = 100;
  int max_epochs = 100;
  double lambda = 10.0;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Called after every epoch; returning false stops training.
  std::function<bool(const EpochReport&)> on_epoch;

  void validate() const;
  double rate_at(int epoch) const;
};

struct TrainResult {
  RetargetModel model;
  std::vector<double> loss_history;  // mean window loss per epoch
};

// A length-T slice of one correspondence pair.
struct WindowRef {
  std::size_t pair = 0;
  std::size_t offset = 0;
};

// Every length-T slide over every pair.
std::vector<WindowRef> training_windows(const std::vector<CorrespondencePair>& pairs, int window);

// Scales `grads` in place so their global L2 norm is at most `max_norm`;
// returns the norm before clipping.
double clip_global_norm(NetworkParams<float>& grads, double max_norm);

// Adam on minibatches of windows, reshuffled every epoch, with global-norm
// clipping and stepwise exponential learning-rate decay. Throws
// TrainingError on a non-finite loss.
TrainResult train(const std::vector<CorrespondencePair>& pairs, RetargetModel model, const TrainConfig& cfg);

// Mean training loss of `model` over the given windows in eval mode.
double evaluate_loss(const RetargetModel& model, const std::vector<CorrespondencePair>& pairs,
                     const std::vector<WindowRef>& windows, double lambda);

// Sliding-window inference: each output frame is the mean of the
// predictions of every length-T window covering it. Tracks shorter than T
// are run as a single window.
ExpressionTrack infer(const RetargetModel& model, const ExpressionTrack& source);

}  // namespace phonosynth
