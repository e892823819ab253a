#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "phonosynth/errors.hpp"

namespace phonosynth {

struct NetworkShape {
  int dim = 64;        // expression coefficients per frame
  int hidden = 1024;   // units per hidden layer
  int history = 2;     // H: previous inputs and outputs fed back

  int input_dim() const { return (2 * history + 1) * dim; }
  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

inline constexpr int kHiddenLayers = 3;
inline constexpr int kLayers = kHiddenLayers + 1;

// Weights of the recurrent unit: three ReLU layers and a linear output layer
// whose result is added to the current input frame.
template <typename S>
struct NetworkParams {
  using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  std::array<Matrix, kLayers> w;
  std::array<Vector, kLayers> b;

  static NetworkParams zeros(const NetworkShape& shape) {
    NetworkParams p;
    const int in[kLayers] = {shape.input_dim(), shape.hidden, shape.hidden, shape.hidden};
    const int out[kLayers] = {shape.hidden, shape.hidden, shape.hidden, shape.dim};
    for (int l = 0; l < kLayers; ++l) {
      p.w[l] = Matrix::Zero(out[l], in[l]);
      p.b[l] = Vector::Zero(out[l]);
    }
    return p;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (int l = 0; l < kLayers; ++l) n += static_cast<std::size_t>(w[l].size() + b[l].size());
    return n;
  }

  // Calls f(data, count) for every tensor in checkpoint order (w0, b0, w1, ...).
  template <typename F>
  void for_each_tensor(F&& f) {
    for (int l = 0; l < kLayers; ++l) {
      f(w[l].data(), static_cast<std::size_t>(w[l].size()));
      f(b[l].data(), static_cast<std::size_t>(b[l].size()));
    }
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    for (int l = 0; l < kLayers; ++l) {
      f(w[l].data(), static_cast<std::size_t>(w[l].size()));
      f(b[l].data(), static_cast<std::size_t>(b[l].size()));
    }
  }

  void set_zero() {
    for (int l = 0; l < kLayers; ++l) {
      w[l].setZero();
      b[l].setZero();
    }
  }

  template <typename T>
  NetworkParams<T> cast() const {
    NetworkParams<T> p;
    for (int l = 0; l < kLayers; ++l) {
      p.w[l] = w[l].template cast<T>();
      p.b[l] = b[l].template cast<T>();
    }
    return p;
  }
};

struct DropoutRates {
  std::array<double, kHiddenLayers> rate{0.25, 0.5, 0.25};
  friend bool operator==(const DropoutRates&, const DropoutRates&) = default;
};

template <typename S>
struct LossTerms {
  S data = 0;
  S regularizer = 0;  // already multiplied by lambda
  S total() const { return data + regularizer; }
};

// The unrolled recurrent unit. A window is a vector of T matrices of shape
// dim x B, one column per window in the batch; step i sees
// [s_i, s_{i-1}..s_{i-H}, y_{i-1}..y_{i-H}] with zeros before the window.
template <typename S>
class Network {
 public:
  using Matrix = typename NetworkParams<S>::Matrix;
  using Vector = typename NetworkParams<S>::Vector;
  using Window = std::vector<Matrix>;

  struct Step {
    Matrix x;
    std::array<Matrix, kHiddenLayers> z;
    std::array<Matrix, kHiddenLayers> h;
    std::array<Matrix, kHiddenLayers> mask;  // empty without dropout
  };
  struct Cache {
    std::vector<Step> steps;
  };

  Network() = default;
  Network(NetworkShape shape, NetworkParams<S> params) : shape_(shape), params_(std::move(params)) {
    check_shapes();
  }

  const NetworkShape& shape() const { return shape_; }
  NetworkParams<S>& params() { return params_; }
  const NetworkParams<S>& params() const { return params_; }

  // With `dropout` and `rng` set, each hidden layer output is zeroed with the
  // layer's rate and survivors scaled by 1 / (1 - rate).
  Window forward(const Window& s, const DropoutRates* dropout = nullptr, std::mt19937_64* rng = nullptr,
                 Cache* cache = nullptr) const {
    if (s.empty()) throw ShapeError("empty window");
    const Eigen::Index batch = s[0].cols();
    const int d = shape_.dim;
    const int hist = shape_.history;
    for (const Matrix& m : s) {
      if (m.rows() != d || m.cols() != batch) throw ShapeError("window frame has wrong shape");
    }
    const std::size_t T = s.size();
    Window y(T);
    if (cache) cache->steps.assign(T, Step{});
    Step local;
    for (std::size_t i = 0; i < T; ++i) {
      Step& st = cache ? cache->steps[i] : local;
      st.x.setZero(shape_.input_dim(), batch);
      st.x.topRows(d) = s[i];
      for (int k = 1; k <= hist; ++k) {
        if (i < static_cast<std::size_t>(k)) break;
        st.x.middleRows(k * d, d) = s[i - static_cast<std::size_t>(k)];
        st.x.middleRows((hist + k) * d, d) = y[i - static_cast<std::size_t>(k)];
      }
      const Matrix* in = &st.x;
      for (int l = 0; l < kHiddenLayers; ++l) {
        st.z[l].noalias() = params_.w[l] * (*in);
        st.z[l].colwise() += params_.b[l];
        st.h[l] = st.z[l].cwiseMax(S(0));
        if (dropout && rng) {
          st.mask[l] = draw_mask(st.h[l].rows(), batch, dropout->rate[static_cast<std::size_t>(l)], *rng);
          st.h[l].array() *= st.mask[l].array();
        } else {
          st.mask[l].resize(0, 0);
        }
        in = &st.h[l];
      }
      y[i].noalias() = params_.w[kHiddenLayers] * (*in);
      y[i].colwise() += params_.b[kHiddenLayers];
      y[i] += s[i];
    }
    return y;
  }

  // Accumulates into `grad` the gradient of a loss whose derivative with
  // respect to each output y_i is dy[i] (the feedback paths are added here).
  void backward(const Cache& cache, Window dy, NetworkParams<S>& grad) const {
    const std::size_t T = cache.steps.size();
    if (dy.size() != T) throw ShapeError("gradient window length mismatch");
    const int d = shape_.dim;
    const int hist = shape_.history;
    Matrix dh, dz;
    for (std::size_t ii = T; ii-- > 0;) {
      const Step& st = cache.steps[ii];
      const Matrix& g = dy[ii];
      grad.w[kHiddenLayers].noalias() += g * st.h[kHiddenLayers - 1].transpose();
      grad.b[kHiddenLayers] += g.rowwise().sum();
      dh.noalias() = params_.w[kHiddenLayers].transpose() * g;
      for (int l = kHiddenLayers - 1; l >= 0; --l) {
        dz = dh;
        if (st.mask[l].size() != 0) dz.array() *= st.mask[l].array();
        dz.array() *= (st.z[l].array() > S(0)).template cast<S>();
        const Matrix& in = l == 0 ? st.x : st.h[l - 1];
        grad.w[l].noalias() += dz * in.transpose();
        grad.b[l] += dz.rowwise().sum();
        if (l > 0) {
          dh.noalias() = params_.w[l].transpose() * dz;
        }
      }
      // Feedback: only the y slots of the input matter for earlier steps.
      for (int k = 1; k <= hist && static_cast<std::size_t>(k) <= ii; ++k) {
        dy[ii - static_cast<std::size_t>(k)].noalias() +=
            params_.w[0].middleCols((hist + k) * d, d).transpose() * dz;
      }
    }
  }

 private:
  static Matrix draw_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
    Matrix m(rows, cols);
    const S keep = S(1) / S(1.0 - rate);
    // 53-bit uniform in [0, 1) so the stream is independent of the library's
    // distribution implementation.
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      m.data()[k] = u < rate ? S(0) : keep;
    }
    return m;
  }

  void check_shapes() const {
    const NetworkParams<S> ref = NetworkParams<S>::zeros(shape_);
    for (int l = 0; l < kLayers; ++l) {
      if (params_.w[l].rows() != ref.w[l].rows() || params_.w[l].cols() != ref.w[l].cols() ||
          params_.b[l].size() != ref.b[l].size()) {
        throw ShapeError("layer " + std::to_string(l) + " does not match the network shape");
      }
    }
  }

  NetworkShape shape_;
  NetworkParams<S> params_;
};

// Window loss averaged over the batch columns:
//   (1/T) sum_i |y_i - t_i|_1 + lambda (1/T) sum_i |y_{i+1} - 2 y_i + y_{i-1}|_2
// with the acceleration taken as zero at the first and last step. Writes
// d(loss)/d(y_i) into `dy` when given. Zero norms contribute zero gradient.
template <typename S>
LossTerms<S> window_loss(const std::vector<typename Network<S>::Matrix>& y,
                      const std::vector<typename Network<S>::Matrix>& t, double lambda,
                      std::vector<typename Network<S>::Matrix>* dy = nullptr) {
  using Matrix = typename Network<S>::Matrix;
  if (y.size() != t.size() || y.empty()) throw ShapeError("loss needs equal, non-empty windows");
  const std::size_t T = y.size();
  const Eigen::Index batch = y[0].cols();
  const S scale = S(1) / (S(T) * S(batch));
  LossTerms<S> terms;
  if (dy) {
    dy->assign(T, Matrix());
    for (std::size_t i = 0; i < T; ++i) (*dy)[i].setZero(y[i].rows(), batch);
  }
  for (std::size_t i = 0; i < T; ++i) {
    if (y[i].rows() != t[i].rows() || y[i].cols() != t[i].cols()) throw ShapeError("loss frame shape mismatch");
    const Matrix diff = y[i] - t[i];
    terms.data += diff.cwiseAbs().sum() * scale;
    if (dy) (*dy)[i].array() += diff.array().sign() * scale;
  }
  const S lam = S(lambda);
  if (lambda != 0.0) {
    for (std::size_t i = 1; i + 1 < T; ++i) {
      const Matrix acc = y[i + 1] - S(2) * y[i] + y[i - 1];
      for (Eigen::Index c = 0; c < batch; ++c) {
        const S norm = acc.col(c).norm();
        terms.regularizer += lam * norm * scale;
        if (dy && norm > S(0)) {
          const auto u = (acc.col(c) * (lam * scale / norm)).eval();
          (*dy)[i + 1].col(c) += u;
          (*dy)[i].col(c) -= S(2) * u;
          (*dy)[i - 1].col(c) += u;
        }
      }
    }
  }
  return terms;
}

}  // namespace phonosynth
