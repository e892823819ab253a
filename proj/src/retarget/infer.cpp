#include <algorithm>

#include "phonosynth/retarget.hpp"

namespace phonosynth {

ExpressionTrack infer(const RetargetModel& model, const ExpressionTrack& source) {
  using Matrix = Network<float>::Matrix;
  ExpressionTrack out;
  out.fps = source.fps;
  const std::size_t n = source.size();
  if (n == 0) return out;
  const std::size_t T = std::min(n, static_cast<std::size_t>(model.config().window));
  const std::size_t count = n - T + 1;
  const auto d = static_cast<Eigen::Index>(kExpressionDim);

  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(n));
  std::vector<int> covered(n, 0);
  constexpr std::size_t kChunk = 512;
  std::vector<Matrix> s;
  for (std::size_t w0 = 0; w0 < count; w0 += kChunk) {
    const std::size_t w1 = std::min(count, w0 + kChunk);
    const auto B = static_cast<Eigen::Index>(w1 - w0);
    s.assign(T, Matrix(d, B));
    for (Eigen::Index c = 0; c < B; ++c) {
      for (std::size_t i = 0; i < T; ++i) {
        s[i].col(c) = Eigen::Map<const Eigen::VectorXf>(source.frames[w0 + static_cast<std::size_t>(c) + i].values.data(), d);
      }
    }
    const auto y = model.network().forward(s);
    // Window order, then position: a fixed reduction order per frame.
    for (Eigen::Index c = 0; c < B; ++c) {
      const std::size_t w = w0 + static_cast<std::size_t>(c);
      for (std::size_t i = 0; i < T; ++i) {
        sum.col(static_cast<Eigen::Index>(w + i)) += y[i].col(c).cast<double>();
        ++covered[w + i];
      }
    }
  }
  out.frames.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double inv = 1.0 / static_cast<double>(covered[j]);
    for (std::size_t c = 0; c < kExpressionDim; ++c) {
      out.frames[j].values[c] = static_cast<float>(sum(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) * inv);
    }
  }
  return out;
}

}  // namespace phonosynth
