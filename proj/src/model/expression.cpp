#include "phonosynth/expression.hpp"

#include <cmath>
#include <string>

#include "phonosynth/errors.hpp"

namespace phonosynth {

bool ExpressionFrame::all_finite() const {
  for (float v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ExpressionFrame ExpressionFrame::from(const ExpressionVector& v) {
  ExpressionFrame f;
  for (std::size_t c = 0; c < kExpressionDim; ++c) f.values[c] = static_cast<float>(v[c]);
  return f;
}

ExpressionVector ExpressionFrame::to_vector() const {
  ExpressionVector v;
  for (std::size_t c = 0; c < kExpressionDim; ++c) v[c] = values[c];
  return v;
}

ExpressionVector ExpressionTrack::sample(double time_s) const {
  double pos = detail::snap_frame_position(time_s * fps);
  const double last = static_cast<double>(frames.size() - 1);
  pos = std::clamp(pos, 0.0, last);
  const auto i0 = static_cast<std::size_t>(std::floor(pos));
  const std::size_t i1 = std::min(i0 + 1, frames.size() - 1);
  const double frac = pos - static_cast<double>(i0);
  ExpressionVector out;
  const ExpressionFrame& a = frames[i0];
  const ExpressionFrame& b = frames[i1];
  for (std::size_t c = 0; c < kExpressionDim; ++c) {
    out[c] = (1.0 - frac) * static_cast<double>(a.values[c]) + frac * static_cast<double>(b.values[c]);
  }
  return out;
}

void ExpressionTrack::validate() const {
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ShapeError("track fps must be positive");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].all_finite()) {
      throw ShapeError("track frame " + std::to_string(i) + " has non-finite values");
    }
  }
}

double squared_distance(const ExpressionFrame& a, const ExpressionVector& b) {
  double sum = 0.0;
  for (std::size_t c = 0; c < kExpressionDim; ++c) {
    const double d = static_cast<double>(a.values[c]) - b[c];
    sum += d * d;
  }
  return sum;
}

}  // namespace phonosynth
