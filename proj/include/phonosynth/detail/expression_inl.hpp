#pragma once

#include <algorithm>
#include <cmath>

namespace phonosynth {

namespace detail {

// Fractional frame position snapped onto the integer grid when within
// rounding noise, so that sampling at i / fps returns frame i bit-exactly.
inline double snap_frame_position(double pos) {
  const double nearest = std::round(pos);
  return std::abs(pos - nearest) < 1e-9 ? nearest : pos;
}

}  // namespace detail

template <std::size_t N>
std::array<float, N> sample_rows(const std::vector<std::array<float, N>>& rows, double pos) {
  std::array<float, N> out{};
  if (rows.empty()) return out;
  pos = detail::snap_frame_position(pos);
  const double last = static_cast<double>(rows.size() - 1);
  pos = std::clamp(pos, 0.0, last);
  const auto i0 = static_cast<std::size_t>(std::floor(pos));
  const std::size_t i1 = std::min(i0 + 1, rows.size() - 1);
  const double frac = pos - static_cast<double>(i0);
  for (std::size_t c = 0; c < N; ++c) {
    const double a = rows[i0][c];
    const double b = rows[i1][c];
    out[c] = static_cast<float>((1.0 - frac) * a + frac * b);
  }
  return out;
}

}  // namespace phonosynth
