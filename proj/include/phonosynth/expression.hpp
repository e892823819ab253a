#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace phonosynth {

inline constexpr std::size_t kExpressionDim = 64;
inline constexpr std::size_t kGeometryDim = 80;
inline constexpr std::size_t kReflectanceDim = 80;
inline constexpr std::size_t kPoseDim = 3;
inline constexpr std::size_t kIlluminationDim = 27;

using ExpressionVector = std::array<double, kExpressionDim>;

// One frame of face/lip expression coefficients.
struct ExpressionFrame {
  std::array<float, kExpressionDim> values{};

  float& operator[](std::size_t i) { return values[i]; }
  float operator[](std::size_t i) const { return values[i]; }
  bool all_finite() const;

  static ExpressionFrame from(const ExpressionVector& v);
  ExpressionVector to_vector() const;

  friend bool operator==(const ExpressionFrame&, const ExpressionFrame&) = default;
};

// Fixed-rate expression sequence; frame i is sampled at time i / fps and
// covers [i / fps, (i + 1) / fps).
struct ExpressionTrack {
  double fps = 30.0;
  std::vector<ExpressionFrame> frames;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  double duration_s() const { return static_cast<double>(frames.size()) / fps; }

  // Linear interpolation between neighbouring frame samples, clamped to the
  // first and last frame. Requires a non-empty track.
  ExpressionVector sample(double time_s) const;

  // Throws ShapeError when fps <= 0 or any value is non-finite.
  void validate() const;

  friend bool operator==(const ExpressionTrack&, const ExpressionTrack&) = default;
};

struct FullFaceFrame {
  std::array<float, kGeometryDim> geometry{};
  std::array<float, kReflectanceDim> reflectance{};
  std::array<float, kPoseDim> pose{};
  std::array<float, kIlluminationDim> illumination{};
  ExpressionFrame expression;

  friend bool operator==(const FullFaceFrame&, const FullFaceFrame&) = default;
};

// Squared Euclidean distance over the 64 coefficients.
double squared_distance(const ExpressionFrame& a, const ExpressionVector& b);

// Linear resampling of a generic per-frame float track (pose, illumination)
// at fractional frame position `pos`, clamped to the ends.
template <std::size_t N>
std::array<float, N> sample_rows(const std::vector<std::array<float, N>>& rows, double pos);

}  // namespace phonosynth

#include "phonosynth/detail/expression_inl.hpp"
