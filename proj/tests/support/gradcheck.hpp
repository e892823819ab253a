#pragma once

// Finite-difference oracle for the recurrent unit's gradients. Central
// differences are taken in extended precision, and the step is shrunk until
// both probes stay in the same linear region (no ReLU or L1 sign flips), so
// the comparison is not polluted by kinks or cancellation.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "phonosynth/network.hpp"

namespace phonosynth::testing {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // parameters sitting exactly on a kink
  std::size_t worst_index = 0;
};

namespace detail {

template <typename S>
std::vector<signed char> signature(const Network<S>& net, const std::vector<typename Network<S>::Matrix>& s,
                                   const std::vector<typename Network<S>::Matrix>& t,
                                   const std::optional<std::uint64_t>& seed, const DropoutRates& rates, S* loss,
                                   double lambda) {
  typename Network<S>::Cache cache;
  std::mt19937_64 rng(seed.value_or(0));
  const auto y = seed ? net.forward(s, &rates, &rng, &cache) : net.forward(s, nullptr, nullptr, &cache);
  *loss = window_loss<S>(y, t, lambda).total();
  std::vector<signed char> sig;
  for (const auto& st : cache.steps) {
    for (const auto& z : st.z) {
      for (Eigen::Index k = 0; k < z.size(); ++k) sig.push_back(z.data()[k] > S(0));
    }
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto d = (y[i] - t[i]).eval();
    for (Eigen::Index k = 0; k < d.size(); ++k) sig.push_back(static_cast<signed char>((d.data()[k] > 0) - (d.data()[k] < 0)));
  }
  return sig;
}

}  // namespace detail

inline GradCheckResult gradient_check(const NetworkShape& shape, const NetworkParams<double>& params,
                                      const std::vector<Eigen::MatrixXd>& s, const std::vector<Eigen::MatrixXd>& t,
                                      double lambda, std::optional<std::uint64_t> dropout_seed = std::nullopt,
                                      const DropoutRates& rates = {}) {
  using LD = long double;
  using LMatrix = Network<LD>::Matrix;

  Network<double> net(shape, params);
  Network<double>::Cache cache;
  std::mt19937_64 rng(dropout_seed.value_or(0));
  const auto y = dropout_seed ? net.forward(s, &rates, &rng, &cache) : net.forward(s, nullptr, nullptr, &cache);
  std::vector<Eigen::MatrixXd> dy;
  window_loss<double>(y, t, lambda, &dy);
  NetworkParams<double> grad = NetworkParams<double>::zeros(shape);
  net.backward(cache, dy, grad);
  std::vector<double> analytic;
  grad.for_each_tensor([&](const double* g, std::size_t n) { analytic.insert(analytic.end(), g, g + n); });

  Network<LD> lnet(shape, params.cast<LD>());
  std::vector<LMatrix> ls, lt;
  for (const auto& m : s) ls.push_back(m.cast<LD>());
  for (const auto& m : t) lt.push_back(m.cast<LD>());
  std::vector<LD*> slots;
  lnet.params().for_each_tensor([&](LD* p, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) slots.push_back(p + k);
  });

  LD base_loss = 0;
  const auto base = detail::signature(lnet, ls, lt, dropout_seed, rates, &base_loss, lambda);

  GradCheckResult res;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const LD orig = *slots[k];
    LD h = 1e-4L;
    std::optional<LD> numeric;
    for (int attempt = 0; attempt < 40 && !numeric; ++attempt, h *= 0.25L) {
      LD lp = 0, lm = 0;
      *slots[k] = orig + h;
      const auto sp = detail::signature(lnet, ls, lt, dropout_seed, rates, &lp, lambda);
      *slots[k] = orig - h;
      const auto sm = detail::signature(lnet, ls, lt, dropout_seed, rates, &lm, lambda);
      *slots[k] = orig;
      if (sp == base && sm == base) numeric = (lp - lm) / (2 * h);
    }
    if (!numeric) {
      ++res.skipped;
      continue;
    }
    const double n = static_cast<double>(*numeric);
    const double a = analytic[k];
    const double scale = std::max(std::abs(a), std::abs(n));
    const double rel = scale == 0.0 ? 0.0 : std::abs(a - n) / scale;
    if (rel > res.max_relative_error) {
      res.max_relative_error = rel;
      res.worst_index = k;
    }
    ++res.checked;
  }
  return res;
}

}  // namespace phonosynth::testing
