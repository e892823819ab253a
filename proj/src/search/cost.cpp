#include <cmath>

#include "phonosynth/errors.hpp"
#include "phonosynth/search.hpp"

namespace phonosynth {

void CostConfig::validate() const {
  if (c_phoneme < 0 || c_viseme < 0 || c_time < 0 || kappa_len < 0) {
    throw Error("cost weights must be non-negative");
  }
  if (max_segment_len < 1) throw Error("max_segment_len must be at least 1");
}

Cost substitution_cost(const Token& w, const Token& v, const CostConfig& cfg, const VisemeTable& table) {
  if (w.is_gesture() || v.is_gesture()) {
    if (w.kind != v.kind || w.name != v.name) return Cost::no_match();
    return Cost(cfg.c_time * std::abs(w.duration() - v.duration()));
  }
  const double name_term = cfg.c_phoneme * static_cast<double>(w.name != v.name);
  const double viseme_term = cfg.c_viseme * static_cast<double>(table.viseme_of(w) != table.viseme_of(v));
  return Cost(name_term + viseme_term + cfg.c_time * std::abs(w.duration() - v.duration()));
}

Cost match_cost(std::span<const Token> wq, std::span<const Token> vq, const CostConfig& cfg,
                const VisemeTable& table) {
  if (wq.size() != vq.size()) {
    throw ShapeError("match_cost needs equal lengths, got " + std::to_string(wq.size()) + " and " +
                     std::to_string(vq.size()));
  }
  Cost total(0.0);
  for (std::size_t k = 0; k < wq.size(); ++k) {
    total = total + substitution_cost(wq[k], vq[k], cfg, table);
    if (!total.is_match()) break;
  }
  return total;
}

}  // namespace phonosynth
