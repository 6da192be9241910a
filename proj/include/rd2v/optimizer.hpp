#pragma once

#include <cstdint>

#include "rd2v/parameters.hpp"

namespace rd2v {

struct AdamConfig {
  double max_lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
  std::int64_t warmup_steps = 0;

  void validate() const;
};

/// Linear warmup from 0 to max_lr over warmup_steps updates, then constant.
/// `step` is the 1-based index of the update being taken.
double learning_rate_at(const AdamConfig& cfg, std::int64_t step);

class Adam {
 public:
  Adam() = default;
  explicit Adam(const ParameterSet& like);

  /// One bias-corrected Adam update of `params` in place.
  void step(ParameterSet& params, const ParameterSet& grads, const AdamConfig& cfg, double lr);

  std::int64_t steps() const { return steps_; }
  const ParameterSet& first_moment() const { return m_; }
  const ParameterSet& second_moment() const { return v_; }

  static Adam restore(ParameterSet m, ParameterSet v, std::int64_t steps);

 private:
  ParameterSet m_;
  ParameterSet v_;
  std::int64_t steps_ = 0;
};

} // namespace rd2v
