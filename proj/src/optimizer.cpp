#include "rd2v/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "rd2v/errors.hpp"

namespace rd2v {

void AdamConfig::validate() const {
  if (!(max_lr > 0.0)) throw ConfigError("optimizer max_lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optimizer betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("optimizer eps must be > 0");
  if (warmup_steps < 0) throw ConfigError("optimizer warmup_steps must be >= 0");
}

double learning_rate_at(const AdamConfig& cfg, std::int64_t step) {
  if (cfg.warmup_steps <= 0 || step >= cfg.warmup_steps) {
    return cfg.max_lr;
  }
  return cfg.max_lr * double(std::max<std::int64_t>(step, 0)) / double(cfg.warmup_steps);
}

Adam::Adam(const ParameterSet& like) {
  for (const auto& [name, p] : like) {
    m_.add(name, Matrix(p.rows(), p.cols()));
    v_.add(name, Matrix(p.rows(), p.cols()));
  }
}

Adam Adam::restore(ParameterSet m, ParameterSet v, std::int64_t steps) {
  require_matching(m, v);
  Adam a;
  a.m_ = std::move(m);
  a.v_ = std::move(v);
  a.steps_ = steps;
  return a;
}

void Adam::step(ParameterSet& params, const ParameterSet& grads, const AdamConfig& cfg,
                double lr) {
  require_matching(params, grads);
  require_matching(params, m_);
  ++steps_;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(steps_));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(steps_));
  for (auto& [name, p] : params) {
    const Matrix& g = grads.at(name);
    Matrix& m = m_.at(name);
    Matrix& v = v_.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
  }
}

} // namespace rd2v
