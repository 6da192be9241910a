#include "rd2v/ema.hpp"

#include <algorithm>

#include "rd2v/errors.hpp"

namespace rd2v {

void EmaSchedule::validate() const {
  if (!(0.0 <= tau0 && tau0 <= tau_e && tau_e <= 1.0)) {
    throw ConfigError("EMA schedule requires 0 <= tau0 <= tau_e <= 1");
  }
  if (tau_n < 1) {
    throw ConfigError("EMA schedule requires tau_n >= 1");
  }
}

double tau_at(const EmaSchedule& s, std::int64_t step) {
  if (step < 0) {
    throw DomainError("tau_at: negative step");
  }
  if (step >= s.tau_n) {
    return s.tau_e;
  }
  const double frac = double(step) / double(s.tau_n);
  return s.tau0 + (s.tau_e - s.tau0) * frac;
}

void ema_update(ParameterSet& teacher, const ParameterSet& student, double tau,
                const std::function<bool(const std::string&)>& tracked) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw DomainError("ema_update: tau must lie in [0, 1]");
  }
  require_matching(teacher, student);
  for (auto& [name, t] : teacher) {
    const Matrix& s = student.at(name);
    if (tracked && !tracked(name)) {
      t = s;
      continue;
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = tau * t[i] + (1.0 - tau) * s[i];
    }
  }
}

ParameterSet init_teacher(const ParameterSet& student) {
  return student;
}

} // namespace rd2v
