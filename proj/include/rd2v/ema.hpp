#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "rd2v/parameters.hpp"

namespace rd2v {

/// Linear ramp of the EMA decay from tau0 to tau_e over tau_n updates,
/// constant afterwards.
struct EmaSchedule {
  double tau0 = 0.999;
  double tau_e = 0.9999;
  std::int64_t tau_n = 30000;

  void validate() const;
};

double tau_at(const EmaSchedule& s, std::int64_t step);

/// teacher <- tau * teacher + (1 - tau) * student, for every parameter.
/// Parameters rejected by `tracked` are copied from the student instead.
void ema_update(ParameterSet& teacher, const ParameterSet& student, double tau,
                const std::function<bool(const std::string&)>& tracked = {});

ParameterSet init_teacher(const ParameterSet& student);

} // namespace rd2v
