#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rd2v {

struct GradCheckResult {
  std::string name;
  std::size_t instances = 0;
  double max_relative_error = 0.0;
};

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-4;

// Each check draws `instances` random problems, differentiates one scalar
// through the tape and compares against central finite differences.

GradCheckResult gradcheck_cosine(std::size_t instances, std::uint64_t seed);
GradCheckResult gradcheck_log_sum_exp(std::size_t instances, std::uint64_t seed);
GradCheckResult gradcheck_regression(std::size_t instances, std::uint64_t seed);
GradCheckResult gradcheck_contrastive(std::size_t instances, std::uint64_t seed);
/// Both loss terms on a two-utterance batch with fixed negative pools,
/// differentiated through the frame normalization of the student readout.
GradCheckResult gradcheck_step_objective(std::size_t instances, std::uint64_t seed);
GradCheckResult gradcheck_feature_encoder(std::size_t instances, std::uint64_t seed);
GradCheckResult gradcheck_transformer(std::size_t instances, std::uint64_t seed);

std::vector<GradCheckResult> run_gradcheck_suite(std::size_t instances, std::uint64_t seed);

} // namespace rd2v
