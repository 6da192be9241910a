#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rd2v/autodiff.hpp"
#include "rd2v/context_encoder.hpp"
#include "rd2v/negatives.hpp"

namespace rd2v {

/// Which loss terms and negative pools are active.
enum class LossMode {
  kRegressionOnly,          // L_reg
  kJointStandard,           // L_reg + L_c
  kJointNonSemantic,        // L_reg + L_c (non-semantic)
  kJointNonSemanticRemoval  // L_reg + L_c (non-semantic) + removal
};

LossMode parse_loss_mode(std::string_view name);
std::string_view to_string(LossMode mode);

struct NegativeCounts {
  std::size_t n_standard = 50;
  std::size_t n_non_semantic = 50;
  std::size_t k = 50;
};

/// Pool layout per mode: none; n_standard + n_non_semantic standard frames;
/// n_standard + n_non_semantic split by provenance; the same filtered to k.
PoolPlan pool_plan(LossMode mode, const NegativeCounts& counts);

struct LossConfig {
  double beta = 1.0;
  double kappa = 0.1;
  double lambda = 1.0;
  LossMode mode = LossMode::kJointNonSemanticRemoval;

  void validate() const;
  bool contrastive() const { return mode != LossMode::kRegressionOnly; }
};

/// Smooth-L1 averaged over masked frames and feature dimensions.
Real regression_loss(const FeatureSequence& c_pre, const FeatureSequence& c_tar,
                     const MaskSpec& mask, Real beta);
ad::Var regression_loss(ad::Var c_pre, const FeatureSequence& c_tar, const MaskSpec& mask,
                        Real beta);

/// -log softmax of the positive over {positive} U pool, cosine similarities
/// scaled by 1/kappa.
Real contrastive_loss(std::span<const Real> c_pre_t, std::span<const Real> c_tar_t,
                      const NegativePool& pool, Real kappa);
/// `c_pre_t` is 1 x D. The returned row of similarities (positive first) is
/// written to `sims` when non-null.
ad::Var contrastive_loss(ad::Var c_pre_t, std::span<const Real> c_tar_t,
                         const NegativePool& pool, Real kappa, ad::Var* sims = nullptr);

Real total_loss(Real reg, Real con, Real lambda);

struct StepLossReport {
  Real regression = 0.0;
  Real contrastive = 0.0;
  Real total = 0.0;
  std::size_t masked_count = 0;
  std::vector<Real> positive_similarity;
  std::vector<Real> negative_similarity;
};

/// One utterance's worth of objective inputs. `pools` holds one pool per
/// masked step, in increasing time order; it is empty when the loss mode has
/// no contrastive term.
struct ObjectiveInput {
  ad::Var c_pre;
  const FeatureSequence* c_tar = nullptr;
  const MaskSpec* mask = nullptr;
  std::vector<NegativePool> pools;
};

struct StepObjective {
  ad::Var total;
  ad::Var regression;
  ad::Var contrastive;
  StepLossReport report;
};

/// Regression mean over all masked frames of the batch, contrastive mean over
/// all masked steps, combined as regression + lambda * contrastive.
StepObjective step_objective(std::span<const ObjectiveInput> batch, const LossConfig& cfg);

} // namespace rd2v
