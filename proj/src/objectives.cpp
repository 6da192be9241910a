#include "rd2v/objectives.hpp"

#include <cmath>

#include "rd2v/errors.hpp"
#include "rd2v/numeric.hpp"

namespace rd2v {

LossMode parse_loss_mode(std::string_view name) {
  if (name == "regression_only") return LossMode::kRegressionOnly;
  if (name == "joint_standard") return LossMode::kJointStandard;
  if (name == "joint_nonsemantic") return LossMode::kJointNonSemantic;
  if (name == "joint_nonsemantic_removal") return LossMode::kJointNonSemanticRemoval;
  throw ConfigError("unknown loss mode '" + std::string(name) + "'");
}

std::string_view to_string(LossMode mode) {
  switch (mode) {
    case LossMode::kRegressionOnly: return "regression_only";
    case LossMode::kJointStandard: return "joint_standard";
    case LossMode::kJointNonSemantic: return "joint_nonsemantic";
    case LossMode::kJointNonSemanticRemoval: return "joint_nonsemantic_removal";
  }
  return "?";
}

PoolPlan pool_plan(LossMode mode, const NegativeCounts& counts) {
  switch (mode) {
    case LossMode::kRegressionOnly:
      return {};
    case LossMode::kJointStandard:
      return {counts.n_standard + counts.n_non_semantic, 0, 0};
    case LossMode::kJointNonSemantic:
      return {counts.n_standard, counts.n_non_semantic, 0};
    case LossMode::kJointNonSemanticRemoval:
      return {counts.n_standard, counts.n_non_semantic, counts.k};
  }
  return {};
}

void LossConfig::validate() const {
  if (!(beta > 0.0)) throw ConfigError("loss beta must be > 0");
  if (!(kappa > 0.0)) throw ConfigError("loss kappa must be > 0");
  if (!(lambda >= 0.0)) throw ConfigError("loss lambda must be >= 0");
}

Real regression_loss(const FeatureSequence& c_pre, const FeatureSequence& c_tar,
                     const MaskSpec& mask, Real beta) {
  ad::Tape tape(ad::GradMode::kDisabled);
  return regression_loss(tape.constant(c_pre), c_tar, mask, beta).value().item();
}

ad::Var regression_loss(ad::Var c_pre, const FeatureSequence& c_tar, const MaskSpec& mask,
                        Real beta) {
  require_same_shape(c_pre.value(), c_tar, "regression_loss");
  if (mask.length() != c_tar.rows()) {
    throw ShapeError("regression_loss: mask length differs from sequence length");
  }
  const auto idx = mask.indices();
  if (idx.empty()) {
    throw DomainError("regression_loss: no masked steps");
  }
  ad::Tape& tape = c_pre.tape();
  return ad::smooth_l1(ad::gather_rows(c_pre, idx), tape.constant(gather_rows(c_tar, idx)), beta);
}

Real contrastive_loss(std::span<const Real> c_pre_t, std::span<const Real> c_tar_t,
                      const NegativePool& pool, Real kappa) {
  ad::Tape tape(ad::GradMode::kDisabled);
  return contrastive_loss(tape.constant(Matrix::row_vector(c_pre_t)), c_tar_t, pool, kappa)
      .value()
      .item();
}

ad::Var contrastive_loss(ad::Var c_pre_t, std::span<const Real> c_tar_t,
                         const NegativePool& pool, Real kappa, ad::Var* sims) {
  if (!(kappa > 0.0)) {
    throw DomainError("contrastive_loss: kappa must be > 0");
  }
  const std::size_t d = c_tar_t.size();
  if (c_pre_t.rows() != 1 || c_pre_t.cols() != d) {
    throw ShapeError("contrastive_loss: prediction must be 1x" + std::to_string(d));
  }
  if (!pool.empty() && pool.frames.cols() != d) {
    throw ShapeError("contrastive_loss: negative frames have the wrong dimension");
  }
  Matrix candidates(1 + pool.size(), d);
  std::copy(c_tar_t.begin(), c_tar_t.end(), candidates.row(0).begin());
  if (!pool.empty()) {
    candidates.eigen().bottomRows(Eigen::Index(pool.size())) = pool.frames.eigen();
  }
  ad::Tape& tape = c_pre_t.tape();
  const ad::Var s = ad::cosine_rows(c_pre_t, tape.constant(std::move(candidates)));
  if (sims != nullptr) *sims = s;
  const ad::Var logits = ad::scale(s, 1.0 / kappa);
  return ad::sub(ad::log_sum_exp(logits), ad::element(logits, 0, 0));
}

Real total_loss(Real reg, Real con, Real lambda) {
  return reg + lambda * con;
}

StepObjective step_objective(std::span<const ObjectiveInput> batch, const LossConfig& cfg) {
  cfg.validate();
  if (batch.empty()) {
    throw DomainError("step_objective: empty batch");
  }
  ad::Tape& tape = batch.front().c_pre.tape();
  StepObjective out;

  std::vector<ad::Var> pred_rows;
  std::vector<ad::Var> target_rows;
  std::vector<ad::Var> con_terms;
  for (const auto& item : batch) {
    if (item.c_tar == nullptr || item.mask == nullptr) {
      throw StructuralError("step_objective: missing target or mask");
    }
    require_same_shape(item.c_pre.value(), *item.c_tar, "step_objective");
    if (item.mask->length() != item.c_tar->rows()) {
      throw ShapeError("step_objective: mask length differs from sequence length");
    }
    const auto idx = item.mask->indices();
    if (idx.empty()) continue;
    out.report.masked_count += idx.size();
    pred_rows.push_back(ad::gather_rows(item.c_pre, idx));
    target_rows.push_back(tape.constant(gather_rows(*item.c_tar, idx)));

    if (!cfg.contrastive()) continue;
    if (item.pools.size() != idx.size()) {
      throw StructuralError("step_objective: expected one negative pool per masked step");
    }
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const std::size_t t = idx[j];
      ad::Var sims;
      const ad::Var q = ad::gather_rows(item.c_pre, std::span(&t, 1));
      con_terms.push_back(contrastive_loss(q, item.c_tar->row(t), item.pools[j], cfg.kappa, &sims));
      const auto s = sims.value().data();
      out.report.positive_similarity.push_back(s[0]);
      out.report.negative_similarity.insert(out.report.negative_similarity.end(), s.begin() + 1,
                                            s.end());
    }
  }
  if (out.report.masked_count == 0) {
    throw DomainError("step_objective: no masked steps in batch");
  }

  out.regression = ad::smooth_l1(ad::concat_rows(pred_rows), ad::concat_rows(target_rows), cfg.beta);
  if (con_terms.empty()) {
    out.contrastive = tape.constant(Matrix::scalar(0.0));
  } else {
    out.contrastive = ad::scale(ad::add_all(con_terms), 1.0 / Real(con_terms.size()));
  }
  out.total = ad::add(out.regression, ad::scale(out.contrastive, cfg.lambda));

  out.report.regression = out.regression.value().item();
  out.report.contrastive = out.contrastive.value().item();
  out.report.total = out.total.value().item();
  return out;
}

} // namespace rd2v
