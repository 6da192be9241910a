#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "rd2v/matrix.hpp"

namespace rd2v::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape
/// is alive.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Accumulated gradient of the last backward() root. Only available on
  /// nodes that require gradients.
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class GradMode { kEnabled, kDisabled };

/// Reverse-mode differentiation tape.
///
/// Nodes are appended in evaluation order, so the reverse of insertion order
/// is a reverse topological order; backward() walks it once, visiting every
/// node exactly once with a fixed accumulation order. A tape built with
/// GradMode::kDisabled refuses to create trainable leaves, which is how the
/// teacher branch is kept off the gradient path.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  explicit Tape(GradMode mode = GradMode::kEnabled) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);

  void backward(Var root);

  GradMode mode() const { return mode_; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t variable_count() const { return variables_; }

  // Op authoring interface.
  Var record(Matrix value, std::span<const Var> parents, BackwardFn fn);
  const Matrix& value_of(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Matrix& grad_of(std::size_t id);

 private:
  friend class Var;

  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  GradMode mode_;
  std::deque<Node> nodes_;
  std::size_t variables_ = 0;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Real s);
/// a (R x C) + bias (1 x C) broadcast over rows.
Var add_row(Var a, Var bias);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var gelu(Var a);
/// Per-row normalization to zero mean / unit variance, then gamma * x + beta.
Var layer_norm(Var x, Var gamma, Var beta, Real eps = 1e-5);
/// Per-row normalization without affine parameters.
Var normalize_rows(Var x, Real eps);
Var softmax_rows(Var a);
Var slice_cols(Var a, std::size_t first, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var gather_rows(Var a, std::span<const std::size_t> rows);
/// Rows where mask[r] is true are replaced by `row` (1 x C).
Var replace_rows(Var a, const std::vector<bool>& mask, Var row);
/// Strided 1-D convolution without padding over a (T x Cin) sequence;
/// weight is (kernel*Cin x Cout), bias is (1 x Cout).
Var conv1d(Var x, Var weight, Var bias, std::size_t kernel, std::size_t stride);
Var sum(Var a);
Var mean(Var a);
Var element(Var a, std::size_t r, std::size_t c);
/// Cosine similarity of a 1 x D query against each row of an N x D matrix.
Var cosine_rows(Var query, Var candidates, Real eps = 1e-8);
/// log(sum(exp(v))) over all entries, computed stably.
Var log_sum_exp(Var v);
/// Smooth-L1 between same-shape matrices, averaged over all entries.
Var smooth_l1(Var pred, Var target, Real beta);
Var add_all(std::span<const Var> terms);

} // namespace rd2v::ad
