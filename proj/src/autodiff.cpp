#include "rd2v/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rd2v/errors.hpp"

namespace rd2v::ad {

const Matrix& Var::value() const {
  return tape_->nodes_[id_].value;
}

const Matrix& Var::grad() const {
  const auto& node = tape_->nodes_[id_];
  if (!node.requires_grad) {
    throw StructuralError("grad() on a node that does not require gradients");
  }
  return node.grad;
}

bool Var::requires_grad() const {
  return tape_->nodes_[id_].requires_grad;
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
  if (mode_ == GradMode::kDisabled) {
    throw StructuralError("trainable leaf requested on a gradient-disabled tape");
  }
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  ++variables_;
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  for (const auto& p : parents) {
    if (p.tape_ != this) {
      throw StructuralError("operands recorded on different tapes");
    }
    needs = needs || nodes_[p.id_].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_of(std::size_t id) {
  return nodes_[id].grad;
}

void Tape::backward(Var root) {
  if (root.tape_ != this) {
    throw StructuralError("backward root belongs to another tape");
  }
  if (root.value().size() != 1) {
    throw ShapeError("backward root must be a scalar");
  }
  for (std::size_t i = 0; i <= root.id_; ++i) {
    auto& n = nodes_[i];
    if (n.requires_grad) {
      n.grad = Matrix(n.value.rows(), n.value.cols());
    }
  }
  if (!nodes_[root.id_].requires_grad) {
    return;
  }
  nodes_[root.id_].grad[0] = 1.0;
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.requires_grad && n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_same(Var a, Var b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw ShapeError(std::string(op) + ": shape " + shape_str(a.value()) + " vs " +
                     shape_str(b.value()));
  }
}

Var rec(Matrix value, std::initializer_list<Var> parents, Tape::BackwardFn fn) {
  Tape& t = parents.begin()->tape();
  return t.record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(fn));
}

} // namespace

Var add(Var a, Var b) {
  check_same(a, b, "add");
  Matrix out = a.value() + b.value();
  const auto ia = a.id(), ib = b.id();
  return rec(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.grad_of(ia) += g;
    if (t.needs_grad(ib)) t.grad_of(ib) += g;
  });
}

Var sub(Var a, Var b) {
  check_same(a, b, "sub");
  Matrix out = a.value() - b.value();
  const auto ia = a.id(), ib = b.id();
  return rec(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.grad_of(ia) += g;
    if (t.needs_grad(ib)) t.grad_of(ib).eigen() -= g.eigen();
  });
}

Var mul(Var a, Var b) {
  check_same(a, b, "mul");
  Matrix out(a.rows(), a.cols());
  out.eigen() = a.value().eigen().cwiseProduct(b.value().eigen());
  const auto ia = a.id(), ib = b.id();
  return rec(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) {
      t.grad_of(ia).eigen() += g.eigen().cwiseProduct(t.value_of(ib).eigen());
    }
    if (t.needs_grad(ib)) {
      t.grad_of(ib).eigen() += g.eigen().cwiseProduct(t.value_of(ia).eigen());
    }
  });
}

Var scale(Var a, Real s) {
  Matrix out = s * a.value();
  const auto ia = a.id();
  return rec(std::move(out), {a}, [ia, s](Tape& t, const Matrix& g) {
    t.grad_of(ia).eigen() += s * g.eigen();
  });
}

Var add_row(Var a, Var bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw ShapeError("add_row: bias " + shape_str(bias.value()) + " for input " +
                     shape_str(a.value()));
  }
  Matrix out = a.value();
  out.eigen().rowwise() += bias.value().eigen().row(0);
  const auto ia = a.id(), ib = bias.id();
  return rec(std::move(out), {a, bias}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.grad_of(ia) += g;
    if (t.needs_grad(ib)) t.grad_of(ib).eigen() += g.eigen().colwise().sum();
  });
}

Var matmul(Var a, Var b) {
  Matrix out = rd2v::matmul(a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return rec(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.needs_grad(ia)) {
      t.grad_of(ia).eigen().noalias() += g.eigen() * t.value_of(ib).eigen().transpose();
    }
    if (t.needs_grad(ib)) {
      t.grad_of(ib).eigen().noalias() += t.value_of(ia).eigen().transpose() * g.eigen();
    }
  });
}

Var transpose(Var a) {
  Matrix out = rd2v::transpose(a.value());
  const auto ia = a.id();
  return rec(std::move(out), {a}, [ia](Tape& t, const Matrix& g) {
    t.grad_of(ia).eigen() += g.eigen().transpose();
  });
}

Var gelu(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * std::numbers::sqrt2 / 2.0));
  }
  const auto ia = a.id();
  return rec(std::move(out), {a}, [ia](Tape& t, const Matrix& g) {
    const Matrix& xv = t.value_of(ia);
    Matrix& gx = t.grad_of(ia);
    const Real inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const Real v = xv[i];
      const Real cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      const Real pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      gx[i] += g[i] * (cdf + v * pdf);
    }
  });
}

namespace {

// Shared forward/backward for row normalization. Returns xhat and stores the
// per-row inverse standard deviation.
Matrix normalize_forward(const Matrix& x, Real eps, std::vector<Real>& inv_std) {
  const std::size_t rows = x.rows(), cols = x.cols();
  Matrix xhat(rows, cols);
  inv_std.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = x.row(r);
    Real mu = 0.0;
    for (Real v : in) mu += v;
    mu /= Real(cols);
    Real var = 0.0;
    for (Real v : in) var += (v - mu) * (v - mu);
    var /= Real(cols);
    const Real is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    auto out = xhat.row(r);
    for (std::size_t c = 0; c < cols; ++c) out[c] = (in[c] - mu) * is;
  }
  return xhat;
}

// dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)) per row.
void normalize_backward(const Matrix& xhat, const std::vector<Real>& inv_std,
                        const Matrix& dxhat, Matrix& dx) {
  const std::size_t cols = xhat.cols();
  for (std::size_t r = 0; r < xhat.rows(); ++r) {
    auto xh = xhat.row(r);
    auto dh = dxhat.row(r);
    Real m1 = 0.0, m2 = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      m1 += dh[c];
      m2 += dh[c] * xh[c];
    }
    m1 /= Real(cols);
    m2 /= Real(cols);
    auto out = dx.row(r);
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] += inv_std[r] * (dh[c] - m1 - xh[c] * m2);
    }
  }
}

} // namespace

Var layer_norm(Var x, Var gamma, Var beta, Real eps) {
  const std::size_t cols = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != cols || !gamma.value().same_shape(beta.value())) {
    throw ShapeError("layer_norm: affine parameters must be 1x" + std::to_string(cols));
  }
  std::vector<Real> inv_std;
  Matrix xhat = normalize_forward(x.value(), eps, inv_std);
  Matrix out = xhat;
  out.eigen().array().rowwise() *= gamma.value().eigen().row(0).array();
  out.eigen().rowwise() += beta.value().eigen().row(0);
  const auto ix = x.id(), ig = gamma.id(), ib = beta.id();
  return rec(std::move(out), {x, gamma, beta},
             [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                 Tape& t, const Matrix& g) {
               if (t.needs_grad(ig)) {
                 t.grad_of(ig).eigen() +=
                     g.eigen().cwiseProduct(xhat.eigen()).colwise().sum();
               }
               if (t.needs_grad(ib)) {
                 t.grad_of(ib).eigen() += g.eigen().colwise().sum();
               }
               if (t.needs_grad(ix)) {
                 Matrix dxhat = g;
                 dxhat.eigen().array().rowwise() *= t.value_of(ig).eigen().row(0).array();
                 normalize_backward(xhat, inv_std, dxhat, t.grad_of(ix));
               }
             });
}

Var normalize_rows(Var x, Real eps) {
  std::vector<Real> inv_std;
  Matrix xhat = normalize_forward(x.value(), eps, inv_std);
  Matrix out = xhat;
  const auto ix = x.id();
  return rec(std::move(out), {x},
             [ix, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                 Tape& t, const Matrix& g) {
               normalize_backward(xhat, inv_std, g, t.grad_of(ix));
             });
}

Var softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    const Real m = *std::max_element(in.begin(), in.end());
    Real z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - m);
      z += o[c];
    }
    for (auto& v : o) v /= z;
  }
  const auto ia = a.id();
  Matrix y = out;
  return rec(std::move(out), {a}, [ia, y = std::move(y)](Tape& t, const Matrix& g) {
    Matrix& gx = t.grad_of(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row(r);
      auto gr = g.row(r);
      Real dot = 0.0;
      for (std::size_t c = 0; c < yr.size(); ++c) dot += yr[c] * gr[c];
      auto out_r = gx.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) out_r[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var slice_cols(Var a, std::size_t first, std::size_t count) {
  if (first + count > a.cols()) {
    throw ShapeError("slice_cols: range exceeds " + std::to_string(a.cols()) + " columns");
  }
  Matrix out(a.rows(), count);
  out.eigen() = a.value().eigen().middleCols(Eigen::Index(first), Eigen::Index(count));
  const auto ia = a.id();
  return rec(std::move(out), {a}, [ia, first, count](Tape& t, const Matrix& g) {
    t.grad_of(ia).eigen().middleCols(Eigen::Index(first), Eigen::Index(count)) += g.eigen();
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) {
    throw ShapeError("concat_cols: no inputs");
  }
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    out.eigen().middleCols(Eigen::Index(off), Eigen::Index(p.cols())) = p.value().eigen();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  return parts[0].tape().record(
      std::move(out), parts, [ids, offsets](Tape& t, const Matrix& g) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (!t.needs_grad(ids[i])) continue;
          Matrix& gi = t.grad_of(ids[i]);
          gi.eigen() += g.eigen().middleCols(Eigen::Index(offsets[i]), Eigen::Index(gi.cols()));
        }
      });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) {
    throw ShapeError("concat_rows: no inputs");
  }
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    out.eigen().middleRows(Eigen::Index(off), Eigen::Index(p.rows())) = p.value().eigen();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.rows();
  }
  return parts[0].tape().record(
      std::move(out), parts, [ids, offsets](Tape& t, const Matrix& g) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (!t.needs_grad(ids[i])) continue;
          Matrix& gi = t.grad_of(ids[i]);
          gi.eigen() += g.eigen().middleRows(Eigen::Index(offsets[i]), Eigen::Index(gi.rows()));
        }
      });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  Matrix out = rd2v::gather_rows(a.value(), rows);
  const auto ia = a.id();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return rec(std::move(out), {a}, [ia, idx = std::move(idx)](Tape& t, const Matrix& g) {
    Matrix& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = g.row(i);
      auto dst = ga.row(idx[i]);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

Var replace_rows(Var a, const std::vector<bool>& mask, Var row) {
  if (mask.size() != a.rows()) {
    throw ShapeError("replace_rows: mask length " + std::to_string(mask.size()) +
                     " for " + std::to_string(a.rows()) + " rows");
  }
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("replace_rows: replacement must be 1x" + std::to_string(a.cols()));
  }
  Matrix out = a.value();
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (mask[r]) {
      std::copy_n(row.value().data().begin(), a.cols(), out.row(r).begin());
    }
  }
  const auto ia = a.id(), ir = row.id();
  return rec(std::move(out), {a, row}, [ia, ir, mask](Tape& t, const Matrix& g) {
    for (std::size_t r = 0; r < mask.size(); ++r) {
      auto src = g.row(r);
      if (mask[r]) {
        if (t.needs_grad(ir)) {
          auto dst = t.grad_of(ir).row(0);
          for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
        }
      } else if (t.needs_grad(ia)) {
        auto dst = t.grad_of(ia).row(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
    }
  });
}

Var conv1d(Var x, Var weight, Var bias, std::size_t kernel, std::size_t stride) {
  const std::size_t t_in = x.rows(), c_in = x.cols();
  if (kernel == 0 || stride == 0) {
    throw ShapeError("conv1d: kernel and stride must be positive");
  }
  if (t_in < kernel) {
    throw LengthError("conv1d: input of " + std::to_string(t_in) +
                      " steps is shorter than kernel " + std::to_string(kernel));
  }
  if (weight.rows() != kernel * c_in) {
    throw ShapeError("conv1d: weight has " + std::to_string(weight.rows()) +
                     " rows, expected kernel*channels = " + std::to_string(kernel * c_in));
  }
  const std::size_t c_out = weight.cols();
  if (bias.rows() != 1 || bias.cols() != c_out) {
    throw ShapeError("conv1d: bias must be 1x" + std::to_string(c_out));
  }
  const std::size_t t_out = (t_in - kernel) / stride + 1;
  const Eigen::Index win = Eigen::Index(kernel * c_in);
  using Strided = Eigen::Map<const EigenRowMatrix, 0, Eigen::OuterStride<>>;
  // Row t of the unfolded input is the contiguous window starting at t*stride.
  Strided cols(x.value().data().data(), Eigen::Index(t_out), win,
               Eigen::OuterStride<>(Eigen::Index(stride * c_in)));
  Matrix out(t_out, c_out);
  out.eigen().noalias() = cols * weight.value().eigen();
  out.eigen().rowwise() += bias.value().eigen().row(0);
  const auto ix = x.id(), iw = weight.id(), ib = bias.id();
  return rec(std::move(out), {x, weight, bias},
             [=](Tape& t, const Matrix& g) {
               const Matrix& xv = t.value_of(ix);
               Strided unfolded(xv.data().data(), Eigen::Index(t_out), win,
                                Eigen::OuterStride<>(Eigen::Index(stride * c_in)));
               if (t.needs_grad(iw)) {
                 t.grad_of(iw).eigen().noalias() += unfolded.transpose() * g.eigen();
               }
               if (t.needs_grad(ib)) {
                 t.grad_of(ib).eigen() += g.eigen().colwise().sum();
               }
               if (t.needs_grad(ix)) {
                 EigenRowMatrix dcols = g.eigen() * t.value_of(iw).eigen().transpose();
                 Real* gx = t.grad_of(ix).data().data();
                 // Windows overlap when stride < kernel; accumulate row by row.
                 for (std::size_t r = 0; r < t_out; ++r) {
                   Eigen::Map<Eigen::Matrix<Real, 1, Eigen::Dynamic>> dst(
                       gx + r * stride * c_in, win);
                   dst += dcols.row(Eigen::Index(r));
                 }
               }
             });
}

Var sum(Var a) {
  Matrix out = Matrix::scalar(a.value().eigen().sum());
  const auto ia = a.id();
  return rec(std::move(out), {a}, [ia](Tape& t, const Matrix& g) {
    t.grad_of(ia).eigen().array() += g[0];
  });
}

Var mean(Var a) {
  if (a.value().empty()) {
    throw ShapeError("mean of an empty matrix");
  }
  const Real n = Real(a.value().size());
  Matrix out = Matrix::scalar(a.value().eigen().sum() / n);
  const auto ia = a.id();
  return rec(std::move(out), {a}, [ia, n](Tape& t, const Matrix& g) {
    t.grad_of(ia).eigen().array() += g[0] / n;
  });
}

Var element(Var a, std::size_t r, std::size_t c) {
  if (r >= a.rows() || c >= a.cols()) {
    throw ShapeError("element: index out of range");
  }
  Matrix out = Matrix::scalar(a.value()(r, c));
  const auto ia = a.id();
  return rec(std::move(out), {a}, [ia, r, c](Tape& t, const Matrix& g) {
    t.grad_of(ia)(r, c) += g[0];
  });
}

Var cosine_rows(Var query, Var candidates, Real eps) {
  if (query.rows() != 1 || query.cols() != candidates.cols()) {
    throw ShapeError("cosine_rows: query " + shape_str(query.value()) + " vs candidates " +
                     shape_str(candidates.value()));
  }
  const std::size_t n = candidates.rows(), d = query.cols();
  const Matrix& q = query.value();
  const Matrix& cm = candidates.value();
  const Real q_norm = q.eigen().norm();
  const Real q_den = std::max(q_norm, eps);
  std::vector<Real> c_norm(n), c_den(n);
  Matrix out(1, n);
  for (std::size_t i = 0; i < n; ++i) {
    c_norm[i] = cm.eigen().row(Eigen::Index(i)).norm();
    c_den[i] = std::max(c_norm[i], eps);
    out[i] = q.eigen().row(0).dot(cm.eigen().row(Eigen::Index(i))) / (q_den * c_den[i]);
  }
  const auto iq = query.id(), ic = candidates.id();
  Matrix sims = out;
  return rec(std::move(out), {query, candidates},
             [=, sims = std::move(sims)](Tape& t, const Matrix& g) {
               const Matrix& qv = t.value_of(iq);
               const Matrix& cv = t.value_of(ic);
               for (std::size_t i = 0; i < n; ++i) {
                 const Real gi = g[i];
                 if (gi == 0.0) continue;
                 const Real s = sims[i];
                 if (t.needs_grad(iq)) {
                   auto dq = t.grad_of(iq).row(0);
                   for (std::size_t k = 0; k < d; ++k) {
                     Real v = cv(i, k) / (q_den * c_den[i]);
                     // The norm floor is constant below eps, so only the
                     // unfloored norm contributes a normalization term.
                     if (q_norm > eps) v -= s * qv(0, k) / (q_norm * q_norm);
                     dq[k] += gi * v;
                   }
                 }
                 if (t.needs_grad(ic)) {
                   auto dc = t.grad_of(ic).row(i);
                   for (std::size_t k = 0; k < d; ++k) {
                     Real v = qv(0, k) / (q_den * c_den[i]);
                     if (c_norm[i] > eps) v -= s * cv(i, k) / (c_norm[i] * c_norm[i]);
                     dc[k] += gi * v;
                   }
                 }
               }
             });
}

Var log_sum_exp(Var v) {
  const Matrix& x = v.value();
  if (x.empty()) {
    throw DomainError("log_sum_exp of an empty vector");
  }
  const Real m = *std::max_element(x.data().begin(), x.data().end());
  Real z = 0.0;
  for (Real e : x.data()) z += std::exp(e - m);
  const Real lse = m + std::log(z);
  const auto iv = v.id();
  return rec(Matrix::scalar(lse), {v}, [iv, lse](Tape& t, const Matrix& g) {
    const Matrix& xv = t.value_of(iv);
    Matrix& gx = t.grad_of(iv);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[0] * std::exp(xv[i] - lse);
  });
}

Var smooth_l1(Var pred, Var target, Real beta) {
  check_same(pred, target, "smooth_l1");
  if (!(beta > 0.0)) {
    throw DomainError("smooth_l1: beta must be positive");
  }
  const Matrix& p = pred.value();
  const Matrix& q = target.value();
  if (p.empty()) {
    throw DomainError("smooth_l1 over zero elements");
  }
  Real total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Real d = p[i] - q[i];
    const Real ad = std::abs(d);
    total += ad <= beta ? 0.5 * d * d / beta : ad - 0.5 * beta;
  }
  const Real n = Real(p.size());
  const auto ip = pred.id(), iq = target.id();
  return rec(Matrix::scalar(total / n), {pred, target},
             [ip, iq, beta, n](Tape& t, const Matrix& g) {
               const Matrix& pv = t.value_of(ip);
               const Matrix& qv = t.value_of(iq);
               for (std::size_t i = 0; i < pv.size(); ++i) {
                 const Real d = pv[i] - qv[i];
                 const Real slope = std::abs(d) <= beta ? d / beta : (d > 0 ? 1.0 : -1.0);
                 const Real gi = g[0] * slope / n;
                 if (t.needs_grad(ip)) t.grad_of(ip)[i] += gi;
                 if (t.needs_grad(iq)) t.grad_of(iq)[i] -= gi;
               }
             });
}

Var add_all(std::span<const Var> terms) {
  if (terms.empty()) {
    throw ShapeError("add_all: no terms");
  }
  Matrix out = terms[0].value();
  std::vector<std::size_t> ids{terms[0].id()};
  for (std::size_t i = 1; i < terms.size(); ++i) {
    out += terms[i].value();
    ids.push_back(terms[i].id());
  }
  return terms[0].tape().record(std::move(out), terms, [ids](Tape& t, const Matrix& g) {
    for (auto id : ids) {
      if (t.needs_grad(id)) t.grad_of(id) += g;
    }
  });
}

} // namespace rd2v::ad
