#include "rd2v/parameters.hpp"

#include <cmath>

#include "rd2v/errors.hpp"

namespace rd2v {

void ParameterSet::add(const std::string& name, Matrix value) {
  if (!params_.emplace(name, std::move(value)).second) {
    throw StructuralError("duplicate parameter '" + name + "'");
  }
}

const Matrix& ParameterSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw StructuralError("unknown parameter '" + name + "'");
  }
  return it->second;
}

Matrix& ParameterSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw StructuralError("unknown parameter '" + name + "'");
  }
  return it->second;
}

std::size_t ParameterSet::element_count() const {
  std::size_t n = 0;
  for (const auto& [_, m] : params_) n += m.size();
  return n;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

void require_matching(const ParameterSet& a, const ParameterSet& b) {
  if (a.size() != b.size()) {
    throw StructuralError("parameter sets differ in size: " + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()));
  }
  auto ib = b.begin();
  for (auto ia = a.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) {
      throw StructuralError("parameter name mismatch: '" + ia->first + "' vs '" +
                            ib->first + "'");
    }
    if (!ia->second.same_shape(ib->second)) {
      throw StructuralError("parameter '" + ia->first + "' has mismatched shapes");
    }
  }
}

Matrix uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, SeededRng& rng) {
  const Real bound = 1.0 / std::sqrt(Real(fan_in));
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = rng.uniform(-bound, bound);
  return m;
}

ad::Var BoundParameters::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) {
    throw StructuralError("parameter '" + name + "' is not bound");
  }
  return it->second;
}

BoundParameters BoundParameters::with(const std::string& name, ad::Var replacement) const {
  const Matrix& current = (*this)[name].value();
  const Matrix& next = replacement.value();
  if (current.rows() != next.rows() || current.cols() != next.cols()) {
    throw ShapeError("replacement for '" + name + "' has the wrong shape");
  }
  BoundParameters out = *this;
  out.vars_[name] = replacement;
  return out;
}

ParameterSet BoundParameters::gradients() const {
  if (!trainable_) {
    throw StructuralError("gradients requested from frozen parameters");
  }
  ParameterSet out;
  for (const auto& [name, var] : vars_) out.add(name, var.grad());
  return out;
}

BoundParameters bind_trainable(ad::Tape& tape, const ParameterSet& params) {
  BoundParameters b;
  b.tape_ = &tape;
  b.trainable_ = true;
  for (const auto& [name, m] : params) b.vars_.emplace(name, tape.variable(m));
  return b;
}

BoundParameters bind_frozen(ad::Tape& tape, const ParameterSet& params) {
  BoundParameters b;
  b.tape_ = &tape;
  for (const auto& [name, m] : params) b.vars_.emplace(name, tape.constant(m));
  return b;
}

} // namespace rd2v
