#pragma once

#include <map>
#include <string>
#include <vector>

#include "rd2v/autodiff.hpp"
#include "rd2v/matrix.hpp"
#include "rd2v/rng.hpp"

namespace rd2v {

/// Named collection of trainable matrices. Iteration order is the sorted
/// name order, which fixes every traversal (EMA, Adam, checkpoints).
class ParameterSet {
 public:
  using Map = std::map<std::string, Matrix>;

  void add(const std::string& name, Matrix value);
  const Matrix& at(const std::string& name) const;
  Matrix& at(const std::string& name);
  bool contains(const std::string& name) const { return params_.contains(name); }
  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;
  std::vector<std::string> names() const;

  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }
  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.params_ == b.params_;
  }

 private:
  Map params_;
};

/// Throws StructuralError unless both sets have identical names and shapes.
void require_matching(const ParameterSet& a, const ParameterSet& b);

/// Centered uniform init with half-width 1/sqrt(fan_in).
Matrix uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, SeededRng& rng);

/// Parameter set placed on a tape, either as trainable leaves or constants.
class BoundParameters {
 public:
  ad::Var operator[](const std::string& name) const;
  ad::Tape& tape() const { return *tape_; }
  bool trainable() const { return trainable_; }
  /// Gradients of every bound leaf after Tape::backward.
  ParameterSet gradients() const;
  /// Copy with one entry swapped for another node on the same tape.
  BoundParameters with(const std::string& name, ad::Var replacement) const;

 private:
  friend BoundParameters bind_trainable(ad::Tape&, const ParameterSet&);
  friend BoundParameters bind_frozen(ad::Tape&, const ParameterSet&);

  ad::Tape* tape_ = nullptr;
  bool trainable_ = false;
  std::map<std::string, ad::Var> vars_;
};

BoundParameters bind_trainable(ad::Tape& tape, const ParameterSet& params);
BoundParameters bind_frozen(ad::Tape& tape, const ParameterSet& params);

} // namespace rd2v
