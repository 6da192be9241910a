#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "rd2v/autodiff.hpp"
#include "rd2v/matrix.hpp"
#include "rd2v/numeric.hpp"
#include "rd2v/rng.hpp"

namespace rd2v::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, SeededRng& rng,
                            double scale = 1.0) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = scale * rng.normal();
  return m;
}

/// Analytic gradient of a scalar graph with respect to its single input,
/// next to the central-difference estimate.
inline double gradient_error(const Matrix& x,
                             const std::function<ad::Var(ad::Tape&, ad::Var)>& build,
                             double h = 1e-5) {
  ad::Tape tape;
  const ad::Var leaf = tape.variable(x);
  tape.backward(build(tape, leaf));
  const Matrix analytic = leaf.grad();
  const auto f = [&](const Matrix& probe) {
    ad::Tape t(ad::GradMode::kDisabled);
    return build(t, t.constant(probe)).value().item();
  };
  return relative_error(analytic, finite_difference_gradient(f, x, h));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("rd2v_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

} // namespace rd2v::test
