#include "rd2v/gradcheck.hpp"

#include <algorithm>
#include <functional>

#include "rd2v/autodiff.hpp"
#include "rd2v/context_encoder.hpp"
#include "rd2v/feature_encoder.hpp"
#include "rd2v/numeric.hpp"
#include "rd2v/objectives.hpp"
#include "rd2v/rng.hpp"

namespace rd2v {

namespace {

using Builder = std::function<ad::Var(ad::Tape&, ad::Var)>;

Matrix random_matrix(std::size_t rows, std::size_t cols, SeededRng& rng, Real scale = 1.0) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = scale * rng.normal();
  return m;
}

std::size_t draw(SeededRng& rng, std::size_t lo, std::size_t hi) {
  return std::size_t(rng.uniform_int(std::int64_t(lo), std::int64_t(hi)));
}

// Analytic gradient of build(x) with respect to x versus central differences.
double compare(const Matrix& x, const Builder& build) {
  ad::Tape tape;
  const ad::Var leaf = tape.variable(x);
  tape.backward(build(tape, leaf));
  const Matrix analytic = leaf.grad();
  const auto f = [&](const Matrix& probe) {
    ad::Tape t(ad::GradMode::kDisabled);
    return build(t, t.constant(probe)).value().item();
  };
  return relative_error(analytic, finite_difference_gradient(f, x, kGradCheckStep));
}

MaskSpec random_mask(std::size_t T, SeededRng& rng) {
  MaskSpec m = MaskSpec::none(T);
  for (std::size_t t = 0; t < T; ++t) m.masked[t] = rng.bernoulli(0.5);
  m.masked[rng.below(T)] = true;
  return m;
}

NegativePool random_pool(std::size_t n, std::size_t d, SeededRng& rng) {
  NegativePool p;
  if (n == 0) return p;
  p.frames = random_matrix(n, d, rng);
  for (std::size_t i = 0; i < n; ++i) {
    p.provenance.push_back(rng.bernoulli(0.5) ? Provenance::kStandard : Provenance::kNonSemantic);
    p.source_index.push_back(i);
  }
  return p;
}

template <typename Fn>
GradCheckResult repeat(const char* name, std::size_t instances, std::uint64_t seed, Fn fn) {
  GradCheckResult r{name, instances, 0.0};
  SeededRng root(seed, std::string("gradcheck/") + name);
  for (std::size_t i = 0; i < instances; ++i) {
    SeededRng rng = root.child("instance", i);
    r.max_relative_error = std::max(r.max_relative_error, fn(rng));
  }
  return r;
}

} // namespace

GradCheckResult gradcheck_cosine(std::size_t instances, std::uint64_t seed) {
  return repeat("cosine_similarity", instances, seed, [](SeededRng& rng) {
    const std::size_t n = draw(rng, 1, 6), d = draw(rng, 2, 8);
    const Matrix q = random_matrix(1, d, rng);
    const Matrix c = random_matrix(n, d, rng);
    const Matrix w = random_matrix(1, n, rng);
    const double eq = compare(q, [&](ad::Tape& t, ad::Var x) {
      return ad::sum(ad::mul(ad::cosine_rows(x, t.constant(c)), t.constant(w)));
    });
    const double ec = compare(c, [&](ad::Tape& t, ad::Var x) {
      return ad::sum(ad::mul(ad::cosine_rows(t.constant(q), x), t.constant(w)));
    });
    return std::max(eq, ec);
  });
}

GradCheckResult gradcheck_log_sum_exp(std::size_t instances, std::uint64_t seed) {
  return repeat("log_sum_exp", instances, seed, [](SeededRng& rng) {
    const Matrix v = random_matrix(1, draw(rng, 1, 12), rng, 3.0);
    return compare(v, [](ad::Tape&, ad::Var x) { return ad::log_sum_exp(x); });
  });
}

GradCheckResult gradcheck_regression(std::size_t instances, std::uint64_t seed) {
  return repeat("regression_loss", instances, seed, [](SeededRng& rng) {
    const std::size_t T = draw(rng, 2, 8), D = draw(rng, 2, 6);
    const Matrix pre = random_matrix(T, D, rng);
    const Matrix tar = random_matrix(T, D, rng);
    const MaskSpec mask = random_mask(T, rng);
    const Real beta = rng.uniform(0.25, 2.0);
    return compare(pre, [&](ad::Tape&, ad::Var x) { return regression_loss(x, tar, mask, beta); });
  });
}

GradCheckResult gradcheck_contrastive(std::size_t instances, std::uint64_t seed) {
  return repeat("contrastive_loss", instances, seed, [](SeededRng& rng) {
    const std::size_t D = draw(rng, 3, 8), n = draw(rng, 1, 12);
    const Matrix pre = random_matrix(1, D, rng);
    const Matrix tar = random_matrix(1, D, rng);
    const NegativePool pool = random_pool(n, D, rng);
    const Real kappa = rng.uniform(0.05, 1.0);
    return compare(pre, [&](ad::Tape&, ad::Var x) {
      return contrastive_loss(x, tar.row(0), pool, kappa);
    });
  });
}

GradCheckResult gradcheck_step_objective(std::size_t instances, std::uint64_t seed) {
  return repeat("step_objective", instances, seed, [](SeededRng& rng) {
    const std::size_t D = draw(rng, 3, 6);
    LossConfig cfg;
    cfg.beta = rng.uniform(0.25, 2.0);
    cfg.kappa = rng.uniform(0.05, 0.5);
    cfg.lambda = rng.uniform(0.0, 2.0);
    struct Item {
      Matrix raw, tar;
      MaskSpec mask;
      std::vector<NegativePool> pools;
    };
    std::vector<Item> items(2);
    for (auto& it : items) {
      const std::size_t T = draw(rng, 3, 8);
      it.raw = random_matrix(T, D, rng);
      it.tar = random_matrix(T, D, rng);
      it.mask = random_mask(T, rng);
      for (std::size_t k = 0; k < it.mask.count(); ++k) {
        it.pools.push_back(random_pool(draw(rng, 0, 8), D, rng));
      }
    }
    double worst = 0.0;
    for (std::size_t which = 0; which < items.size(); ++which) {
      worst = std::max(worst, compare(items[which].raw, [&](ad::Tape& t, ad::Var x) {
        std::vector<ObjectiveInput> batch;
        for (std::size_t j = 0; j < items.size(); ++j) {
          const ad::Var raw = j == which ? x : t.constant(items[j].raw);
          batch.push_back({ad::normalize_rows(raw, kFrameNormEps), &items[j].tar, &items[j].mask,
                           items[j].pools});
        }
        return step_objective(batch, cfg).total;
      }));
    }
    return worst;
  });
}

GradCheckResult gradcheck_feature_encoder(std::size_t instances, std::uint64_t seed) {
  return repeat("feature_encoder", instances, seed, [](SeededRng& rng) {
    ConvSpec spec;
    spec.layers = {{4, 2, 3}, {3, 2, 4}};
    ParameterSet params;
    init_feature_encoder(spec, params, rng);
    for (auto& [_, m] : params) {
      for (auto& v : m.data()) v += 0.1 * rng.normal();
    }
    const std::size_t n = draw(rng, spec.receptive_field(), spec.receptive_field() + 12);
    const Matrix wave = random_matrix(n, 1, rng, 0.5);
    const Matrix readout = random_matrix(output_length(spec, n), spec.output_channels(), rng);
    double worst = 0.0;
    for (const auto& name : params.names()) {
      worst = std::max(worst, compare(params.at(name), [&](ad::Tape& t, ad::Var x) {
        const BoundParameters bound = bind_frozen(t, params).with(name, x);
        return ad::sum(ad::mul(encode(spec, bound, t.constant(wave)), t.constant(readout)));
      }));
    }
    return worst;
  });
}

GradCheckResult gradcheck_transformer(std::size_t instances, std::uint64_t seed) {
  return repeat("transformer", instances, seed, [](SeededRng& rng) {
    const TransformerConfig cfg{2, 8, 2, 12, 2, true};
    const std::size_t input_dim = 5;
    ParameterSet params;
    init_context_encoder(cfg, input_dim, params, rng);
    for (auto& [_, m] : params) {
      for (auto& v : m.data()) v += 0.1 * rng.normal();
    }
    const std::size_t T = draw(rng, 2, 6);
    const Matrix conv = random_matrix(T, input_dim, rng);
    const Matrix readout = random_matrix(T, cfg.model_dim, rng);
    const auto readout_of = [&](ad::Tape& t, const BoundParameters& bound, ad::Var input) {
      const auto layers = forward(cfg, bound, project_features(bound, input));
      return ad::sum(ad::mul(layers.back(), t.constant(readout)));
    };
    double worst = compare(conv, [&](ad::Tape& t, ad::Var x) {
      return readout_of(t, bind_frozen(t, params), x);
    });
    for (const auto& name : params.names()) {
      // The key bias shifts every score in a softmax row equally, so its
      // gradient is exactly zero; the mask embedding is unused here.
      if (name.ends_with("attn.bk") || name == "mask_embedding") continue;
      worst = std::max(worst, compare(params.at(name), [&](ad::Tape& t, ad::Var x) {
        return readout_of(t, bind_frozen(t, params).with(name, x), t.constant(conv));
      }));
    }
    return worst;
  });
}

std::vector<GradCheckResult> run_gradcheck_suite(std::size_t instances, std::uint64_t seed) {
  return {gradcheck_cosine(instances, seed),         gradcheck_log_sum_exp(instances, seed),
          gradcheck_regression(instances, seed),     gradcheck_contrastive(instances, seed),
          gradcheck_step_objective(instances, seed), gradcheck_feature_encoder(instances, seed),
          gradcheck_transformer(instances, seed)};
}

}  // namespace rd2v
