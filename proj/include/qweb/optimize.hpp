#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace qweb {

struct OptimizerConfig {
  int multistarts = 16;
  int max_iterations = 4000;
  // Convergence when the simplex size drops below this.
  double tolerance = 1e-7;
  std::uint64_t seed = 0;

  void validate() const {
    if (multistarts < 1) throw std::invalid_argument("OptimizerConfig: multistarts must be >= 1");
    if (!(tolerance > 0.0)) throw std::invalid_argument("OptimizerConfig: tolerance must be positive");
    if (max_iterations < 1) throw std::invalid_argument("OptimizerConfig: max_iterations must be >= 1");
  }
};

using Objective = std::function<double(std::span<const double>)>;

struct OptimumPoint {
  std::vector<double> x;
  double value = 0.0;
  long evaluations = 0;
  bool converged = false;
};

// Radical-inverse low-discrepancy point in [0,1)^dim.
inline std::vector<double> halton_point(std::uint64_t index, std::size_t dim) {
  static constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                    59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113};
  if (dim > std::size(kPrimes)) throw std::invalid_argument("halton_point: dimension too large");
  std::vector<double> p(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    const auto base = static_cast<std::uint64_t>(kPrimes[d]);
    double f = 1.0, r = 0.0;
    for (std::uint64_t i = index; i > 0; i /= base) {
      f /= static_cast<double>(base);
      r += f * static_cast<double>(i % base);
    }
    p[d] = r;
  }
  return p;
}

namespace detail {

struct GslMinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* s) const { gsl_multimin_fminimizer_free(s); }
};
struct GslVectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
using GslMinimizer = std::unique_ptr<gsl_multimin_fminimizer, GslMinimizerDeleter>;
using GslVector = std::unique_ptr<gsl_vector, GslVectorDeleter>;

inline GslVector make_vector(std::span<const double> xs) {
  GslVector v(gsl_vector_alloc(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) gsl_vector_set(v.get(), i, xs[i]);
  return v;
}

struct Trampoline {
  const Objective* f;
  long* evaluations;
  std::vector<double> scratch;
};

inline double negated(const gsl_vector* x, void* params) {
  auto* t = static_cast<Trampoline*>(params);
  for (std::size_t i = 0; i < t->scratch.size(); ++i) t->scratch[i] = gsl_vector_get(x, i);
  ++*t->evaluations;
  const double v = (*t->f)(t->scratch);
  return std::isfinite(v) ? -v : 1e300;
}

inline void silence_gsl() {
  static const bool once = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)once;
}

}  // namespace detail

// Local Nelder-Mead maximization (GSL nmsimplex2). After the first
// convergence the simplex is rebuilt around the incumbent with a smaller
// step, which recovers from premature collapse.
inline OptimumPoint nelder_mead_maximize(const Objective& f, std::vector<double> x0, double step,
                                         int max_iterations, double tolerance) {
  if (x0.empty()) {
    OptimumPoint p;
    p.value = f(x0);
    p.evaluations = 1;
    p.converged = true;
    return p;
  }
  detail::silence_gsl();
  OptimumPoint best;
  best.x = std::move(x0);
  long evals = 0;
  detail::Trampoline tramp{&f, &evals, std::vector<double>(best.x.size())};
  best.value = f(best.x);
  ++evals;

  const std::size_t n = best.x.size();
  gsl_multimin_function func{&detail::negated, n, &tramp};
  int iterations_left = max_iterations;
  bool converged = false;
  double current_step = step;
  for (int restart = 0; restart < 3 && iterations_left > 0; ++restart) {
    detail::GslMinimizer s(gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n));
    auto x = detail::make_vector(best.x);
    detail::GslVector steps(gsl_vector_alloc(n));
    gsl_vector_set_all(steps.get(), current_step);
    gsl_multimin_fminimizer_set(s.get(), &func, x.get(), steps.get());
    converged = false;
    // A simplex sliding along a flat ridge of optima never shrinks, so a
    // long run without any value improvement also counts as converged.
    double incumbent = s->fval;
    int stalled = 0;
    const int stall_window = 50 * static_cast<int>(n);
    while (iterations_left-- > 0) {
      if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), tolerance) == GSL_SUCCESS) {
        converged = true;
        break;
      }
      if (incumbent - s->fval > 1e-14 * (1.0 + std::abs(s->fval))) {
        incumbent = s->fval;
        stalled = 0;
      } else if (++stalled >= stall_window) {
        converged = true;
        break;
      }
    }
    const double v = -s->fval;
    const double gain = v - best.value;
    if (v >= best.value) {
      for (std::size_t i = 0; i < n; ++i) best.x[i] = gsl_vector_get(s->x, i);
      best.value = v;
    }
    if (converged && gain < 1e-12) break;
    current_step = std::max(current_step * 0.1, 10 * tolerance);
  }
  best.evaluations = evals;
  best.converged = converged;
  return best;
}

// Deterministic reduction over local searches: maximum value; among values
// within `tie_tol` of it, the lexicographically smallest (wrapped) point.
inline OptimumPoint reduce_optima(std::span<const OptimumPoint> candidates, double tie_tol = 1e-12) {
  if (candidates.empty()) throw std::invalid_argument("reduce_optima: no candidates");
  double top = candidates.front().value;
  long evals = 0;
  for (const auto& c : candidates) {
    top = std::max(top, c.value);
    evals += c.evaluations;
  }
  const OptimumPoint* chosen = nullptr;
  for (const auto& c : candidates) {
    if (c.value < top - tie_tol) continue;
    if (!chosen || std::lexicographical_compare(c.x.begin(), c.x.end(), chosen->x.begin(), chosen->x.end()))
      chosen = &c;
  }
  OptimumPoint out = *chosen;
  out.evaluations = evals;
  return out;
}

// Multistart maximization from explicit start points; `wrap` maps a raw
// optimizer point back to its canonical domain before reduction.
inline OptimumPoint multistart_maximize(const Objective& f, std::span<const std::vector<double>> starts,
                                        double step, const OptimizerConfig& cfg,
                                        const std::function<void(std::vector<double>&)>& wrap = {}) {
  cfg.validate();
  std::vector<OptimumPoint> results;
  results.reserve(starts.size());
  for (const auto& s : starts) {
    auto r = nelder_mead_maximize(f, s, step, cfg.max_iterations, cfg.tolerance);
    if (wrap) wrap(r.x);
    results.push_back(std::move(r));
  }
  return reduce_optima(results);
}

}  // namespace qweb
