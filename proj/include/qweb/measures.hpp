#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "optimize.hpp"
#include "statevec.hpp"

namespace qweb {

/// Parameters of the general maximally entangled two-qubit state
///   cos a (e^{i t}|00> + e^{i p}|11>)/sqrt2 + sin a (e^{i w}|01> - e^{i(t+p-w)}|10>)/sqrt2
/// with a in [0, pi/2] and arbitrary phases t, p, w.
struct MaxEntangledParams {
  double alpha = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  double omega = 0.0;

  void validate() const {
    if (alpha < -kTol || alpha > std::numbers::pi / 2 + kTol)
      throw std::invalid_argument("MaxEntangledParams: alpha outside [0, pi/2]");
  }
};

struct MeasureResult {
  std::string measure;
  double value = 0.0;
  std::string method;
  double tolerance = 0.0;
  bool converged = true;

  nlohmann::json to_json() const {
    return {{"measure", measure}, {"value", value}, {"method", method}, {"converged", converged}};
  }
};

//----------------------------------------------------------------------------
// Pure-state measures
//----------------------------------------------------------------------------

/// Entropy of entanglement (bits) of `psi` across `cut` | complement.
inline double entropy_of_entanglement(const PureState& psi, std::span<const std::size_t> cut) {
  std::vector<std::size_t> c(cut.begin(), cut.end());
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  if (c.empty() || c.size() >= psi.n_qubits() || c.back() >= psi.n_qubits())
    throw std::invalid_argument("entropy_of_entanglement: cut must be a proper nonempty subset");
  return vn_entropy(partial_trace(psi, c));
}

inline double entropy_of_entanglement(const PureState& psi, std::initializer_list<std::size_t> cut) {
  return entropy_of_entanglement(psi, std::span<const std::size_t>(cut.begin(), cut.size()));
}

inline PureState canonical_max_entangled(const MaxEntangledParams& p) {
  p.validate();
  const double c = std::cos(p.alpha) * M_SQRT1_2;
  const double s = std::sin(p.alpha) * M_SQRT1_2;
  return PureState::normalized(2, {c * std::polar(1.0, p.theta), s * std::polar(1.0, p.omega),
                                   -s * std::polar(1.0, p.theta + p.phi - p.omega), c * std::polar(1.0, p.phi)});
}

/// max_ij |rho_A - I/2| for a two-qubit pure state, taking the worse side.
inline double max_entanglement_deviation(const PureState& psi) {
  if (psi.n_qubits() != 2) throw std::invalid_argument("max_entanglement_deviation: expected 2 qubits");
  const MatrixX half = Matrix2::Identity() * 0.5;
  const double a = (partial_trace(psi, {0}).matrix() - half).cwiseAbs().maxCoeff();
  const double b = (partial_trace(psi, {1}).matrix() - half).cwiseAbs().maxCoeff();
  return std::max(a, b);
}

inline bool is_maximally_entangled(const PureState& psi, double tol = kTol) {
  return max_entanglement_deviation(psi) <= tol;
}

//----------------------------------------------------------------------------
// Two-qubit mixed-state measures (concurrence family)
//----------------------------------------------------------------------------

namespace detail {

inline void require_two_qubit(const DensityMatrix& rho, const char* who) {
  if (rho.dim() != 4) throw std::invalid_argument(std::string(who) + ": expected a 4x4 density matrix");
}

inline MatrixX psd_sqrt(const MatrixX& m) {
  Eigen::SelfAdjointEigenSolver<MatrixX> es(m);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

// Descending square roots of the eigenvalues of sqrt(rho) rho~ sqrt(rho),
// rho~ = (Y x Y) rho* (Y x Y).
inline Eigen::VectorXd spin_flip_roots(const DensityMatrix& rho) {
  Matrix4 yy = Matrix4::Zero();
  yy(0, 3) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  yy(3, 0) = -1.0;
  const MatrixX flipped = yy * rho.matrix().conjugate() * yy;
  const MatrixX root = psd_sqrt(rho.matrix());
  MatrixX r = root * flipped * root;
  r = 0.5 * (r + r.adjoint());
  Eigen::VectorXd ev = hermitian_eigenvalues(r).cwiseMax(0.0).cwiseSqrt();
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  return ev;
}

inline double formation_from_concurrence(double c) {
  c = std::clamp(c, 0.0, 1.0);
  return binary_entropy(0.5 * (1.0 + std::sqrt(1.0 - c * c)));
}

}  // namespace detail

inline double concurrence(const DensityMatrix& rho) {
  detail::require_two_qubit(rho, "concurrence");
  const auto l = detail::spin_flip_roots(rho);
  return std::max(0.0, l[0] - l[1] - l[2] - l[3]);
}

inline double entanglement_of_formation_2q(const DensityMatrix& rho) {
  detail::require_two_qubit(rho, "entanglement_of_formation_2q");
  return detail::formation_from_concurrence(concurrence(rho));
}

/// Maximum average concurrence over pure-state decompositions: the sum of
/// the spin-flip roots.
inline double concurrence_of_assistance(const DensityMatrix& rho) {
  detail::require_two_qubit(rho, "concurrence_of_assistance");
  return std::min(1.0, detail::spin_flip_roots(rho).sum());
}

/// Average entropy of entanglement of the ensemble obtained by measuring a
/// purifying system of `rho` in the orthonormal basis given by the columns
/// of `basis`.
inline double assisted_average_entropy(const DensityMatrix& rho, const MatrixX& basis) {
  Eigen::SelfAdjointEigenSolver<MatrixX> es(rho.matrix());
  const Eigen::VectorXd w = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const MatrixX& e = es.eigenvectors();
  double avg = 0.0;
  for (Eigen::Index m = 0; m < basis.cols(); ++m) {
    Eigen::Vector4cd branch = Eigen::Vector4cd::Zero();
    for (Eigen::Index k = 0; k < 4; ++k) branch += w[k] * std::conj(basis(k, m)) * e.col(k);
    const double p = branch.squaredNorm();
    if (p <= kProbabilityFloor) continue;
    branch /= std::sqrt(p);
    Matrix2 red;
    red(0, 0) = std::norm(branch[0]) + std::norm(branch[1]);
    red(1, 1) = std::norm(branch[2]) + std::norm(branch[3]);
    red(0, 1) = branch[0] * std::conj(branch[2]) + branch[1] * std::conj(branch[3]);
    red(1, 0) = std::conj(red(0, 1));
    avg += p * shannon_bits(hermitian_eigenvalues(red));
  }
  return avg;
}

// Unitary exp(iH) where H is the Hermitian matrix packed into 16 reals.
inline MatrixX unitary_from_params(std::span<const double> x) {
  MatrixX h = MatrixX::Zero(4, 4);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < 4; ++i) h(i, i) = x[k++];
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = i + 1; j < 4; ++j) {
      h(i, j) = Complex{x[k], x[k + 1]};
      h(j, i) = std::conj(h(i, j));
      k += 2;
    }
  Eigen::SelfAdjointEigenSolver<MatrixX> es(h);
  Eigen::VectorXcd phases(4);
  for (Eigen::Index i = 0; i < 4; ++i) phases[i] = std::polar(1.0, es.eigenvalues()[i]);
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

struct AssistanceResult {
  // Best certified lower bound on the entropic entanglement of assistance:
  // max(concurrence_based, joint_measurement).
  double value = 0.0;
  double concurrence_of_assistance = 0.0;
  // f(C_a): entanglement-of-formation curve applied to C_a. A lower bound
  // on the entropic quantity by convexity; equal to it when either is 1.
  double concurrence_based = 0.0;
  // Best average entropy found over projective measurements of a purifier.
  double joint_measurement = 0.0;
  // min(S(rho_A), S(rho_B)).
  double upper_bound = 0.0;
  bool converged = true;

  nlohmann::json to_json() const {
    return {{"measure", "entanglement_of_assistance"},
            {"value", value},
            {"method", "max(concurrence_of_assistance_curve, purifier_measurement_search)"},
            {"converged", converged},
            {"concurrence_of_assistance", concurrence_of_assistance},
            {"concurrence_based", concurrence_based},
            {"joint_measurement", joint_measurement},
            {"upper_bound", upper_bound}};
  }
};

/// Entanglement of assistance of a two-qubit state. The closed-form
/// concurrence route is always evaluated; the purifier-measurement search
/// runs only when that route has not already reached the two-qubit maximum.
inline AssistanceResult entanglement_of_assistance_2q(const DensityMatrix& rho, OptimizerConfig cfg = {.multistarts = 8}) {
  detail::require_two_qubit(rho, "entanglement_of_assistance_2q");
  AssistanceResult r;
  r.concurrence_of_assistance = concurrence_of_assistance(rho);
  r.concurrence_based = detail::formation_from_concurrence(r.concurrence_of_assistance);
  r.upper_bound = std::min(vn_entropy(partial_trace(rho, {0})), vn_entropy(partial_trace(rho, {1})));
  if (r.concurrence_based < 1.0 - kTol) {
    const Objective f = [&rho](std::span<const double> x) {
      return assisted_average_entropy(rho, unitary_from_params(x));
    };
    std::vector<std::vector<double>> starts;
    starts.emplace_back(16, 0.0);
    for (int s = 1; s < cfg.multistarts; ++s) {
      auto p = halton_point(static_cast<std::uint64_t>(s) + cfg.seed, 16);
      for (auto& v : p) v = (2.0 * v - 1.0) * std::numbers::pi;
      starts.push_back(std::move(p));
    }
    const auto best = multistart_maximize(f, starts, 0.5, cfg);
    r.joint_measurement = std::min(best.value, 1.0);
    r.converged = best.converged;
  } else {
    r.joint_measurement = r.concurrence_based;
  }
  r.value = std::clamp(std::max(r.concurrence_based, r.joint_measurement), 0.0, 1.0);
  return r;
}

//----------------------------------------------------------------------------
// Singlet fraction and closed-form bounds
//----------------------------------------------------------------------------

inline double overlap_with_max_entangled(const DensityMatrix& rho, std::span<const double> x) {
  // alpha outside [0, pi/2] still yields a maximally entangled state, so the
  // search runs unconstrained.
  const double c = std::cos(x[0]) * M_SQRT1_2;
  const double s = std::sin(x[0]) * M_SQRT1_2;
  Eigen::Vector4cd v(c * std::polar(1.0, x[1]), s * std::polar(1.0, x[3]),
                     -s * std::polar(1.0, x[1] + x[2] - x[3]), c * std::polar(1.0, x[2]));
  return (v.adjoint() * rho.matrix() * v)(0, 0).real();
}

inline MeasureResult singlet_fraction(const DensityMatrix& rho,
                                      OptimizerConfig cfg = {.multistarts = 32, .tolerance = 1e-8}) {
  detail::require_two_qubit(rho, "singlet_fraction");
  const Objective f = [&rho](std::span<const double> x) { return overlap_with_max_entangled(rho, x); };
  std::vector<std::vector<double>> starts;
  for (int s = 0; s < cfg.multistarts; ++s) {
    auto p = halton_point(static_cast<std::uint64_t>(s) + cfg.seed, 4);
    p[0] *= std::numbers::pi / 2;
    for (std::size_t i = 1; i < 4; ++i) p[i] *= 2 * std::numbers::pi;
    starts.push_back(std::move(p));
  }
  const auto best = multistart_maximize(f, starts, 0.4, cfg);
  return {"singlet_fraction", std::clamp(best.value, 0.0, 1.0), "multistart_nelder_mead", cfg.tolerance,
          best.converged};
}

/// Upper bound N / (2(N-1)) on the pair singlet fraction of an N-party state.
inline double singlet_fraction_bound(int n_parties) {
  if (n_parties < 2) throw std::invalid_argument("singlet_fraction_bound: N must be >= 2");
  return static_cast<double>(n_parties) / (2.0 * (n_parties - 1));
}

/// Optimal symmetric 1 -> N-1 cloning fidelity (2N-1) / (3(N-1)).
inline double cloning_fidelity_bound(int n_parties) {
  if (n_parties < 2) throw std::invalid_argument("cloning_fidelity_bound: N must be >= 2");
  return (2.0 * n_parties - 1.0) / (3.0 * (n_parties - 1));
}

}  // namespace qweb
