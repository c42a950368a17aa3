#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace qweb {

using Complex = std::complex<double>;
using Amplitudes = std::vector<Complex>;
using Matrix2 = Eigen::Matrix2cd;
using Matrix4 = Eigen::Matrix4cd;
using MatrixX = Eigen::MatrixXcd;
using Vector2 = Eigen::Vector2cd;

// Algebraic invariants (norm, hermiticity, unitarity, orthonormality).
inline constexpr double kTol = 1e-9;
// Branches below this probability are discarded.
inline constexpr double kProbabilityFloor = 1e-12;

inline constexpr Complex kI{0.0, 1.0};

// Raised when a state or operator violates a numerical invariant
// (norm, unitarity, trace, positivity).
struct InvariantError : std::domain_error {
  using std::domain_error::domain_error;
};

//============================================================================
// Index helpers
//============================================================================
//
// Qubit 0 is the most significant bit of a basis index, so for an n-qubit
// register the basis string |q0 q1 ... q_{n-1}> reads left to right.

inline constexpr std::size_t dim_of(std::size_t n_qubits) { return std::size_t{1} << n_qubits; }

inline constexpr std::size_t bit_mask(std::size_t n_qubits, std::size_t qubit) {
  return std::size_t{1} << (n_qubits - 1 - qubit);
}

inline constexpr int bit_of(std::size_t index, std::size_t n_qubits, std::size_t qubit) {
  return (index & bit_mask(n_qubits, qubit)) ? 1 : 0;
}

// Drops one qubit from an index, closing the gap.
inline constexpr std::size_t remove_bit(std::size_t index, std::size_t n_qubits, std::size_t qubit) {
  const std::size_t low_bits = n_qubits - 1 - qubit;
  const std::size_t low = index & ((std::size_t{1} << low_bits) - 1);
  const std::size_t high = index >> (low_bits + 1);
  return (high << low_bits) | low;
}

// Inverse of remove_bit: inserts `bit` at position `qubit` of an (n-1)-qubit index.
inline constexpr std::size_t insert_bit(std::size_t index, std::size_t n_qubits, std::size_t qubit, int bit) {
  const std::size_t low_bits = n_qubits - 1 - qubit;
  const std::size_t low = index & ((std::size_t{1} << low_bits) - 1);
  const std::size_t high = index >> low_bits;
  return (high << (low_bits + 1)) | (static_cast<std::size_t>(bit) << low_bits) | low;
}

//============================================================================
// PureState
//============================================================================

class PureState {
 public:
  // Validates length 2^n and unit norm within kTol.
  PureState(std::size_t n_qubits, Amplitudes amplitudes)
      : n_qubits_(n_qubits), amps_(std::move(amplitudes)) {
    if (amps_.size() != dim_of(n_qubits_))
      throw std::invalid_argument("PureState: expected " + std::to_string(dim_of(n_qubits_)) +
                                  " amplitudes, got " + std::to_string(amps_.size()));
    if (std::abs(norm() - 1.0) > kTol)
      throw InvariantError("PureState: norm " + std::to_string(norm()) + " differs from 1");
  }

  // Rescales to unit norm; throws on a (near) zero vector.
  static PureState normalized(std::size_t n_qubits, Amplitudes amplitudes) {
    double sq = 0.0;
    for (const auto& a : amplitudes) sq += std::norm(a);
    if (sq < kProbabilityFloor) throw InvariantError("PureState: cannot normalize a zero vector");
    const double scale = 1.0 / std::sqrt(sq);
    for (auto& a : amplitudes) a *= scale;
    return PureState(n_qubits, std::move(amplitudes));
  }

  static PureState basis_state(std::size_t n_qubits, std::size_t index) {
    Amplitudes amps(dim_of(n_qubits), Complex{0.0, 0.0});
    amps.at(index) = 1.0;
    return PureState(n_qubits, std::move(amps));
  }

  std::size_t n_qubits() const noexcept { return n_qubits_; }
  std::size_t dim() const noexcept { return amps_.size(); }
  std::span<const Complex> amplitudes() const noexcept { return amps_; }
  const Complex& operator[](std::size_t i) const { return amps_[i]; }

  double norm() const {
    double sq = 0.0;
    for (const auto& a : amps_) sq += std::norm(a);
    return std::sqrt(sq);
  }

  Eigen::VectorXcd to_vector() const {
    return Eigen::Map<const Eigen::VectorXcd>(amps_.data(), static_cast<Eigen::Index>(amps_.size()));
  }

  bool operator==(const PureState&) const = default;

 private:
  std::size_t n_qubits_;
  Amplitudes amps_;
};

inline PureState ket0() { return PureState::basis_state(1, 0); }
inline PureState ket1() { return PureState::basis_state(1, 1); }
inline PureState ket_plus() { return PureState(1, {M_SQRT1_2, M_SQRT1_2}); }
inline PureState ket_minus() { return PureState(1, {M_SQRT1_2, -M_SQRT1_2}); }
inline PureState ket_plus_i() { return PureState(1, {M_SQRT1_2, kI * M_SQRT1_2}); }

inline Complex inner(const PureState& a, const PureState& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("inner: dimension mismatch");
  Complex acc{0.0, 0.0};
  for (std::size_t i = 0; i < a.dim(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

// True iff min over delta of ||a - e^{i delta} b|| <= tol. The optimal phase is
// arg<b|a>; the residual norm is evaluated directly rather than through
// 1 - |<a|b>|, which loses all precision for tol near 1e-9.
inline bool states_equal_up_to_phase(const PureState& a, const PureState& b, double tol = kTol) {
  if (a.n_qubits() != b.n_qubits()) throw std::invalid_argument("states_equal_up_to_phase: size mismatch");
  const Complex overlap = inner(b, a);
  const Complex phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : Complex{1.0, 0.0};
  double sq = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) sq += std::norm(a[i] - phase * b[i]);
  return std::sqrt(sq) <= tol;
}

// Representative with the first amplitude of modulus > kTol real and positive.
inline PureState canonical_phase(const PureState& s) {
  Amplitudes amps(s.amplitudes().begin(), s.amplitudes().end());
  for (const auto& a : amps) {
    if (std::abs(a) > kTol) {
      const Complex phase = std::conj(a) / std::abs(a);
      for (auto& x : amps) x *= phase;
      break;
    }
  }
  return PureState(s.n_qubits(), std::move(amps));
}

//============================================================================
// DensityMatrix
//============================================================================

class DensityMatrix {
 public:
  // Validates hermiticity, unit trace and eigenvalues >= -kTol.
  explicit DensityMatrix(MatrixX m) : m_(std::move(m)) {
    const auto d = m_.rows();
    if (d != m_.cols() || d == 0 || (d & (d - 1)) != 0)
      throw std::invalid_argument("DensityMatrix: dimension must be a power of two");
    if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > kTol) throw InvariantError("DensityMatrix: not Hermitian");
    if (std::abs(m_.trace() - Complex{1.0, 0.0}) > kTol) throw InvariantError("DensityMatrix: trace differs from 1");
    if (d > 1) {
      Eigen::SelfAdjointEigenSolver<MatrixX> es(m_, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -kTol) throw InvariantError("DensityMatrix: negative eigenvalue");
    }
  }

  static DensityMatrix from_pure(const PureState& s) {
    const Eigen::VectorXcd v = s.to_vector();
    return DensityMatrix(v * v.adjoint());
  }

  static DensityMatrix maximally_mixed(std::size_t n_qubits) {
    const auto d = static_cast<Eigen::Index>(dim_of(n_qubits));
    return DensityMatrix(MatrixX::Identity(d, d) / static_cast<double>(d));
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  std::size_t n_qubits() const noexcept {
    std::size_t n = 0;
    while ((std::size_t{1} << n) < dim()) ++n;
    return n;
  }
  const MatrixX& matrix() const noexcept { return m_; }
  Complex operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

 private:
  MatrixX m_;
};

//============================================================================
// Small Hermitian eigenvalue helpers
//============================================================================

// Ascending eigenvalues of a Hermitian matrix; closed form for 2x2.
inline Eigen::VectorXd hermitian_eigenvalues(const MatrixX& m) {
  if (m.rows() == 1) return Eigen::VectorXd::Constant(1, m(0, 0).real());
  if (m.rows() == 2) {
    const double a = m(0, 0).real();
    const double d = m(1, 1).real();
    const double mean = 0.5 * (a + d);
    const double r = std::hypot(0.5 * (a - d), std::abs(m(0, 1)));
    Eigen::VectorXd ev(2);
    ev << mean - r, mean + r;
    return ev;
  }
  Eigen::SelfAdjointEigenSolver<MatrixX> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

// -sum p log2 p with 0 log 0 := 0 and negative round-off clipped.
inline double shannon_bits(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double x = p[i];
    if (x > 0.0) h -= x * std::log2(x);
  }
  return h;
}

inline double binary_entropy(double p) {
  Eigen::VectorXd v(2);
  v << p, 1.0 - p;
  return shannon_bits(v);
}

// Von Neumann entropy in bits, clamped to [0, log2 dim].
inline double vn_entropy(const DensityMatrix& rho) {
  const double h = shannon_bits(hermitian_eigenvalues(rho.matrix()));
  return std::clamp(h, 0.0, static_cast<double>(rho.n_qubits()));
}

// <chi|rho|chi>, clamped to [0, 1].
inline double fidelity_state(const DensityMatrix& rho, const PureState& chi) {
  if (rho.dim() != chi.dim()) throw std::invalid_argument("fidelity_state: dimension mismatch");
  const Eigen::VectorXcd v = chi.to_vector();
  const double f = (v.adjoint() * rho.matrix() * v)(0, 0).real();
  return std::clamp(f, 0.0, 1.0);
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("trace_distance: dimension mismatch");
  const Eigen::VectorXd ev = hermitian_eigenvalues(a.matrix() - b.matrix());
  return 0.5 * ev.cwiseAbs().sum();
}

//============================================================================
// Partial trace
//============================================================================

namespace detail {

inline std::vector<std::size_t> normalized_keep(std::span<const std::size_t> keep, std::size_t n_qubits) {
  std::vector<std::size_t> k(keep.begin(), keep.end());
  std::sort(k.begin(), k.end());
  k.erase(std::unique(k.begin(), k.end()), k.end());
  if (k.empty()) throw std::invalid_argument("partial_trace: keep set is empty");
  if (k.back() >= n_qubits) throw std::out_of_range("partial_trace: qubit index out of range");
  return k;
}

// Splits every full index into (kept index, traced index).
struct IndexSplit {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> traced;
};

inline IndexSplit split_indices(const std::vector<std::size_t>& keep, std::size_t n_qubits) {
  std::vector<bool> is_kept(n_qubits, false);
  for (auto q : keep) is_kept[q] = true;
  IndexSplit out;
  const std::size_t d = dim_of(n_qubits);
  out.kept.resize(d);
  out.traced.resize(d);
  for (std::size_t idx = 0; idx < d; ++idx) {
    std::size_t k = 0, t = 0;
    for (std::size_t q = 0; q < n_qubits; ++q) {
      const int b = bit_of(idx, n_qubits, q);
      if (is_kept[q]) k = (k << 1) | static_cast<std::size_t>(b);
      else t = (t << 1) | static_cast<std::size_t>(b);
    }
    out.kept[idx] = k;
    out.traced[idx] = t;
  }
  return out;
}

inline DensityMatrix hermitize(MatrixX m) {
  m = 0.5 * (m + m.adjoint());
  return DensityMatrix(std::move(m));
}

}  // namespace detail

// Reduced state on `keep`, kept qubits ordered by ascending index.
inline DensityMatrix partial_trace(const PureState& s, std::span<const std::size_t> keep) {
  const auto k = detail::normalized_keep(keep, s.n_qubits());
  const auto split = detail::split_indices(k, s.n_qubits());
  const auto dk = static_cast<Eigen::Index>(dim_of(k.size()));
  const auto dt = static_cast<Eigen::Index>(dim_of(s.n_qubits() - k.size()));
  MatrixX m = MatrixX::Zero(dk, dt);
  for (std::size_t idx = 0; idx < s.dim(); ++idx)
    m(static_cast<Eigen::Index>(split.kept[idx]), static_cast<Eigen::Index>(split.traced[idx])) = s[idx];
  return detail::hermitize(m * m.adjoint());
}

inline DensityMatrix partial_trace(const PureState& s, std::initializer_list<std::size_t> keep) {
  return partial_trace(s, std::span<const std::size_t>(keep.begin(), keep.size()));
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const std::size_t> keep) {
  const std::size_t n = rho.n_qubits();
  const auto k = detail::normalized_keep(keep, n);
  const auto split = detail::split_indices(k, n);
  const auto dk = static_cast<Eigen::Index>(dim_of(k.size()));
  MatrixX out = MatrixX::Zero(dk, dk);
  for (std::size_t i = 0; i < rho.dim(); ++i)
    for (std::size_t j = 0; j < rho.dim(); ++j)
      if (split.traced[i] == split.traced[j])
        out(static_cast<Eigen::Index>(split.kept[i]), static_cast<Eigen::Index>(split.kept[j])) += rho(i, j);
  return detail::hermitize(std::move(out));
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, std::initializer_list<std::size_t> keep) {
  return partial_trace(rho, std::span<const std::size_t>(keep.begin(), keep.size()));
}

//============================================================================
// Gates
//============================================================================

inline bool is_unitary(const MatrixX& u, double tol = kTol) {
  if (u.rows() != u.cols()) return false;
  return (u * u.adjoint() - MatrixX::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() <= tol;
}

namespace gates {
inline Matrix2 identity() { return Matrix2::Identity(); }
inline Matrix2 x() { Matrix2 m; m << 0, 1, 1, 0; return m; }
inline Matrix2 y() { Matrix2 m; m << 0, -kI, kI, 0; return m; }
inline Matrix2 z() { Matrix2 m; m << 1, 0, 0, -1; return m; }
inline Matrix2 h() { Matrix2 m; m << 1, 1, 1, -1; return m * M_SQRT1_2; }
inline Matrix2 phase(double angle) { Matrix2 m; m << 1, 0, 0, std::polar(1.0, angle); return m; }
// Real rotation |0> -> cos a|0> + sin a|1>, |1> -> -sin a|0> + cos a|1>.
inline Matrix2 rotation(double angle) {
  Matrix2 m;
  m << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return m;
}
// Euler form Rz(a) Ry(b) Rz(c); covers SU(2).
inline Matrix2 euler(double a, double b, double c) {
  Matrix2 rz_a, ry_b, rz_c;
  rz_a << std::polar(1.0, -a / 2), 0, 0, std::polar(1.0, a / 2);
  ry_b << std::cos(b / 2), -std::sin(b / 2), std::sin(b / 2), std::cos(b / 2);
  rz_c << std::polar(1.0, -c / 2), 0, 0, std::polar(1.0, c / 2);
  return rz_a * ry_b * rz_c;
}
}  // namespace gates

inline PureState apply_one_qubit(const PureState& s, const Matrix2& u, std::size_t target) {
  if (target >= s.n_qubits()) throw std::out_of_range("apply_one_qubit: target out of range");
  if (!is_unitary(u)) throw InvariantError("apply_one_qubit: matrix is not unitary");
  const std::size_t n = s.n_qubits();
  const std::size_t mask = bit_mask(n, target);
  Amplitudes out(s.dim());
  for (std::size_t idx = 0; idx < s.dim(); ++idx) {
    if (idx & mask) continue;
    const Complex a0 = s[idx];
    const Complex a1 = s[idx | mask];
    out[idx] = u(0, 0) * a0 + u(0, 1) * a1;
    out[idx | mask] = u(1, 0) * a0 + u(1, 1) * a1;
  }
  return PureState(n, std::move(out));
}

// `u` acts on the ordered pair (q1, q2) with q1 as the high bit of its 4x4 index.
inline PureState apply_two_qubit(const PureState& s, const Matrix4& u, std::size_t q1, std::size_t q2) {
  const std::size_t n = s.n_qubits();
  if (q1 >= n || q2 >= n) throw std::out_of_range("apply_two_qubit: target out of range");
  if (q1 == q2) throw std::invalid_argument("apply_two_qubit: targets coincide");
  if (!is_unitary(u)) throw InvariantError("apply_two_qubit: matrix is not unitary");
  const std::size_t m1 = bit_mask(n, q1);
  const std::size_t m2 = bit_mask(n, q2);
  Amplitudes out(s.dim());
  for (std::size_t idx = 0; idx < s.dim(); ++idx) {
    if (idx & (m1 | m2)) continue;
    const std::array<std::size_t, 4> slots{idx, idx | m2, idx | m1, idx | m1 | m2};
    for (int r = 0; r < 4; ++r) {
      Complex acc{0.0, 0.0};
      for (int c = 0; c < 4; ++c) acc += u(r, c) * s[slots[c]];
      out[slots[r]] = acc;
    }
  }
  return PureState(n, std::move(out));
}

inline PureState embed_product(std::span<const PureState> factors) {
  if (factors.empty()) throw std::invalid_argument("embed_product: no factors");
  Amplitudes amps{Complex{1.0, 0.0}};
  std::size_t n = 0;
  for (const auto& f : factors) {
    Amplitudes next;
    next.reserve(amps.size() * f.dim());
    for (const auto& a : amps)
      for (const auto& b : f.amplitudes()) next.push_back(a * b);
    amps = std::move(next);
    n += f.n_qubits();
  }
  return PureState::normalized(n, std::move(amps));
}

inline PureState embed_product(std::initializer_list<PureState> factors) {
  return embed_product(std::span<const PureState>(factors.begin(), factors.size()));
}

//============================================================================
// Bases and measurement
//============================================================================

struct BlochAngles {
  double polar = 0.0;
  double azimuthal = 0.0;
  bool operator==(const BlochAngles&) const = default;
};

class QubitBasis {
 public:
  QubitBasis(Vector2 b0, Vector2 b1, std::optional<BlochAngles> angles = std::nullopt)
      : b0_(std::move(b0)), b1_(std::move(b1)), angles_(angles) {
    const double n0 = b0_.squaredNorm();
    const double n1 = b1_.squaredNorm();
    const double overlap = std::abs(b0_.dot(b1_));
    if (std::abs(n0 - 1.0) > kTol || std::abs(n1 - 1.0) > kTol || overlap > kTol)
      throw InvariantError("QubitBasis: vectors are not orthonormal");
  }

  static QubitBasis computational() { return {Vector2(1, 0), Vector2(0, 1), BlochAngles{0.0, 0.0}}; }

  // |0'> = |+>, |1'> = |->.
  static QubitBasis hadamard() {
    return {Vector2(M_SQRT1_2, M_SQRT1_2), Vector2(M_SQRT1_2, -M_SQRT1_2),
            BlochAngles{std::numbers::pi / 2, 0.0}};
  }

  // |0'> = |->, |1'> = |+>: the Hadamard pair with outcome labels exchanged.
  static QubitBasis minus_plus() { return {Vector2(M_SQRT1_2, -M_SQRT1_2), Vector2(M_SQRT1_2, M_SQRT1_2)}; }

  // b0 = (cos(t/2), e^{i p} sin(t/2)), b1 = (-e^{-i p} sin(t/2), cos(t/2)).
  static QubitBasis from_angles(double polar, double azimuthal) {
    const double c = std::cos(polar / 2);
    const double s = std::sin(polar / 2);
    return {Vector2(c, std::polar(s, azimuthal)), Vector2(-std::polar(s, -azimuthal), c),
            BlochAngles{polar, azimuthal}};
  }

  const Vector2& b0() const noexcept { return b0_; }
  const Vector2& b1() const noexcept { return b1_; }
  const Vector2& vector(int bit) const { return bit == 0 ? b0_ : b1_; }
  const std::optional<BlochAngles>& angles() const noexcept { return angles_; }

  // Columns are b0, b1; maps the computational basis onto this one.
  Matrix2 unitary() const {
    Matrix2 u;
    u.col(0) = b0_;
    u.col(1) = b1_;
    return u;
  }

  PureState ket(int bit) const { return PureState(1, {vector(bit)(0), vector(bit)(1)}); }

 private:
  Vector2 b0_;
  Vector2 b1_;
  std::optional<BlochAngles> angles_;
};

struct BranchOutcome {
  int outcome_bit = 0;
  double probability = 0.0;
  // Empty when probability <= kProbabilityFloor. A one-qubit register
  // collapses to the zero-qubit scalar state [1].
  std::optional<PureState> post_state;
};

// Projects `target` onto basis vector `bit` and removes it from the register.
inline BranchOutcome project_onto(const PureState& s, std::size_t target, const QubitBasis& basis, int bit) {
  const std::size_t n = s.n_qubits();
  if (target >= n) throw std::out_of_range("measure: target out of range");
  const Vector2& v = basis.vector(bit);
  const Complex c0 = std::conj(v(0));
  const Complex c1 = std::conj(v(1));
  Amplitudes out(dim_of(n - 1));
  double prob = 0.0;
  for (std::size_t r = 0; r < out.size(); ++r) {
    const Complex a = c0 * s[insert_bit(r, n, target, 0)] + c1 * s[insert_bit(r, n, target, 1)];
    out[r] = a;
    prob += std::norm(a);
  }
  BranchOutcome b{bit, std::clamp(prob, 0.0, 1.0), std::nullopt};
  if (prob > kProbabilityFloor) b.post_state = PureState::normalized(n - 1, std::move(out));
  return b;
}

// Both branches with exact probabilities.
inline std::array<BranchOutcome, 2> measure_in_basis(const PureState& s, std::size_t target, const QubitBasis& basis) {
  return {project_onto(s, target, basis, 0), project_onto(s, target, basis, 1)};
}

// One branch drawn from the Born distribution.
inline BranchOutcome measure_in_basis(const PureState& s, std::size_t target, const QubitBasis& basis,
                                      std::mt19937_64& rng) {
  auto zero = project_onto(s, target, basis, 0);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < zero.probability) return zero;
  return project_onto(s, target, basis, 1);
}

inline BranchOutcome measure_in_basis(const PureState& s, std::size_t target, const QubitBasis& basis,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return measure_in_basis(s, target, basis, rng);
}

//============================================================================
// Random states
//============================================================================

inline PureState random_state(std::size_t n_qubits, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Amplitudes amps(dim_of(n_qubits));
  for (auto& a : amps) {
    const double re = g(rng);
    const double im = g(rng);
    a = {re, im};
  }
  return PureState::normalized(n_qubits, std::move(amps));
}

inline PureState haar_qubit(std::mt19937_64& rng) { return random_state(1, rng); }

//============================================================================
// JSON
//============================================================================

inline nlohmann::json state_to_json(const PureState& s) {
  nlohmann::json amps = nlohmann::json::array();
  for (const auto& a : s.amplitudes()) amps.push_back({a.real(), a.imag()});
  return {{"n_qubits", s.n_qubits()}, {"amplitudes", std::move(amps)}};
}

// Accepts norms within 1e-6 of one; anything within kTol is kept bit-exact,
// anything between kTol and 1e-6 is renormalized.
inline PureState state_from_json(const nlohmann::json& j) {
  const auto n = j.at("n_qubits").get<std::size_t>();
  if (n < 1 || n > 24) throw std::invalid_argument("state JSON: n_qubits out of range");
  const auto& arr = j.at("amplitudes");
  if (!arr.is_array() || arr.size() != dim_of(n))
    throw std::invalid_argument("state JSON: expected " + std::to_string(dim_of(n)) + " amplitudes");
  Amplitudes amps;
  amps.reserve(arr.size());
  double sq = 0.0;
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2) throw std::invalid_argument("state JSON: amplitude must be [re, im]");
    amps.emplace_back(pair[0].get<double>(), pair[1].get<double>());
    sq += std::norm(amps.back());
  }
  const double norm = std::sqrt(sq);
  if (std::abs(norm - 1.0) > 1e-6)
    throw InvariantError("state JSON: norm " + std::to_string(norm) + " violates the 1e-6 tolerance");
  if (std::abs(norm - 1.0) > kTol) return PureState::normalized(n, std::move(amps));
  return PureState(n, std::move(amps));
}

}  // namespace qweb
