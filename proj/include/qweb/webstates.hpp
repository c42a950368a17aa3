#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "measures.hpp"
#include "statevec.hpp"

namespace qweb {

//============================================================================
// BitString
//============================================================================

struct BitString {
  std::vector<std::uint8_t> bits;

  static BitString from_index(std::size_t index, std::size_t length) {
    BitString s;
    s.bits.resize(length);
    for (std::size_t q = 0; q < length; ++q) s.bits[q] = static_cast<std::uint8_t>(bit_of(index, length, q));
    return s;
  }

  static BitString parse(const std::string& text) {
    BitString s;
    for (char ch : text) {
      if (ch != '0' && ch != '1') throw std::invalid_argument("BitString: invalid character in '" + text + "'");
      s.bits.push_back(static_cast<std::uint8_t>(ch - '0'));
    }
    return s;
  }

  std::size_t length() const noexcept { return bits.size(); }
  int parity() const noexcept {
    int p = 0;
    for (auto b : bits) p ^= b;
    return p;
  }
  std::size_t index() const noexcept {
    std::size_t i = 0;
    for (auto b : bits) i = (i << 1) | b;
    return i;
  }
  std::string str() const {
    std::string out;
    for (auto b : bits) out.push_back(static_cast<char>('0' + b));
    return out;
  }

  auto operator<=>(const BitString&) const = default;
};

inline std::vector<BitString> all_strings(std::size_t length) {
  std::vector<BitString> out;
  for (std::size_t i = 0; i < dim_of(length); ++i) out.push_back(BitString::from_index(i, length));
  return out;
}

inline std::vector<BitString> even_strings(std::size_t length) {
  std::vector<BitString> out;
  for (auto& s : all_strings(length))
    if (s.parity() == 0) out.push_back(std::move(s));
  return out;
}

// Wrap-aware distance between two angles.
inline double angle_distance(double a, double b) {
  const double d = std::remainder(a - b, 2 * std::numbers::pi);
  return std::abs(d);
}

inline double wrap_angle(double a) {
  double r = std::fmod(a, 2 * std::numbers::pi);
  if (r < 0) r += 2 * std::numbers::pi;
  return r;
}

//============================================================================
// Web-state family: sum over even strings of e^{i theta(s)} |s>
//============================================================================

struct WebStateSpec {
  std::size_t n_parties = 3;
  std::map<BitString, double> phases;

  void validate() const {
    if (n_parties < 3) throw std::invalid_argument("WebStateSpec: n_parties must be >= 3");
    const auto expected = even_strings(n_parties);
    if (phases.size() != expected.size())
      throw std::invalid_argument("WebStateSpec: expected " + std::to_string(expected.size()) + " phases, got " +
                                  std::to_string(phases.size()));
    for (const auto& s : expected)
      if (!phases.contains(s)) throw std::invalid_argument("WebStateSpec: missing phase for " + s.str());
  }

  static WebStateSpec zero_phases(std::size_t n) {
    WebStateSpec spec{n, {}};
    for (auto& s : even_strings(n)) spec.phases.emplace(std::move(s), 0.0);
    return spec;
  }

  nlohmann::json to_json() const {
    nlohmann::json ph = nlohmann::json::object();
    for (const auto& [s, theta] : phases) ph[s.str()] = theta;
    return {{"n", n_parties}, {"phases", std::move(ph)}};
  }

  static WebStateSpec from_json(const nlohmann::json& j) {
    WebStateSpec spec;
    spec.n_parties = j.at("n").get<std::size_t>();
    for (const auto& [key, value] : j.at("phases").items()) {
      auto s = BitString::parse(key);
      if (s.length() != spec.n_parties) throw std::invalid_argument("WebStateSpec: key length mismatch: " + key);
      if (s.parity() != 0) throw std::invalid_argument("WebStateSpec: odd-parity key " + key);
      spec.phases[std::move(s)] = value.get<double>();
    }
    spec.validate();
    return spec;
  }

  bool operator==(const WebStateSpec&) const = default;
};

inline PureState make_web_state(const WebStateSpec& spec) {
  spec.validate();
  const double amp = 1.0 / std::sqrt(static_cast<double>(dim_of(spec.n_parties - 1)));
  Amplitudes amps(dim_of(spec.n_parties), Complex{0.0, 0.0});
  for (const auto& [s, theta] : spec.phases) amps[s.index()] = std::polar(amp, theta);
  return PureState(spec.n_parties, std::move(amps));
}

inline PureState make_ghz(std::size_t n) {
  if (n < 2) throw std::invalid_argument("make_ghz: N must be >= 2");
  Amplitudes amps(dim_of(n), Complex{0.0, 0.0});
  amps.front() = M_SQRT1_2;
  amps.back() = M_SQRT1_2;
  return PureState(n, std::move(amps));
}

inline std::pair<WebStateSpec, PureState> random_web_state(std::size_t n, std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("random_web_state: N must be >= 3");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
  WebStateSpec spec{n, {}};
  for (auto& s : even_strings(n)) spec.phases.emplace(std::move(s), angle(rng));
  auto state = make_web_state(spec);
  return {std::move(spec), std::move(state)};
}

//============================================================================
// Preparation bases
//============================================================================

struct PreparationBases {
  std::vector<QubitBasis> per_party;
  bool context_free = true;
  // Contextual states: for each unordered target pair (i < j), the basis of
  // every party (entries for i and j are ignored).
  std::map<std::pair<std::size_t, std::size_t>, std::vector<QubitBasis>> per_pair;

  static PreparationBases uniform(std::size_t n, const QubitBasis& b) {
    return {std::vector<QubitBasis>(n, b), true, {}};
  }
  // GHZ_N pairs with the Hadamard basis (|0'> = |+>).
  static PreparationBases ghz(std::size_t n) { return uniform(n, QubitBasis::hadamard()); }
  // Even-parity family states are stored in their preparation frame.
  static PreparationBases computational(std::size_t n) { return uniform(n, QubitBasis::computational()); }

  std::size_t size() const noexcept { return per_party.size(); }

  const QubitBasis& basis_for(std::size_t party, std::size_t i, std::size_t j) const {
    if (context_free) return per_party.at(party);
    const auto key = std::minmax(i, j);
    const auto it = per_pair.find({key.first, key.second});
    if (it == per_pair.end())
      throw std::invalid_argument("PreparationBases: no basis map for pair (" + std::to_string(key.first) + "," +
                                  std::to_string(key.second) + ")");
    return it->second.at(party);
  }

  // Bases of the register left after `party` has been measured out.
  PreparationBases without(std::size_t party) const {
    if (!context_free) throw std::invalid_argument("PreparationBases::without: contextual bases not supported");
    PreparationBases out = *this;
    out.per_party.erase(out.per_party.begin() + static_cast<std::ptrdiff_t>(party));
    return out;
  }
};

// Coordinates of `s` in the product preparation basis.
inline PureState to_preparation_frame(const PureState& s, const PreparationBases& bases) {
  PureState out = s;
  for (std::size_t q = 0; q < s.n_qubits(); ++q) out = apply_one_qubit(out, bases.per_party.at(q).unitary().adjoint(), q);
  return out;
}

inline PureState from_preparation_frame(const PureState& coords, const PreparationBases& bases) {
  PureState out = coords;
  for (std::size_t q = 0; q < coords.n_qubits(); ++q) out = apply_one_qubit(out, bases.per_party.at(q).unitary(), q);
  return out;
}

//============================================================================
// Pair residuals and verification
//============================================================================

struct PairResidual {
  BitString outcome;  // outcomes of the measured parties in ascending party order
  double probability = 0.0;
  PureState state;  // two qubits ordered (min(i,j), max(i,j))
};

namespace detail {

inline void enumerate_residuals(const PureState& s, const std::vector<std::size_t>& measured,
                                const std::vector<const QubitBasis*>& bases, std::size_t depth, double prob,
                                std::vector<std::uint8_t>& outcome, std::vector<PairResidual>& out) {
  if (depth == measured.size()) {
    BitString bs;
    bs.bits.assign(outcome.rbegin(), outcome.rend());
    out.push_back({std::move(bs), prob, s});
    return;
  }
  // Highest index first so lower indices are unaffected by qubit removal.
  const std::size_t q = measured[measured.size() - 1 - depth];
  const QubitBasis& b = *bases[measured.size() - 1 - depth];
  for (const auto& branch : measure_in_basis(s, q, b)) {
    outcome.push_back(static_cast<std::uint8_t>(branch.outcome_bit));
    const double p = prob * branch.probability;
    if (branch.post_state && p > kProbabilityFloor)
      enumerate_residuals(*branch.post_state, measured, bases, depth + 1, p, outcome, out);
    outcome.pop_back();
  }
}

}  // namespace detail

/// Every outcome of measuring all parties except (i, j) with `bases`
/// (one basis per party, entries for i and j unused). Branches below the
/// probability floor are not outcomes and are omitted.
inline std::vector<PairResidual> pair_residuals(const PureState& s, std::size_t i, std::size_t j,
                                                std::span<const QubitBasis> bases) {
  const std::size_t n = s.n_qubits();
  if (i == j || i >= n || j >= n) throw std::invalid_argument("pair_residuals: invalid pair");
  if (bases.size() != n) throw std::invalid_argument("pair_residuals: basis count mismatch");
  std::vector<std::size_t> measured;
  std::vector<const QubitBasis*> bs;
  for (std::size_t q = 0; q < n; ++q)
    if (q != i && q != j) {
      measured.push_back(q);
      bs.push_back(&bases[q]);
    }
  std::vector<PairResidual> out;
  std::vector<std::uint8_t> outcome;
  detail::enumerate_residuals(s, measured, bs, 0, 1.0, outcome, out);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.outcome < b.outcome; });
  return out;
}

inline std::vector<PairResidual> pair_residuals(const PureState& s, std::size_t i, std::size_t j,
                                                const PreparationBases& bases) {
  std::vector<QubitBasis> per;
  for (std::size_t q = 0; q < s.n_qubits(); ++q) per.push_back(bases.basis_for(q, i, j));
  return pair_residuals(s, i, j, per);
}

struct VerificationCase {
  std::pair<std::size_t, std::size_t> pair;
  BitString outcome;
  double probability = 0.0;
  double deviation = 0.0;
};

struct WebVerificationReport {
  std::vector<VerificationCase> cases;
  double tolerance = kTol;
  double worst_deviation = 0.0;
  std::optional<std::size_t> worst_case;
  bool pass = true;

  nlohmann::json to_json() const {
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : cases)
      cs.push_back({{"pair", {c.pair.first, c.pair.second}},
                    {"outcome", c.outcome.str()},
                    {"probability", c.probability},
                    {"deviation", c.deviation}});
    nlohmann::json worst = nullptr;
    if (worst_case) worst = cs[*worst_case];
    return {{"pass", pass}, {"tolerance", tolerance}, {"worst_deviation", worst_deviation},
            {"worst_case", worst}, {"cases", std::move(cs)}};
  }
};

/// Exhaustive check that every pair is left maximally entangled by every
/// outcome of the remaining parties measuring in their preparation bases.
inline WebVerificationReport verify_web_state(const PureState& s, const PreparationBases& bases, double tol = kTol) {
  const std::size_t n = s.n_qubits();
  if (n < 3) throw std::invalid_argument("verify_web_state: need at least 3 parties");
  if (!bases.context_free) throw std::invalid_argument("verify_web_state: bases must be context-free");
  if (bases.size() != n) throw std::invalid_argument("verify_web_state: register/basis count mismatch");
  WebVerificationReport report;
  report.tolerance = tol;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (const auto& r : pair_residuals(s, i, j, bases)) {
        const double dev = max_entanglement_deviation(r.state);
        report.cases.push_back({{i, j}, r.outcome, r.probability, dev});
        if (!report.worst_case || dev > report.worst_deviation) {
          report.worst_deviation = dev;
          report.worst_case = report.cases.size() - 1;
        }
      }
  report.pass = report.worst_deviation <= tol;
  return report;
}

/// Post-measurement state of the other N-1 parties after `party` measures
/// in its preparation basis and obtains `outcome`.
inline PureState residual_after_measurement(const PureState& s, const PreparationBases& bases, std::size_t party,
                                            int outcome) {
  if (party >= s.n_qubits()) throw std::out_of_range("residual_after_measurement: party out of range");
  auto b = project_onto(s, party, bases.per_party.at(party), outcome);
  if (!b.post_state) throw std::domain_error("residual_after_measurement: zero-probability branch");
  return *std::move(b.post_state);
}

//============================================================================
// Canonical form over the preparation frame of all parties
//============================================================================

struct CanonicalBranch {
  double c = 0.0;
  double alpha = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  double omega = 0.0;
};

/// Parties 0 and 1 hold the target pair; each string s over parties 2..N-1
/// carries the coefficient c_s and the pair state parameters.
struct CanonicalFormParams {
  std::size_t n_parties = 3;
  std::map<BitString, CanonicalBranch> branches;
  double gamma = 0.0;

  void validate() const {
    if (n_parties < 3) throw std::invalid_argument("CanonicalFormParams: n_parties must be >= 3");
    if (branches.size() != dim_of(n_parties - 2))
      throw std::invalid_argument("CanonicalFormParams: expected one branch per string of length N-2");
    double sq = 0.0;
    for (const auto& [s, b] : branches) {
      if (s.length() != n_parties - 2) throw std::invalid_argument("CanonicalFormParams: string length mismatch");
      if (b.c < 0.0) throw std::invalid_argument("CanonicalFormParams: negative coefficient");
      if (b.alpha < -kTol || b.alpha > std::numbers::pi / 2 + kTol)
        throw std::invalid_argument("CanonicalFormParams: alpha outside [0, pi/2]");
      sq += b.c * b.c;
    }
    if (std::abs(sq - 1.0) > kTol) throw InvariantError("CanonicalFormParams: sum of c_s^2 differs from 1");
  }

  /// Parameters obeying every exchange constraint: uniform c, alpha_{p(s)}
  /// with alpha_1 = pi/2 - alpha_0, omega_s = phi_s + gamma + p(s) pi.
  static CanonicalFormParams constrained(std::size_t n, double alpha0, double gamma, std::span<const double> thetas,
                                         std::span<const double> phis) {
    CanonicalFormParams p{n, {}, gamma};
    const auto strings = all_strings(n - 2);
    if (thetas.size() != strings.size() || phis.size() != strings.size())
      throw std::invalid_argument("CanonicalFormParams::constrained: phase count mismatch");
    const double c = 1.0 / std::sqrt(static_cast<double>(strings.size()));
    for (std::size_t k = 0; k < strings.size(); ++k) {
      const int par = strings[k].parity();
      p.branches[strings[k]] = {c, par ? std::numbers::pi / 2 - alpha0 : alpha0, thetas[k], phis[k],
                                phis[k] + gamma + par * std::numbers::pi};
    }
    return p;
  }

  static CanonicalFormParams random_constrained(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
    std::uniform_real_distribution<double> tilt(0.0, std::numbers::pi / 2);
    const double alpha0 = tilt(rng);
    const double gamma = angle(rng);
    std::vector<double> th(dim_of(n - 2)), ph(dim_of(n - 2));
    for (auto& t : th) t = angle(rng);
    for (auto& f : ph) f = angle(rng);
    return constrained(n, alpha0, gamma, th, ph);
  }
};

inline PureState make_canonical_state(const CanonicalFormParams& p) {
  p.validate();
  const std::size_t n = p.n_parties;
  const std::size_t rest = n - 2;
  Amplitudes amps(dim_of(n), Complex{0.0, 0.0});
  for (const auto& [s, b] : p.branches) {
    const double c = b.c * std::cos(b.alpha) * M_SQRT1_2;
    const double sn = b.c * std::sin(b.alpha) * M_SQRT1_2;
    const std::size_t tail = s.index();
    const auto at = [&](std::size_t ab) { return (ab << rest) | tail; };
    amps[at(0b00)] = c * std::polar(1.0, b.theta);
    amps[at(0b11)] = c * std::polar(1.0, b.phi);
    amps[at(0b01)] = sn * std::polar(1.0, b.omega);
    amps[at(0b10)] = -sn * std::polar(1.0, b.theta + b.phi - b.omega);
  }
  return PureState(n, std::move(amps));
}

enum class ConstraintKind { UniformAmplitude, AlphaParity, OmegaPhase };

inline const char* to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::UniformAmplitude: return "uniform_amplitude";
    case ConstraintKind::AlphaParity: return "alpha_parity";
    case ConstraintKind::OmegaPhase: return "omega_phase";
  }
  return "unknown";
}

struct ConstraintViolation {
  ConstraintKind kind;
  BitString string;
  double residual = 0.0;
  std::string detail;
};

/// Exchange-symmetry constraints of the canonical form. The reference
/// values are taken from the all-zeros string: alpha_0 = alpha_{0..0} and
/// gamma = omega_{0..0} - phi_{0..0}. The declared `gamma` must match the
/// extracted one.
inline std::vector<ConstraintViolation> check_exchange_constraints(const CanonicalFormParams& p, double tol = kTol) {
  p.validate();
  std::vector<ConstraintViolation> out;
  const double c_expected = 1.0 / std::sqrt(static_cast<double>(dim_of(p.n_parties - 2)));
  const auto& ref = p.branches.begin()->second;
  const double alpha0 = ref.alpha;
  const double gamma = wrap_angle(ref.omega - ref.phi);
  if (angle_distance(gamma, p.gamma) > tol)
    out.push_back({ConstraintKind::OmegaPhase, p.branches.begin()->first, angle_distance(gamma, p.gamma),
                   "declared gamma disagrees with omega - phi of the reference string"});
  for (const auto& [s, b] : p.branches) {
    const int par = s.parity();
    if (const double r = std::abs(b.c - c_expected); r > tol)
      out.push_back({ConstraintKind::UniformAmplitude, s, r, "c_s must equal 1/sqrt(2^(N-2))"});
    const double alpha_expected = par ? std::numbers::pi / 2 - alpha0 : alpha0;
    if (const double r = std::abs(b.alpha - alpha_expected); r > tol)
      out.push_back({ConstraintKind::AlphaParity, s, r, "alpha_s must depend on parity only, alpha_1 = pi/2 - alpha_0"});
    if (const double r = angle_distance(b.omega, b.phi + gamma + par * std::numbers::pi); r > tol)
      out.push_back({ConstraintKind::OmegaPhase, s, r, "omega_s must equal phi_s + gamma + p(s) pi"});
  }
  return out;
}

struct LocalUnitary {
  std::size_t party = 0;
  Matrix2 matrix;
  std::string label;
};

inline PureState apply_local_unitaries(PureState s, std::span<const LocalUnitary> ops) {
  for (const auto& op : ops) s = apply_one_qubit(s, op.matrix, op.party);
  return s;
}

struct Canonicalization {
  WebStateSpec spec;
  std::vector<LocalUnitary> applied;
};

/// Removes gamma with diag(1, e^{i gamma}) on party 0 and diag(1, e^{-i gamma})
/// on party 1, then rotates party 0 by alpha_0. The result is the even-parity
/// phase family: theta(00s) = theta_s, theta(11s) = phi_s for even s and
/// theta(10s) = theta_s, theta(01s) = phi_s + pi for odd s.
inline Canonicalization canonicalize(const CanonicalFormParams& p) {
  if (const auto v = check_exchange_constraints(p); !v.empty())
    throw std::invalid_argument("canonicalize: exchange constraints violated (" + std::string(to_string(v[0].kind)) +
                                " at " + v[0].string.str() + ")");
  const auto& ref = p.branches.begin()->second;
  const double gamma = wrap_angle(ref.omega - ref.phi);
  const double alpha0 = ref.alpha;

  Canonicalization out;
  out.applied.push_back({0, gates::phase(gamma), "gamma_phase_A"});
  out.applied.push_back({1, gates::phase(-gamma), "gamma_phase_B"});
  out.applied.push_back({0, gates::rotation(alpha0), "alpha_rotation_A"});

  out.spec.n_parties = p.n_parties;
  const auto full = [](unsigned ab, const BitString& s) {
    BitString f;
    f.bits = {static_cast<std::uint8_t>(ab >> 1), static_cast<std::uint8_t>(ab & 1)};
    f.bits.insert(f.bits.end(), s.bits.begin(), s.bits.end());
    return f;
  };
  for (const auto& [s, b] : p.branches) {
    if (s.parity() == 0) {
      out.spec.phases[full(0b00, s)] = wrap_angle(b.theta);
      out.spec.phases[full(0b11, s)] = wrap_angle(b.phi);
    } else {
      out.spec.phases[full(0b10, s)] = wrap_angle(b.theta);
      out.spec.phases[full(0b01, s)] = wrap_angle(b.phi + std::numbers::pi);
    }
  }
  out.spec.validate();
  return out;
}

/// Preparation bases of the canonical-form state itself: the computational
/// basis pulled back through the canonicalizing unitaries (parties 0 and 1),
/// computational elsewhere. Built from the reference string only, so it is
/// defined for violating parameters too.
inline PreparationBases canonical_preparation_bases(const CanonicalFormParams& p) {
  p.validate();
  const auto& ref = p.branches.begin()->second;
  const double gamma = wrap_angle(ref.omega - ref.phi);
  auto bases = PreparationBases::computational(p.n_parties);
  const Matrix2 ua = (gates::rotation(ref.alpha) * gates::phase(gamma)).adjoint();
  const Matrix2 ub = gates::phase(-gamma).adjoint();
  bases.per_party[0] = QubitBasis(ua.col(0), ua.col(1));
  bases.per_party[1] = QubitBasis(ub.col(0), ub.col(1));
  return bases;
}

//============================================================================
// Contextual example and necessary conditions
//============================================================================

/// (|00>+|11>)|00>/2 + (|00>-|11>)|11>/2 over parties A, B, C, D.
inline PureState make_contextual_example() {
  Amplitudes amps(16, Complex{0.0, 0.0});
  amps[0b0000] = 0.5;
  amps[0b1100] = 0.5;
  amps[0b0011] = 0.5;
  amps[0b1111] = -0.5;
  return PureState(4, std::move(amps));
}

/// Basis map for the contextual example: computational for the pairs AB and
/// CD, Hadamard for the four cross pairs.
inline PreparationBases contextual_example_bases() {
  PreparationBases b;
  b.context_free = false;
  b.per_party = std::vector<QubitBasis>(4, QubitBasis::computational());
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) {
      const bool same_half = (i < 2) == (j < 2);
      b.per_pair[{i, j}] = std::vector<QubitBasis>(4, same_half ? QubitBasis::computational() : QubitBasis::hadamard());
    }
  return b;
}

struct PairAssistance {
  std::pair<std::size_t, std::size_t> pair;
  AssistanceResult assistance;
};

struct NecessaryConditionsReport {
  std::vector<double> single_deviation;  // ||rho_q - I/2||_max per qubit
  std::vector<PairAssistance> pairs;
  double single_tolerance = kTol;
  double assistance_tolerance = 1e-3;
  bool single_ok = true;
  bool assistance_ok = true;

  // Both conditions are necessary only; passing them does not certify a web state.
  bool pass() const { return single_ok && assistance_ok; }

  nlohmann::json to_json() const {
    nlohmann::json ps = nlohmann::json::array();
    for (const auto& p : pairs)
      ps.push_back({{"pair", {p.pair.first, p.pair.second}}, {"assistance", p.assistance.to_json()}});
    return {{"single_qubit_maximally_mixed", single_ok},
            {"pair_assistance_one", assistance_ok},
            {"pass", pass()},
            {"sufficient", false},
            {"single_deviation", single_deviation},
            {"pairs", std::move(ps)}};
  }
};

inline NecessaryConditionsReport necessary_conditions(const PureState& s, double tol = kTol,
                                                      double assistance_tol = 1e-3) {
  const std::size_t n = s.n_qubits();
  if (n < 3) throw std::invalid_argument("necessary_conditions: need at least 3 parties");
  NecessaryConditionsReport r;
  r.single_tolerance = tol;
  r.assistance_tolerance = assistance_tol;
  const MatrixX half = Matrix2::Identity() * 0.5;
  for (std::size_t q = 0; q < n; ++q) {
    const std::size_t keep[] = {q};
    const double dev = (partial_trace(s, keep).matrix() - half).cwiseAbs().maxCoeff();
    r.single_deviation.push_back(dev);
    r.single_ok = r.single_ok && dev <= tol;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t keep[] = {i, j};
      auto a = entanglement_of_assistance_2q(partial_trace(s, keep));
      r.assistance_ok = r.assistance_ok && std::abs(a.value - 1.0) <= assistance_tol;
      r.pairs.push_back({{i, j}, std::move(a)});
    }
  return r;
}

/// Sorted spectra of every k-party marginal, sorted as a multiset. Local
/// unitaries preserve it, so differing signatures rule out equivalence.
inline std::vector<std::vector<double>> marginal_spectra(const PureState& s, std::size_t k) {
  const std::size_t n = s.n_qubits();
  if (k == 0 || k >= n) throw std::invalid_argument("marginal_spectra: k must be in [1, n)");
  std::vector<std::vector<double>> out;
  for (std::size_t mask = 0; mask < dim_of(n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
    std::vector<std::size_t> keep;
    for (std::size_t q = 0; q < n; ++q)
      if (mask & bit_mask(n, q)) keep.push_back(q);
    const auto ev = hermitian_eigenvalues(partial_trace(s, keep).matrix());
    out.emplace_back(ev.data(), ev.data() + ev.size());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline bool spectra_match(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
                          double tol = 1e-6) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return false;
    for (std::size_t j = 0; j < a[i].size(); ++j)
      if (std::abs(a[i][j] - b[i][j]) > tol) return false;
  }
  return true;
}

}  // namespace qweb
