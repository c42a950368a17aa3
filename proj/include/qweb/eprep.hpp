#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "measures.hpp"
#include "optimize.hpp"
#include "statevec.hpp"
#include "webstates.hpp"

namespace qweb {

using PartyPair = std::pair<std::size_t, std::size_t>;

// Bloch angles of a basis' first vector (global phase removed).
inline BlochAngles bloch_angles(const QubitBasis& b) {
  if (b.angles()) return *b.angles();
  const Vector2& v = b.b0();
  const double polar = 2 * std::acos(std::clamp(std::abs(v(0)), 0.0, 1.0));
  const double az = std::abs(v(1)) > kTol && std::abs(v(0)) > kTol ? wrap_angle(std::arg(v(1)) - std::arg(v(0))) : 0.0;
  return {polar, az};
}

// Angle pair folded onto polar in [0, pi], azimuthal in [0, 2pi); the
// represented basis is unchanged up to vector phases.
inline void wrap_bloch(double& polar, double& az) {
  polar = wrap_angle(polar);
  if (polar > std::numbers::pi) {
    polar = 2 * std::numbers::pi - polar;
    az += std::numbers::pi;
  }
  az = wrap_angle(az);
}

struct LoccStrategy {
  std::vector<std::size_t> measuring_parties;
  std::vector<QubitBasis> bases;

  static LoccStrategy from_angles(std::vector<std::size_t> parties, std::span<const double> angles) {
    if (angles.size() != 2 * parties.size()) throw std::invalid_argument("LoccStrategy: need two angles per party");
    LoccStrategy s{std::move(parties), {}};
    for (std::size_t k = 0; k < s.measuring_parties.size(); ++k)
      s.bases.push_back(QubitBasis::from_angles(angles[2 * k], angles[2 * k + 1]));
    return s;
  }

  static LoccStrategy uniform(std::vector<std::size_t> parties, const QubitBasis& b) {
    const auto n = parties.size();
    return {std::move(parties), std::vector<QubitBasis>(n, b)};
  }

  std::vector<double> angles() const {
    std::vector<double> out;
    for (const auto& b : bases) {
      const auto a = bloch_angles(b);
      out.push_back(a.polar);
      out.push_back(a.azimuthal);
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t k = 0; k < measuring_parties.size(); ++k) {
      const auto a = bloch_angles(bases[k]);
      j[std::to_string(measuring_parties[k])] = {a.polar, a.azimuthal};
    }
    return j;
  }
};

// Parties outside the pair, ascending.
inline std::vector<std::size_t> complement_of(std::size_t n, PartyPair pair) {
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < n; ++q)
    if (q != pair.first && q != pair.second) out.push_back(q);
  return out;
}

namespace detail {

// Measures `measured[k]` in `bases[k]` for every k and calls `leaf` with each
// nonzero branch (remaining qubits keep ascending order).
inline void for_each_branch(const PureState& s, std::vector<std::pair<std::size_t, const QubitBasis*>> measured,
                            const std::function<void(const PureState&, double)>& leaf) {
  // Highest index first so lower positions stay valid.
  std::sort(measured.begin(), measured.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::function<void(const PureState&, std::size_t, double)> rec = [&](const PureState& cur, std::size_t depth,
                                                                        double p) {
    if (depth == measured.size()) {
      leaf(cur, p);
      return;
    }
    for (const auto& b : measure_in_basis(cur, measured[depth].first, *measured[depth].second)) {
      const double q = p * b.probability;
      if (!b.post_state || q <= kProbabilityFloor) continue;
      rec(*b.post_state, depth + 1, q);
    }
  };
  rec(s, 0, 1.0);
}

inline std::size_t rank_among(std::size_t q, std::span<const std::size_t> measured) {
  return q - static_cast<std::size_t>(std::count_if(measured.begin(), measured.end(), [q](auto m) { return m < q; }));
}

}  // namespace detail

/// Average entanglement across `side_a` after measuring every other qubit
/// outside `side_a` and `side_b`. Each branch leaves side_a + side_b pure.
inline double average_cut_entanglement(const PureState& s, std::span<const std::size_t> side_a,
                                       std::span<const std::size_t> side_b, std::span<const std::size_t> measured,
                                       std::span<const QubitBasis> bases) {
  const std::size_t n = s.n_qubits();
  if (measured.size() != bases.size()) throw std::invalid_argument("average_cut_entanglement: basis count mismatch");
  std::vector<int> owner(n, -1);
  auto claim = [&](std::span<const std::size_t> qs, int who) {
    for (auto q : qs) {
      if (q >= n) throw std::out_of_range("average_cut_entanglement: qubit out of range");
      if (owner[q] != -1) throw std::invalid_argument("average_cut_entanglement: overlapping qubit sets");
      owner[q] = who;
    }
  };
  claim(side_a, 0);
  claim(side_b, 1);
  claim(measured, 2);
  if (std::count(owner.begin(), owner.end(), -1) != 0)
    throw std::invalid_argument("average_cut_entanglement: strategy does not cover the complement of the pair");
  if (side_a.empty() || side_b.empty()) throw std::invalid_argument("average_cut_entanglement: empty side");

  std::vector<std::size_t> cut;
  for (auto q : side_a) cut.push_back(detail::rank_among(q, measured));
  std::vector<std::pair<std::size_t, const QubitBasis*>> m;
  for (std::size_t k = 0; k < measured.size(); ++k) m.emplace_back(measured[k], &bases[k]);
  double avg = 0.0;
  detail::for_each_branch(s, std::move(m), [&](const PureState& leaf, double p) {
    avg += p * entropy_of_entanglement(leaf, cut);
  });
  return avg;
}

enum class EprepMode {
  Entropy,    // every party outside the pair measured; pure branches
  Formation,  // unmeasured parties traced out; E_f of the mixed pair
};

inline void validate_pair(std::size_t n, PartyPair pair) {
  if (pair.first == pair.second) throw std::invalid_argument("pair parties coincide");
  if (pair.first >= n || pair.second >= n) throw std::out_of_range("pair party out of range");
}

inline double average_prep_entanglement(const PureState& s, PartyPair pair, const LoccStrategy& strategy,
                                        EprepMode mode = EprepMode::Entropy) {
  const std::size_t n = s.n_qubits();
  validate_pair(n, pair);
  if (strategy.bases.size() != strategy.measuring_parties.size())
    throw std::invalid_argument("average_prep_entanglement: basis count mismatch");
  if (mode == EprepMode::Entropy) {
    const std::size_t a[] = {pair.first}, b[] = {pair.second};
    return average_cut_entanglement(s, a, b, strategy.measuring_parties, strategy.bases);
  }
  for (auto q : strategy.measuring_parties)
    if (q == pair.first || q == pair.second || q >= n)
      throw std::invalid_argument("average_prep_entanglement: strategy/pair mismatch");
  std::vector<std::pair<std::size_t, const QubitBasis*>> m;
  for (std::size_t k = 0; k < strategy.bases.size(); ++k) m.emplace_back(strategy.measuring_parties[k], &strategy.bases[k]);
  const std::size_t keep[] = {detail::rank_among(pair.first, strategy.measuring_parties),
                              detail::rank_among(pair.second, strategy.measuring_parties)};
  double avg = 0.0;
  detail::for_each_branch(s, std::move(m), [&](const PureState& leaf, double p) {
    avg += p * entanglement_of_formation_2q(partial_trace(leaf, keep));
  });
  return avg;
}

struct EprepEstimate {
  double value = 0.0;
  LoccStrategy strategy;
  long evaluations = 0;
  bool converged = false;

  nlohmann::json to_json() const {
    return {{"value", value}, {"strategy", strategy.to_json()}, {"converged", converged}, {"evaluations", evaluations}};
  }
};

namespace detail {

// z, x and y bases on every measured qubit, then Halton points over
// [0, pi] x [0, 2pi) per qubit.
inline std::vector<std::vector<double>> strategy_starts(std::size_t n_measured, const OptimizerConfig& cfg) {
  const std::size_t dim = 2 * n_measured;
  std::vector<std::vector<double>> starts;
  const double structured[3][2] = {{0.0, 0.0}, {std::numbers::pi / 2, 0.0}, {std::numbers::pi / 2, std::numbers::pi / 2}};
  for (const auto& a : structured) {
    if (starts.size() >= static_cast<std::size_t>(cfg.multistarts)) break;
    std::vector<double> x(dim);
    for (std::size_t k = 0; k < n_measured; ++k) {
      x[2 * k] = a[0];
      x[2 * k + 1] = a[1];
    }
    starts.push_back(std::move(x));
  }
  for (std::uint64_t i = 1; starts.size() < static_cast<std::size_t>(cfg.multistarts); ++i) {
    auto h = halton_point(i + 1000 * cfg.seed, dim);
    for (std::size_t k = 0; k < n_measured; ++k) {
      h[2 * k] *= std::numbers::pi;
      h[2 * k + 1] *= 2 * std::numbers::pi;
    }
    starts.push_back(std::move(h));
  }
  return starts;
}

inline void wrap_strategy(std::vector<double>& x) {
  for (std::size_t k = 0; k + 1 < x.size(); k += 2) wrap_bloch(x[k], x[k + 1]);
}

inline std::vector<QubitBasis> bases_from(std::span<const double> x) {
  std::vector<QubitBasis> out;
  for (std::size_t k = 0; k + 1 < x.size(); k += 2) out.push_back(QubitBasis::from_angles(x[k], x[k + 1]));
  return out;
}

// Maximizes average_cut_entanglement over per-qubit bases; the reported
// value is re-evaluated at the returned (wrapped) point.
inline OptimumPoint maximize_cut(const PureState& s, std::span<const std::size_t> side_a,
                                 std::span<const std::size_t> side_b, std::span<const std::size_t> measured,
                                 std::vector<std::vector<double>> starts, const OptimizerConfig& cfg) {
  const Objective f = [&](std::span<const double> x) {
    const auto bases = bases_from(x);
    return average_cut_entanglement(s, side_a, side_b, measured, bases);
  };
  auto best = multistart_maximize(f, starts, 0.5, cfg, wrap_strategy);
  best.value = f(best.x);
  return best;
}

}  // namespace detail

/// Lower bound on the entanglement of preparation within non-adaptive local
/// projective strategies.
inline EprepEstimate estimate_entanglement_of_preparation(const PureState& s, PartyPair pair,
                                                          const OptimizerConfig& cfg = {}) {
  cfg.validate();
  const std::size_t n = s.n_qubits();
  if (n < 3) throw std::invalid_argument("estimate_entanglement_of_preparation: need at least 3 parties");
  validate_pair(n, pair);
  const auto others = complement_of(n, pair);
  const std::size_t a[] = {pair.first}, b[] = {pair.second};
  const auto best = detail::maximize_cut(s, a, b, others, detail::strategy_starts(others.size(), cfg), cfg);
  return {best.value, LoccStrategy::from_angles(others, best.x), best.evaluations, best.converged};
}

struct AssistanceComparison {
  double preparation = 0.0;
  double assistance = 0.0;
  bool pass = false;
};

inline AssistanceComparison check_eprep_le_assistance(const PureState& s, PartyPair pair,
                                                      const OptimizerConfig& cfg = {}) {
  const auto ep = estimate_entanglement_of_preparation(s, pair, cfg);
  const auto ea = entanglement_of_assistance_2q(partial_trace(s, {pair.first, pair.second}));
  return {ep.value, ea.value, ep.value <= ea.value + 1e-3};
}

struct SuperadditivityReport {
  double first = 0.0;
  double second = 0.0;
  double joint = 0.0;
  double product_seed = 0.0;  // joint value at the product of per-copy strategies
  bool pass = false;
};

/// Two copies on one register: party k owns qubits k (first copy) and N+k
/// (second copy). The joint search is seeded with the product of the
/// per-copy optima.
inline SuperadditivityReport check_superadditivity(const PureState& psi, const PureState& phi, PartyPair pair,
                                                   const OptimizerConfig& cfg = {}) {
  const std::size_t n = psi.n_qubits();
  if (phi.n_qubits() != n) throw std::invalid_argument("check_superadditivity: party structures differ");
  if (2 * n > 12) throw std::invalid_argument("check_superadditivity: joint register exceeds 12 qubits");
  const auto e1 = estimate_entanglement_of_preparation(psi, pair, cfg);
  const auto e2 = estimate_entanglement_of_preparation(phi, pair, cfg);

  const PureState joint = embed_product({psi, phi});
  const std::size_t a[] = {pair.first, n + pair.first}, b[] = {pair.second, n + pair.second};
  std::vector<std::size_t> measured;
  std::vector<double> seed;
  const auto x1 = e1.strategy.angles(), x2 = e2.strategy.angles();
  const auto others = complement_of(n, pair);
  for (std::size_t k = 0; k < others.size(); ++k) {
    measured.push_back(others[k]);
    seed.insert(seed.end(), {x1[2 * k], x1[2 * k + 1]});
    measured.push_back(n + others[k]);
    seed.insert(seed.end(), {x2[2 * k], x2[2 * k + 1]});
  }
  auto starts = detail::strategy_starts(measured.size(), cfg);
  starts.insert(starts.begin(), seed);
  const double at_seed = average_cut_entanglement(joint, a, b, measured, detail::bases_from(seed));
  const auto best = detail::maximize_cut(joint, a, b, measured, std::move(starts), cfg);
  const double j = std::max(best.value, at_seed);
  return {e1.value, e2.value, j, at_seed, j >= e1.value + e2.value - 1e-6};
}

struct MonotoneReport {
  double pre = 0.0;
  double post_average = 0.0;
  bool asserted = false;  // only when pre is the pair maximum
  bool pass = true;

  nlohmann::json to_json() const {
    return {{"pre", pre}, {"post_average", post_average}, {"asserted", asserted}, {"pass", pass}};
  }
};

/// Measures `party` in `basis` and compares the outcome-averaged estimate
/// with the one before. Only asserted when the pre value is 1.
inline MonotoneReport monotone_spot_check(const PureState& s, PartyPair pair, std::size_t party,
                                          const QubitBasis& basis, const OptimizerConfig& cfg = {}) {
  const std::size_t n = s.n_qubits();
  validate_pair(n, pair);
  if (party >= n || party == pair.first || party == pair.second)
    throw std::invalid_argument("monotone_spot_check: operation must act outside the pair");
  MonotoneReport r;
  r.pre = estimate_entanglement_of_preparation(s, pair, cfg).value;
  const PartyPair shifted{pair.first - (pair.first > party ? 1 : 0), pair.second - (pair.second > party ? 1 : 0)};
  for (const auto& b : measure_in_basis(s, party, basis)) {
    if (!b.post_state) continue;
    const double e = n - 1 == 2 ? entropy_of_entanglement(*b.post_state, {shifted.first})
                                : estimate_entanglement_of_preparation(*b.post_state, shifted, cfg).value;
    r.post_average += b.probability * e;
  }
  r.asserted = r.pre >= 1.0 - 1e-6;
  r.pass = !r.asserted || r.post_average <= r.pre + 1e-6;
  return r;
}

}  // namespace qweb
