#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <qweb/webstates.hpp>

#include "helpers.hpp"
#include "oracles.hpp"

using namespace qweb;
using testing_util::from_vec;
using testing_util::to_vec;

namespace {

constexpr double kPi = std::numbers::pi;

// Web state with its computational preparation bases.
WebVerificationReport verify_family(const PureState& s, double tol = kTol) {
  return verify_web_state(s, PreparationBases::computational(s.n_qubits()), tol);
}

PureState perturb_first_amplitude(const PureState& s, double delta) {
  Amplitudes a(s.amplitudes().begin(), s.amplitudes().end());
  a[0] += delta;
  return PureState::normalized(s.n_qubits(), std::move(a));
}

}  // namespace

TEST(BitString, ParityIndexAndParse) {
  const auto s = BitString::parse("1011");
  EXPECT_EQ(s.parity(), 1);
  EXPECT_EQ(s.index(), 0b1011u);
  EXPECT_EQ(s.str(), "1011");
  EXPECT_EQ(BitString::from_index(0b0110, 4).str(), "0110");
  EXPECT_THROW(BitString::parse("10a"), std::invalid_argument);
  EXPECT_EQ(even_strings(4).size(), 8u);
  for (const auto& e : even_strings(5)) EXPECT_EQ(e.parity(), 0);
}

TEST(MakeGhz, Examples) {
  EXPECT_TRUE(states_equal_up_to_phase(make_ghz(2), PureState(2, {M_SQRT1_2, 0, 0, M_SQRT1_2}), 0.0));
  const auto g3 = make_ghz(3);
  EXPECT_DOUBLE_EQ(g3[0].real(), M_SQRT1_2);
  EXPECT_DOUBLE_EQ(g3[7].real(), M_SQRT1_2);
  const auto g5 = make_ghz(5);
  EXPECT_NEAR(g5.norm(), 1.0, 1e-15);
  int nonzero = 0;
  for (auto a : g5.amplitudes()) nonzero += std::abs(a) > 0;
  EXPECT_EQ(nonzero, 2);
  EXPECT_THROW(make_ghz(1), std::invalid_argument);
}

TEST(MakeWebState, ZeroPhasesIsGhzInPreparationFrame) {
  for (std::size_t n = 3; n <= 6; ++n) {
    const auto web = make_web_state(WebStateSpec::zero_phases(n));
    const auto lab = from_preparation_frame(web, PreparationBases::ghz(n));
    EXPECT_TRUE(states_equal_up_to_phase(lab, make_ghz(n), 1e-12)) << n;
    EXPECT_TRUE(states_equal_up_to_phase(to_preparation_frame(make_ghz(n), PreparationBases::ghz(n)), web, 1e-12));
  }
}

TEST(MakeWebState, SeededAndPiPhasedStatesVerify) {
  const auto [spec, s] = random_web_state(4, 42);
  EXPECT_TRUE(verify_family(s).pass);
  auto pi_spec = WebStateSpec::zero_phases(4);
  pi_spec.phases[BitString::parse("0000")] = kPi;
  EXPECT_TRUE(verify_family(make_web_state(pi_spec)).pass);
}

TEST(MakeWebState, MalformedSpec) {
  auto spec = WebStateSpec::zero_phases(4);
  spec.phases.erase(spec.phases.begin());
  EXPECT_THROW(make_web_state(spec), std::invalid_argument);
  spec = WebStateSpec::zero_phases(4);
  spec.phases[BitString::parse("0001")] = 0.0;
  EXPECT_THROW(make_web_state(spec), std::invalid_argument);
}

TEST(WebStateSpec, JsonRoundTrip) {
  const auto [spec, s] = random_web_state(5, 3);
  const auto back = WebStateSpec::from_json(nlohmann::json::parse(spec.to_json().dump()));
  EXPECT_EQ(back, spec);
  EXPECT_THROW(WebStateSpec::from_json(nlohmann::json::parse(R"({"n":3,"phases":{"001":0.0}})")),
               std::invalid_argument);
}

TEST(RandomWebState, SeedingContract) {
  EXPECT_EQ(random_web_state(3, 1).first, random_web_state(3, 1).first);
  EXPECT_NE(random_web_state(3, 1).first, random_web_state(3, 2).first);
  EXPECT_EQ(random_web_state(4, 17).first.phases.size(), 8u);
  EXPECT_TRUE(verify_family(random_web_state(5, 99).second).pass);
}

TEST(VerifyWebState, GhzWithHadamardBases) {
  for (std::size_t n = 3; n <= 6; ++n) {
    const auto r = verify_web_state(make_ghz(n), PreparationBases::ghz(n));
    EXPECT_TRUE(r.pass) << n;
    EXPECT_EQ(r.cases.size(), n * (n - 1) / 2 * dim_of(n - 2));
    EXPECT_LE(r.worst_deviation, 1e-12);
  }
}

TEST(VerifyWebState, PerturbedGhzFails) {
  const auto bad = perturb_first_amplitude(make_ghz(4), 0.05);
  const auto r = verify_web_state(bad, PreparationBases::ghz(4));
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.worst_deviation, kTol);
  ASSERT_TRUE(r.worst_case);
  EXPECT_EQ(r.cases[*r.worst_case].deviation, r.worst_deviation);
}

TEST(VerifyWebState, ResidualsMatchProjectorOracle) {
  // Pair (0, 2) of GHZ_4 after measuring parties 1 and 3 in |+>/|->.
  const auto res = pair_residuals(make_ghz(4), 0, 2, PreparationBases::ghz(4));
  ASSERT_EQ(res.size(), 4u);
  const double r = 1 / std::sqrt(2.0);
  for (const auto& pr : res) {
    auto [p1, s1] = oracle::project(oracle::ghz(4), 4, 3, {r, pr.outcome.bits[1] ? -r : r});
    auto [p2, s2] = oracle::project(s1, 3, 1, {r, pr.outcome.bits[0] ? -r : r});
    EXPECT_NEAR(pr.probability, p1 * p2, 1e-12);
    EXPECT_TRUE(states_equal_up_to_phase(pr.state, from_vec(s2), 1e-10));
    // Parity of the two outcomes sets the relative sign.
    const double sign = pr.outcome.parity() ? -1.0 : 1.0;
    EXPECT_TRUE(states_equal_up_to_phase(pr.state, PureState(2, {r, 0, 0, sign * r}), 1e-12));
  }
}

TEST(VerifyWebState, Preconditions) {
  EXPECT_THROW(verify_web_state(make_ghz(2), PreparationBases::ghz(2)), std::invalid_argument);
  EXPECT_THROW(verify_web_state(make_ghz(4), PreparationBases::ghz(3)), std::invalid_argument);
  EXPECT_THROW(verify_web_state(make_contextual_example(), contextual_example_bases()), std::invalid_argument);
}

TEST(VerifyWebState, ReportJson) {
  const auto j = verify_web_state(make_ghz(3), PreparationBases::ghz(3)).to_json();
  EXPECT_EQ(j.at("pass"), true);
  EXPECT_EQ(j.at("cases").size(), 6u);
  EXPECT_TRUE(j.at("worst_case").contains("pair"));
}

TEST(WebFamily, EveryPairOutcomeMaximallyEntangled) {
  for (std::size_t n = 3; n <= 6; ++n)
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto r = verify_family(random_web_state(n, 100 * n + seed).second);
      EXPECT_TRUE(r.pass) << n << " " << seed;
      EXPECT_EQ(r.cases.size(), n * (n - 1) / 2 * dim_of(n - 2));
    }
}

TEST(GhzEquivalence, ThreePartyWebStatesHaveUnitEntropyCuts) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = random_web_state(3, seed).second;
    ASSERT_TRUE(verify_family(s).pass);
    for (std::size_t q = 0; q < 3; ++q) EXPECT_NEAR(entropy_of_entanglement(s, {q}), 1.0, 1e-9);
  }
}

TEST(PhaseCountObstruction, MarginalSpectraSeparateRandomStates) {
  // Three-party marginals of a four-party web state are always flat, so the
  // signature combines two- and three-party marginal spectra.
  for (std::size_t n : {4u, 5u}) {
    int differing = 0;
    for (std::uint64_t k = 0; k < 10; ++k) {
      const auto a = random_web_state(n, 2 * k + 1).second;
      const auto b = random_web_state(n, 2 * k + 2).second;
      const bool same = spectra_match(marginal_spectra(a, 2), marginal_spectra(b, 2)) &&
                        spectra_match(marginal_spectra(a, 3), marginal_spectra(b, 3));
      differing += !same;
    }
    EXPECT_GE(differing, 9) << n;
  }
}

TEST(PhaseCountObstruction, SpectraInvariantUnderLocalUnitaries) {
  const auto s = random_web_state(4, 5).second;
  auto t = apply_one_qubit(s, gates::euler(0.3, 1.2, 2.0), 1);
  t = apply_one_qubit(t, gates::h(), 3);
  EXPECT_TRUE(spectra_match(marginal_spectra(s, 2), marginal_spectra(t, 2)));
}

TEST(ResidualAfterMeasurement, GhzFourClosesToGhzThree) {
  const auto bases = PreparationBases::ghz(4);
  for (int o = 0; o < 2; ++o) {
    const auto r = residual_after_measurement(make_ghz(4), bases, 3, o);
    EXPECT_EQ(r.n_qubits(), 3u);
    EXPECT_TRUE(verify_web_state(r, bases.without(3)).pass);
  }
}

TEST(ResidualAfterMeasurement, FivePartyFamilyClosure) {
  const auto s = random_web_state(5, 21).second;
  const auto bases = PreparationBases::computational(5);
  for (std::size_t party = 0; party < 5; ++party)
    for (int o = 0; o < 2; ++o)
      EXPECT_TRUE(verify_web_state(residual_after_measurement(s, bases, party, o), bases.without(party)).pass);
}

TEST(ResidualAfterMeasurement, TwoStepsLeaveGhzClass) {
  const auto s = random_web_state(4, 8).second;
  const auto bases = PreparationBases::computational(4);
  const auto r1 = residual_after_measurement(s, bases, 0, 1);
  const auto r2 = residual_after_measurement(r1, bases.without(0), 1, 0);
  ASSERT_EQ(r2.n_qubits(), 2u);
  EXPECT_NEAR(entropy_of_entanglement(r2, {0}), 1.0, 1e-9);
  for (std::size_t q = 0; q < 3; ++q) EXPECT_NEAR(entropy_of_entanglement(r1, {q}), 1.0, 1e-9);
}

TEST(ResidualAfterMeasurement, ZeroProbabilityBranch) {
  const auto s = PureState::basis_state(3, 0);
  EXPECT_THROW(residual_after_measurement(s, PreparationBases::computational(3), 0, 1), std::domain_error);
}

TEST(CanonicalForm, TrivialParamsGiveGhz) {
  const std::vector<double> zeros(2, 0.0);
  const auto p = CanonicalFormParams::constrained(3, 0.0, 0.0, zeros, zeros);
  EXPECT_TRUE(check_exchange_constraints(p).empty());
  // The odd branch (|01> - |10>) e^{i pi} carries the parity phase, which
  // survives as theta(011) = pi. Three-party web states are GHZ-class.
  const auto s = make_canonical_state(p);
  EXPECT_TRUE(verify_family(s).pass);
  for (std::size_t q = 0; q < 3; ++q) EXPECT_NEAR(entropy_of_entanglement(s, {q}), 1.0, 1e-12);
  const auto c = canonicalize(p);
  for (const auto& [k, v] : c.spec.phases)
    EXPECT_NEAR(angle_distance(v, k.str() == "011" ? kPi : 0.0), 0.0, 1e-12) << k.str();
}

TEST(CanonicalForm, StateMatchesDefinition) {
  const auto p = CanonicalFormParams::random_constrained(3, 4);
  const auto s = make_canonical_state(p);
  for (const auto& [str, b] : p.branches) {
    const std::size_t t = str.index();
    const double r = b.c / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(s[(0b00 << 1) | t] - r * std::cos(b.alpha) * std::polar(1.0, b.theta)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(s[(0b11 << 1) | t] - r * std::cos(b.alpha) * std::polar(1.0, b.phi)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(s[(0b01 << 1) | t] - r * std::sin(b.alpha) * std::polar(1.0, b.omega)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(s[(0b10 << 1) | t] + r * std::sin(b.alpha) * std::polar(1.0, b.theta + b.phi - b.omega)), 0.0,
                1e-14);
  }
}

TEST(CanonicalForm, NormalizationEnforced) {
  auto p = CanonicalFormParams::random_constrained(3, 1);
  p.branches.begin()->second.c += 0.1;
  EXPECT_THROW(make_canonical_state(p), InvariantError);
}

TEST(ExchangeConstraints, SatisfiedFamily) {
  const std::vector<double> th{0.1, 0.2, 0.3, 0.4}, ph{1.0, 2.0, 3.0, 4.0};
  // alpha_s = p(s) pi/2 pattern.
  EXPECT_TRUE(check_exchange_constraints(CanonicalFormParams::constrained(4, 0.0, 0.0, th, ph)).empty());
  EXPECT_TRUE(check_exchange_constraints(CanonicalFormParams::constrained(4, 0.7, 2.1, th, ph)).empty());
}

TEST(ExchangeConstraints, UniformAmplitudeViolation) {
  auto p = CanonicalFormParams::random_constrained(4, 2);
  auto it = p.branches.begin();
  const double c0 = it->second.c;
  it->second.c = c0 + 0.01;
  std::prev(p.branches.end())->second.c = std::sqrt(c0 * c0 - 0.02 * c0 - 0.0001);
  const auto v = check_exchange_constraints(p);
  ASSERT_FALSE(v.empty());
  EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const auto& x) { return x.kind == ConstraintKind::UniformAmplitude; }));
}

TEST(ExchangeConstraints, MissingParityPhase) {
  const std::vector<double> th{0.1, 0.2}, ph{1.0, 2.0};
  auto p = CanonicalFormParams::constrained(3, 0.4, 0.0, th, ph);
  for (auto& [s, b] : p.branches) b.omega = b.phi;
  const auto v = check_exchange_constraints(p);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v.front().kind, ConstraintKind::OmegaPhase);
  EXPECT_EQ(v.front().string.str(), "1");
}

TEST(ExchangeConstraints, AlphaParityViolation) {
  auto p = CanonicalFormParams::random_constrained(3, 6);
  p.branches[BitString::parse("1")].alpha = p.branches[BitString::parse("0")].alpha;
  const auto v = check_exchange_constraints(p);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v.front().kind, ConstraintKind::AlphaParity);
}

TEST(Canonicalize, GammaDoesNotChangeSpec) {
  const std::vector<double> th{0.3, 1.2}, ph{2.2, 0.5};
  const auto a = canonicalize(CanonicalFormParams::constrained(3, 0.6, 0.0, th, ph));
  const auto b = canonicalize(CanonicalFormParams::constrained(3, 0.6, kPi / 3, th, ph));
  EXPECT_EQ(a.spec, b.spec);
}

TEST(Canonicalize, RoundTripRandomParams) {
  for (std::size_t n = 3; n <= 5; ++n)
    for (std::uint64_t seed : {7u, 8u, 9u}) {
      const auto p = CanonicalFormParams::random_constrained(n, seed);
      const auto c = canonicalize(p);
      const auto transformed = apply_local_unitaries(make_canonical_state(p), c.applied);
      EXPECT_TRUE(states_equal_up_to_phase(make_web_state(c.spec), transformed, 1e-9)) << n << " " << seed;
      EXPECT_TRUE(verify_web_state(make_canonical_state(p), canonical_preparation_bases(p)).pass);
    }
}

TEST(Canonicalize, RejectsViolations) {
  auto p = CanonicalFormParams::random_constrained(3, 6);
  p.branches.begin()->second.omega += 0.5;
  EXPECT_THROW(canonicalize(p), std::invalid_argument);
}

TEST(Canonicalize, GammaPhaseGatesSymbolic) {
  // After the gamma phases every branch obeys omega' = phi' + p(s) pi.
  const auto p = CanonicalFormParams::random_constrained(3, 12);
  auto s = make_canonical_state(p);
  const auto c = canonicalize(p);
  s = apply_one_qubit(s, c.applied[0].matrix, 0);
  s = apply_one_qubit(s, c.applied[1].matrix, 1);
  for (const auto& [str, b] : p.branches) {
    const std::size_t t = str.index();
    if (std::abs(std::sin(b.alpha)) < 1e-6 || std::abs(std::cos(b.alpha)) < 1e-6) continue;
    const double omega = std::arg(s[(0b01 << 1) | t]);
    const double phi = std::arg(s[(0b11 << 1) | t]);
    EXPECT_NEAR(angle_distance(omega, phi + str.parity() * kPi), 0.0, 1e-9);
  }
}

TEST(ContextualExample, Amplitudes) {
  const auto s = make_contextual_example();
  EXPECT_DOUBLE_EQ(s[0b0000].real(), 0.5);
  EXPECT_DOUBLE_EQ(s[0b1100].real(), 0.5);
  EXPECT_DOUBLE_EQ(s[0b0011].real(), 0.5);
  EXPECT_DOUBLE_EQ(s[0b1111].real(), -0.5);
}

TEST(ContextualExample, ComputationalBasisPreparesAbAndCd) {
  const auto s = make_contextual_example();
  const auto z = std::vector<QubitBasis>(4, QubitBasis::computational());
  const auto ab = pair_residuals(s, 0, 1, z);
  ASSERT_EQ(ab.size(), 2u);  // outcomes 01 and 10 have zero probability
  EXPECT_EQ(ab[0].outcome.str(), "00");
  EXPECT_TRUE(states_equal_up_to_phase(ab[0].state, PureState(2, {M_SQRT1_2, 0, 0, M_SQRT1_2}), 1e-12));
  for (const auto& r : ab) EXPECT_TRUE(is_maximally_entangled(r.state));
  for (const auto& r : pair_residuals(s, 2, 3, z)) EXPECT_TRUE(is_maximally_entangled(r.state));
}

TEST(ContextualExample, HadamardBasisPreparesCrossPairs) {
  const auto s = make_contextual_example();
  const auto x = std::vector<QubitBasis>(4, QubitBasis::hadamard());
  for (auto [i, j] : {std::pair{0, 2}, {0, 3}, {1, 2}, {1, 3}}) {
    const auto res = pair_residuals(s, i, j, x);
    EXPECT_EQ(res.size(), 4u);
    for (const auto& r : res) EXPECT_TRUE(is_maximally_entangled(r.state)) << i << j << " " << r.outcome.str();
  }
}

TEST(ContextualExample, HadamardBasisFailsForAb) {
  const auto s = make_contextual_example();
  const auto x = std::vector<QubitBasis>(4, QubitBasis::hadamard());
  double worst = 0.0;
  for (const auto& r : pair_residuals(s, 0, 1, x)) worst = std::max(worst, max_entanglement_deviation(r.state));
  EXPECT_GT(worst, 0.1);
  // Outcome ++ leaves the product |00>.
  const auto res = pair_residuals(s, 0, 1, x);
  EXPECT_TRUE(states_equal_up_to_phase(res[0].state, PureState::basis_state(2, 0), 1e-12));
}

TEST(ContextualExample, PairMapCoversAllPairs) {
  const auto s = make_contextual_example();
  const auto b = contextual_example_bases();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j)
      for (const auto& r : pair_residuals(s, i, j, b)) EXPECT_TRUE(is_maximally_entangled(r.state));
}

TEST(NecessaryConditions, Examples) {
  EXPECT_TRUE(necessary_conditions(make_ghz(5)).pass());
  const auto prod = necessary_conditions(PureState::basis_state(4, 0));
  EXPECT_FALSE(prod.single_ok);
  EXPECT_FALSE(prod.pass());
  const auto ctx = necessary_conditions(make_contextual_example());
  EXPECT_TRUE(ctx.single_ok);
  EXPECT_TRUE(ctx.assistance_ok);
  EXPECT_EQ(ctx.to_json().at("sufficient"), false);
}
