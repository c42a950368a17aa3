#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "measures.hpp"
#include "statevec.hpp"
#include "webstates.hpp"

namespace qweb {

//============================================================================
// Bell basis
//============================================================================
//
// Outcome bits: first bit phi (0) / psi (1), second bit + (0) / - (1).
// Packed index = 2 * first + second.

struct BellBits {
  int kind = 0;  // 0 = phi, 1 = psi
  int sign = 0;  // 0 = +, 1 = -

  static BellBits from_index(int k) { return {k >> 1, k & 1}; }
  int index() const noexcept { return 2 * kind + sign; }
  std::string name() const { return std::string(kind ? "psi" : "phi") + (sign ? "-" : "+"); }
  bool operator==(const BellBits&) const = default;
};

inline Eigen::Vector4cd bell_vector(BellBits b) {
  const double r = M_SQRT1_2;
  const double s = b.sign ? -r : r;
  if (b.kind == 0) return {r, 0, 0, s};
  return {0, r, s, 0};
}

// Receiver correction: phi+ -> I, phi- -> Z, psi+ -> X, psi- -> ZX.
inline Matrix2 pauli_correction(BellBits b) {
  switch (b.index()) {
    case 0: return gates::identity();
    case 1: return gates::z();
    case 2: return gates::x();
    default: return gates::z() * gates::x();
  }
}

struct BellOutcome {
  BellBits bits;
  double probability = 0.0;
  std::optional<PureState> post_state;  // both measured qubits removed
};

inline BellOutcome project_bell(const PureState& s, std::size_t q1, std::size_t q2, BellBits bits) {
  const std::size_t n = s.n_qubits();
  if (q1 == q2) throw std::invalid_argument("bell_measure: qubit indices coincide");
  if (q1 >= n || q2 >= n) throw std::out_of_range("bell_measure: qubit index out of range");
  const auto v = bell_vector(bits);
  const std::size_t lo = std::min(q1, q2), hi = std::max(q1, q2);
  Amplitudes out(dim_of(n - 2));
  double prob = 0.0;
  for (std::size_t r = 0; r < out.size(); ++r) {
    Complex acc{0.0, 0.0};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        // v is indexed by (bit of q1, bit of q2).
        const int bit_lo = lo == q1 ? a : b;
        const int bit_hi = lo == q1 ? b : a;
        const std::size_t idx = insert_bit(insert_bit(r, n - 1, lo, bit_lo), n, hi, bit_hi);
        acc += std::conj(v[2 * a + b]) * s[idx];
      }
    out[r] = acc;
    prob += std::norm(acc);
  }
  BellOutcome o{bits, std::clamp(prob, 0.0, 1.0), std::nullopt};
  if (prob > kProbabilityFloor) o.post_state = PureState::normalized(n - 2, std::move(out));
  return o;
}

inline std::array<BellOutcome, 4> bell_measure(const PureState& s, std::size_t q1, std::size_t q2) {
  return {project_bell(s, q1, q2, BellBits::from_index(0)), project_bell(s, q1, q2, BellBits::from_index(1)),
          project_bell(s, q1, q2, BellBits::from_index(2)), project_bell(s, q1, q2, BellBits::from_index(3))};
}

//============================================================================
// Outcome sources
//============================================================================

// Raised when a scripted outcome has (numerically) zero probability.
struct ZeroProbabilityBranch : std::domain_error {
  using std::domain_error::domain_error;
};

/// Either a seeded sampler or a fixed script of outcome indices.
class OutcomeSource {
 public:
  static OutcomeSource sampled(std::uint64_t seed, std::uint64_t stream = 0) {
    OutcomeSource s;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    s.rng_.emplace(seq);
    return s;
  }
  static OutcomeSource scripted(std::vector<int> outcomes) {
    OutcomeSource s;
    s.script_.assign(outcomes.begin(), outcomes.end());
    return s;
  }

  bool is_scripted() const noexcept { return !rng_.has_value(); }

  // Picks an index given the branch probabilities.
  int draw(std::span<const double> probabilities) {
    if (!rng_) {
      if (script_.empty()) throw std::invalid_argument("OutcomeSource: script exhausted");
      const int k = script_.front();
      script_.pop_front();
      if (k < 0 || static_cast<std::size_t>(k) >= probabilities.size())
        throw std::invalid_argument("OutcomeSource: scripted outcome out of range");
      if (probabilities[static_cast<std::size_t>(k)] <= kProbabilityFloor)
        throw ZeroProbabilityBranch("OutcomeSource: scripted outcome has zero probability");
      return k;
    }
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(*rng_);
    double acc = 0.0;
    int last = 0;
    for (std::size_t k = 0; k < probabilities.size(); ++k) {
      if (probabilities[k] <= kProbabilityFloor) continue;
      last = static_cast<int>(k);
      acc += probabilities[k];
      if (u < acc) return last;
    }
    return last;
  }

 private:
  std::optional<std::mt19937_64> rng_;
  std::deque<int> script_;
};

//============================================================================
// Parties, messages, transcripts
//============================================================================

enum class Role { Publisher, Retriever, Assistant, Idle };
enum class MessageScope { Broadcast, Directed };
enum class MessageTag { BellResult, PrepOutcome, Ack };

inline const char* to_string(MessageTag t) {
  switch (t) {
    case MessageTag::BellResult: return "bell_result";
    case MessageTag::PrepOutcome: return "prep_outcome";
    case MessageTag::Ack: return "ack";
  }
  return "?";
}

inline MessageTag tag_from_string(const std::string& s) {
  if (s == "bell_result") return MessageTag::BellResult;
  if (s == "prep_outcome") return MessageTag::PrepOutcome;
  if (s == "ack") return MessageTag::Ack;
  throw std::invalid_argument("unknown message tag: " + s);
}

struct Party {
  std::size_t id = 0;
  std::vector<std::size_t> local_qubits;
  Role role = Role::Idle;
};

struct ClassicalMessage {
  std::uint64_t seq = 0;
  std::size_t sender = 0;
  MessageScope scope = MessageScope::Broadcast;
  std::size_t recipient = 0;  // meaningful for Directed only
  std::vector<std::uint8_t> payload;
  MessageTag tag = MessageTag::Ack;

  bool operator==(const ClassicalMessage&) const = default;
};

struct MeasurementRecord {
  std::size_t party = 0;
  std::string basis;  // "bell" or the basis vectors as JSON text
  int outcome = 0;    // Bell index 0..3 or single bit
  double probability = 0.0;

  bool operator==(const MeasurementRecord&) const = default;
};

struct Transcript {
  std::vector<ClassicalMessage> messages;
  std::vector<MeasurementRecord> records;
  std::uint64_t seed = 0;

  bool operator==(const Transcript&) const = default;

  nlohmann::json to_json() const {
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& m : messages) {
      nlohmann::json j{{"seq", m.seq},
                       {"sender", m.sender},
                       {"scope", m.scope == MessageScope::Broadcast ? "broadcast" : "directed"},
                       {"tag", to_string(m.tag)},
                       {"payload", m.payload}};
      if (m.scope == MessageScope::Directed) j["recipient"] = m.recipient;
      ms.push_back(std::move(j));
    }
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : records)
      rs.push_back({{"party", r.party}, {"basis", r.basis}, {"outcome", r.outcome}, {"probability", r.probability}});
    return {{"seed", seed}, {"messages", std::move(ms)}, {"measurements", std::move(rs)}};
  }

  static Transcript from_json(const nlohmann::json& j) {
    Transcript t;
    t.seed = j.at("seed").get<std::uint64_t>();
    std::uint64_t last_seq = 0;
    for (const auto& m : j.at("messages")) {
      ClassicalMessage msg;
      msg.seq = m.at("seq").get<std::uint64_t>();
      if (!t.messages.empty() && msg.seq <= last_seq)
        throw std::invalid_argument("Transcript: message seq must be strictly increasing");
      last_seq = msg.seq;
      msg.sender = m.at("sender").get<std::size_t>();
      const auto scope = m.at("scope").get<std::string>();
      if (scope != "broadcast" && scope != "directed") throw std::invalid_argument("Transcript: bad scope " + scope);
      msg.scope = scope == "broadcast" ? MessageScope::Broadcast : MessageScope::Directed;
      if (msg.scope == MessageScope::Directed) msg.recipient = m.at("recipient").get<std::size_t>();
      msg.tag = tag_from_string(m.at("tag").get<std::string>());
      msg.payload = m.at("payload").get<std::vector<std::uint8_t>>();
      t.messages.push_back(std::move(msg));
    }
    for (const auto& r : j.at("measurements"))
      t.records.push_back({r.at("party").get<std::size_t>(), r.at("basis").get<std::string>(),
                           r.at("outcome").get<int>(), r.at("probability").get<double>()});
    return t;
  }
};

/// In-memory classical channel. Every post gets the next sequence number;
/// a party's inbox is delivered ordered by (sender, seq).
class MessageBus {
 public:
  explicit MessageBus(std::vector<ClassicalMessage>& log) : log_(log) {}

  std::uint64_t post(std::size_t sender, MessageScope scope, std::size_t recipient, MessageTag tag,
                     std::vector<std::uint8_t> payload) {
    const std::uint64_t seq = log_.empty() ? 1 : log_.back().seq + 1;
    log_.push_back({seq, sender, scope, recipient, std::move(payload), tag});
    return seq;
  }

  std::vector<ClassicalMessage> inbox(std::size_t party) const {
    std::vector<ClassicalMessage> out;
    for (const auto& m : log_)
      if (m.scope == MessageScope::Broadcast || m.recipient == party) out.push_back(m);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return std::tie(a.sender, a.seq) < std::tie(b.sender, b.seq);
    });
    return out;
  }

 private:
  std::vector<ClassicalMessage>& log_;
};

inline nlohmann::json basis_to_json(const QubitBasis& b) {
  auto vec = [](const Vector2& v) {
    return nlohmann::json{{v(0).real(), v(0).imag()}, {v(1).real(), v(1).imag()}};
  };
  return {{"b0", vec(b.b0())}, {"b1", vec(b.b1())}};
}

inline QubitBasis basis_from_json(const nlohmann::json& j) {
  auto vec = [](const nlohmann::json& a) {
    if (!a.is_array() || a.size() != 2) throw std::invalid_argument("basis JSON: vector must have 2 entries");
    Vector2 v;
    for (std::size_t k = 0; k < 2; ++k) v(static_cast<Eigen::Index>(k)) = {a[k].at(0).get<double>(), a[k].at(1).get<double>()};
    return v;
  };
  return {vec(j.at("b0")), vec(j.at("b1"))};
}

inline std::string basis_label(const QubitBasis& b) { return basis_to_json(b).dump(); }

inline nlohmann::json bases_to_json(const PreparationBases& b) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& q : b.per_party) per.push_back(basis_to_json(q));
  nlohmann::json j{{"context_free", b.context_free}, {"per_party", std::move(per)}};
  if (!b.context_free) {
    nlohmann::json pairs = nlohmann::json::object();
    for (const auto& [key, list] : b.per_pair) {
      nlohmann::json l = nlohmann::json::array();
      for (const auto& q : list) l.push_back(basis_to_json(q));
      pairs[std::to_string(key.first) + "," + std::to_string(key.second)] = std::move(l);
    }
    j["per_pair"] = std::move(pairs);
  }
  return j;
}

inline PreparationBases bases_from_json(const nlohmann::json& j) {
  PreparationBases b;
  b.context_free = j.at("context_free").get<bool>();
  for (const auto& q : j.at("per_party")) b.per_party.push_back(basis_from_json(q));
  if (!b.context_free) {
    for (const auto& [key, list] : j.at("per_pair").items()) {
      const auto comma = key.find(',');
      if (comma == std::string::npos) throw std::invalid_argument("bases JSON: pair key must be 'i,j'");
      const std::size_t i = std::stoul(key.substr(0, comma)), k = std::stoul(key.substr(comma + 1));
      std::vector<QubitBasis> v;
      for (const auto& q : list) v.push_back(basis_from_json(q));
      b.per_pair[{std::min(i, k), std::max(i, k)}] = std::move(v);
    }
  }
  return b;
}

//============================================================================
// Protocol configuration
//============================================================================

struct ProtocolRun {
  std::size_t n_parties = 0;
  PureState shared_state = ket0();
  std::optional<WebStateSpec> shared_spec;
  PreparationBases bases;
  PureState chi = ket0();
  std::size_t publisher = 0;
  std::size_t retriever = 1;
  std::set<std::size_t> cooperating;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_parties < 2) throw std::invalid_argument("ProtocolRun: need at least 2 parties");
    if (shared_state.n_qubits() != n_parties) throw std::invalid_argument("ProtocolRun: state/party count mismatch");
    if (publisher >= n_parties) throw std::invalid_argument("ProtocolRun: publisher owns no qubit");
    if (retriever >= n_parties) throw std::invalid_argument("ProtocolRun: retriever owns no qubit");
    if (publisher == retriever) throw std::invalid_argument("ProtocolRun: publisher and retriever coincide");
    if (chi.n_qubits() != 1) throw std::invalid_argument("ProtocolRun: chi must be a single qubit");
    if (bases.context_free && bases.size() != n_parties)
      throw std::invalid_argument("ProtocolRun: basis count mismatch");
    for (auto c : cooperating)
      if (c >= n_parties || c == publisher || c == retriever)
        throw std::invalid_argument("ProtocolRun: invalid cooperating party");
  }

  std::vector<std::size_t> assistants() const {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < n_parties; ++p)
      if (p != publisher && p != retriever) out.push_back(p);
    return out;
  }

  std::vector<Party> parties() const {
    std::vector<Party> out;
    for (std::size_t p = 0; p < n_parties; ++p) {
      Party party{p, {p}, Role::Idle};
      if (p == publisher) {
        party.role = Role::Publisher;
        party.local_qubits.push_back(n_parties);  // the qubit carrying chi
      } else if (p == retriever) {
        party.role = Role::Retriever;
      } else if (cooperating.contains(p)) {
        party.role = Role::Assistant;
      }
      out.push_back(std::move(party));
    }
    return out;
  }

  // All non-pair parties cooperate.
  ProtocolRun& cooperate_all() {
    const auto a = assistants();
    cooperating = {a.begin(), a.end()};
    return *this;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"n_parties", n_parties},
                     {"state", state_to_json(shared_state)},
                     {"bases", bases_to_json(bases)},
                     {"chi", state_to_json(chi)},
                     {"publisher", publisher},
                     {"retriever", retriever},
                     {"cooperating", std::vector<std::size_t>(cooperating.begin(), cooperating.end())},
                     {"seed", seed}};
    if (shared_spec) j["spec"] = shared_spec->to_json();
    return j;
  }

  // The state may be given explicitly or as a web-state spec.
  static ProtocolRun from_json(const nlohmann::json& j) {
    ProtocolRun r;
    if (j.contains("spec")) {
      r.shared_spec = WebStateSpec::from_json(j.at("spec"));
      r.shared_state = make_web_state(*r.shared_spec);
    } else {
      r.shared_state = state_from_json(j.at("state"));
    }
    r.n_parties = j.value("n_parties", r.shared_state.n_qubits());
    r.bases = bases_from_json(j.at("bases"));
    r.chi = state_from_json(j.at("chi"));
    r.publisher = j.at("publisher").get<std::size_t>();
    r.retriever = j.at("retriever").get<std::size_t>();
    if (j.contains("cooperating")) {
      const auto c = j.at("cooperating").get<std::vector<std::size_t>>();
      r.cooperating = {c.begin(), c.end()};
    } else {
      r.cooperate_all();
    }
    r.seed = j.value("seed", std::uint64_t{0});
    r.validate();
    return r;
  }

  static ProtocolRun with(PureState shared, PreparationBases bases, PureState chi, std::size_t publisher,
                          std::size_t retriever, std::uint64_t seed = 0) {
    ProtocolRun r;
    r.n_parties = shared.n_qubits();
    r.shared_state = std::move(shared);
    r.bases = std::move(bases);
    r.chi = std::move(chi);
    r.publisher = publisher;
    r.retriever = retriever;
    r.seed = seed;
    r.cooperate_all();
    r.validate();
    return r;
  }
};

/// The retriever's correction: undo the residual pair state to |phi+> and
/// then apply the Pauli fix for the Bell result. Computed by classically
/// simulating the public shared state on the recorded outcomes.
inline Matrix2 compute_correction(const PureState& shared, const PreparationBases& bases, BellBits bell,
                                  const std::map<std::size_t, int>& prep_outcomes, std::size_t publisher,
                                  std::size_t retriever) {
  const std::size_t n = shared.n_qubits();
  if (publisher >= n || retriever >= n || publisher == retriever)
    throw std::invalid_argument("compute_correction: invalid pair");
  PureState s = shared;
  for (std::size_t q = n; q-- > 0;) {
    if (q == publisher || q == retriever) continue;
    const auto it = prep_outcomes.find(q);
    if (it == prep_outcomes.end())
      throw std::invalid_argument("compute_correction: missing outcome for party " + std::to_string(q));
    auto b = project_onto(s, q, bases.basis_for(q, publisher, retriever), it->second);
    if (!b.post_state) throw ZeroProbabilityBranch("compute_correction: outcomes have zero probability");
    s = *std::move(b.post_state);
  }
  if (!is_maximally_entangled(s, kTol))
    throw std::domain_error("compute_correction: residual pair is not maximally entangled");
  // Residual = sum M[a][r] |a>_pub |r>_ret = (I x W)|phi+>, W = sqrt2 M^T.
  Matrix2 m;
  const bool pub_first = publisher < retriever;
  for (int a = 0; a < 2; ++a)
    for (int r = 0; r < 2; ++r) m(a, r) = pub_first ? s[static_cast<std::size_t>(2 * a + r)] : s[static_cast<std::size_t>(2 * r + a)];
  const Matrix2 w = std::sqrt(2.0) * m.transpose();
  const Matrix2 u = pauli_correction(bell) * w.adjoint();
  if (!is_unitary(u)) throw InvariantError("compute_correction: correction is not unitary");
  return u;
}

//============================================================================
// Session: a single protocol execution over a live register
//============================================================================

struct Register {
  PureState state;
  std::vector<std::size_t> labels;  // register position -> global qubit id

  std::size_t position(std::size_t label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw std::invalid_argument("Register: qubit " + std::to_string(label) + " not present");
    return static_cast<std::size_t>(it - labels.begin());
  }
  bool contains(std::size_t label) const { return std::find(labels.begin(), labels.end(), label) != labels.end(); }
};

struct RetrievalResult {
  PureState final_state;
  double fidelity = 0.0;
  Matrix2 correction;
};

/// Global qubit ids: party p owns qubit p; chi is qubit n_parties and is
/// held by the publisher. Steps may be issued in any order; the retrieval
/// completes once every assistant has reported.
class WebPageSession {
 public:
  explicit WebPageSession(ProtocolRun run) : run_(std::move(run)) {
    run_.validate();
    const PureState factors[] = {run_.shared_state, run_.chi};
    reg_.state = embed_product(factors);
    for (std::size_t q = 0; q <= run_.n_parties; ++q) reg_.labels.push_back(q);
    transcript_.seed = run_.seed;
  }

  // Resumes after `publish` from its residual and transcript.
  WebPageSession(ProtocolRun run, PureState residual, Transcript transcript)
      : run_(std::move(run)), transcript_(std::move(transcript)) {
    run_.validate();
    reg_.state = std::move(residual);
    for (std::size_t q = 0; q < run_.n_parties; ++q)
      if (q != run_.publisher) reg_.labels.push_back(q);
    if (reg_.labels.size() != reg_.state.n_qubits())
      throw std::invalid_argument("WebPageSession: residual does not match the post-publish register");
    published_ = std::any_of(transcript_.messages.begin(), transcript_.messages.end(),
                             [](const auto& m) { return m.tag == MessageTag::BellResult; });
    if (!published_) throw std::invalid_argument("WebPageSession: transcript has no bell_result");
  }

  const ProtocolRun& run() const noexcept { return run_; }
  const Register& reg() const noexcept { return reg_; }
  const Transcript& transcript() const noexcept { return transcript_; }
  double branch_probability() const noexcept { return probability_; }

  // Bell measurement of chi with the publisher's share, then broadcast.
  BellBits publish(OutcomeSource& src) {
    if (published_) throw std::logic_error("publish: already published");
    const std::size_t pc = reg_.position(run_.n_parties);
    const std::size_t pp = reg_.position(run_.publisher);
    const auto outcomes = bell_measure(reg_.state, pc, pp);
    std::array<double, 4> probs{};
    for (int k = 0; k < 4; ++k) probs[static_cast<std::size_t>(k)] = outcomes[static_cast<std::size_t>(k)].probability;
    const int k = src.draw(probs);
    const auto& o = outcomes[static_cast<std::size_t>(k)];
    reg_.state = *o.post_state;
    std::erase(reg_.labels, run_.n_parties);
    std::erase(reg_.labels, run_.publisher);
    probability_ *= o.probability;
    transcript_.records.push_back({run_.publisher, "bell", k, o.probability});
    MessageBus(transcript_.messages)
        .post(run_.publisher, MessageScope::Broadcast, 0, MessageTag::BellResult,
              {static_cast<std::uint8_t>(o.bits.kind), static_cast<std::uint8_t>(o.bits.sign)});
    published_ = true;
    return o.bits;
  }

  // An assistant measures in its preparation basis and tells the retriever.
  int assist(std::size_t party, OutcomeSource& src) {
    if (party == run_.publisher || party == run_.retriever || party >= run_.n_parties)
      throw std::invalid_argument("assist: not an assistant");
    const auto& basis = run_.bases.basis_for(party, run_.publisher, run_.retriever);
    const auto branches = measure_in_basis(reg_.state, reg_.position(party), basis);
    const std::array<double, 2> probs{branches[0].probability, branches[1].probability};
    const int bit = src.draw(probs);
    const auto& b = branches[static_cast<std::size_t>(bit)];
    reg_.state = *b.post_state;
    std::erase(reg_.labels, party);
    probability_ *= b.probability;
    transcript_.records.push_back({party, basis_label(basis), bit, b.probability});
    MessageBus(transcript_.messages)
        .post(party, MessageScope::Directed, run_.retriever, MessageTag::PrepOutcome, {static_cast<std::uint8_t>(bit)});
    return bit;
  }

  // Retriever's qubit once all other qubits are gone (before correction).
  PureState retriever_qubit() const {
    if (reg_.labels.size() != 1 || reg_.labels.front() != run_.retriever)
      throw std::logic_error("retriever_qubit: other qubits still present");
    return reg_.state;
  }

  /// Reads the inbox, derives the correction from the public description of
  /// the shared state, applies it and acknowledges.
  RetrievalResult complete_retrieval() {
    std::optional<BellBits> bell;
    std::map<std::size_t, int> outcomes;
    for (const auto& m : MessageBus(transcript_.messages).inbox(run_.retriever)) {
      if (m.tag == MessageTag::BellResult && m.sender == run_.publisher) bell = BellBits{m.payload.at(0), m.payload.at(1)};
      if (m.tag == MessageTag::PrepOutcome) outcomes[m.sender] = m.payload.at(0);
    }
    if (!bell) throw std::logic_error("complete_retrieval: no bell_result received");
    for (auto a : run_.assistants())
      if (!outcomes.contains(a))
        throw std::logic_error("complete_retrieval: missing cooperation from party " + std::to_string(a));
    const Matrix2 u =
        compute_correction(run_.shared_state, run_.bases, *bell, outcomes, run_.publisher, run_.retriever);
    const PureState final_state = apply_one_qubit(retriever_qubit(), u, 0);
    MessageBus(transcript_.messages).post(run_.retriever, MessageScope::Broadcast, 0, MessageTag::Ack, {1});
    const double f = std::norm(inner(run_.chi, final_state));
    return {final_state, std::clamp(f, 0.0, 1.0), u};
  }

 private:
  ProtocolRun run_;
  Register reg_{ket0(), {}};
  Transcript transcript_;
  double probability_ = 1.0;
  bool published_ = false;
};

//============================================================================
// Protocol operations
//============================================================================

struct PublishResult {
  PureState residual;  // parties other than the publisher, ascending id
  Transcript transcript;
  BellBits bell;
};

inline PublishResult publish(const ProtocolRun& run) {
  WebPageSession s(run);
  auto src = OutcomeSource::sampled(run.seed, 0);
  const BellBits bits = s.publish(src);
  return {s.reg().state, s.transcript(), bits};
}

struct RetrieveResult {
  PureState final_state;
  double fidelity = 0.0;
  Transcript transcript;
};

inline RetrieveResult retrieve(const PureState& residual, const ProtocolRun& run, const Transcript& transcript) {
  const auto needed = run.assistants();
  if (!std::includes(run.cooperating.begin(), run.cooperating.end(), needed.begin(), needed.end()))
    throw std::invalid_argument("retrieve: every assistant must cooperate (use noncooperative_retrieve)");
  WebPageSession s(run, residual, transcript);
  auto src = OutcomeSource::sampled(run.seed, 1);
  for (auto a : needed) s.assist(a, src);
  auto r = s.complete_retrieval();
  return {r.final_state, r.fidelity, s.transcript()};
}

struct TeleportResult {
  PureState final_state;
  Transcript transcript;
  double fidelity = 0.0;
};

/// Plain two-party teleportation over |phi+>.
inline TeleportResult teleport(const PureState& chi, std::uint64_t seed) {
  auto run = ProtocolRun::with(make_ghz(2), PreparationBases::ghz(2), chi, 0, 1, seed);
  const auto pub = publish(run);
  auto r = retrieve(pub.residual, run, pub.transcript);
  return {r.final_state, r.transcript, r.fidelity};
}

struct BranchResult {
  std::vector<int> script;  // Bell index followed by assistant bits (ascending id)
  double probability = 0.0;
  PureState final_state;
  double fidelity = 0.0;
};

/// Every branch of a cooperative run: 4 Bell outcomes times 2^(N-2)
/// assistant outcome strings, minus zero-probability ones.
inline std::vector<BranchResult> enumerate_retrieval(const ProtocolRun& run) {
  const auto assistants = run.assistants();
  std::vector<BranchResult> out;
  for (int bell = 0; bell < 4; ++bell)
    for (std::size_t mask = 0; mask < dim_of(assistants.size()); ++mask) {
      std::vector<int> script{bell};
      for (std::size_t k = 0; k < assistants.size(); ++k) script.push_back(bit_of(mask, assistants.size(), k));
      try {
        WebPageSession s(run);
        auto src = OutcomeSource::scripted(script);
        s.publish(src);
        for (auto a : assistants) s.assist(a, src);
        auto r = s.complete_retrieval();
        out.push_back({script, s.branch_probability(), r.final_state, r.fidelity});
      } catch (const ZeroProbabilityBranch&) {
      }
    }
  return out;
}

/// Re-executes a run with outcomes taken from the transcript's measurement
/// records, in the recorded order.
inline RetrievalResult replay(const ProtocolRun& run, const Transcript& transcript) {
  WebPageSession s(run);
  std::vector<int> script;
  for (const auto& r : transcript.records) script.push_back(r.outcome);
  auto src = OutcomeSource::scripted(script);
  for (const auto& r : transcript.records) {
    if (r.basis == "bell") s.publish(src);
    else s.assist(r.party, src);
  }
  return s.complete_retrieval();
}

struct NoncooperativeResult {
  DensityMatrix rho_retriever;
  double fidelity = 0.0;
};

/// Retriever applies the Pauli fix for the public Bell result only; the
/// other parties keep their qubits unmeasured.
inline NoncooperativeResult noncooperative_retrieve(const PublishResult& pub, const ProtocolRun& run) {
  PureState s = pub.residual;
  // Residual holds every party except the publisher in ascending order.
  std::size_t pos = 0;
  for (std::size_t p = 0; p < run.retriever; ++p)
    if (p != run.publisher) ++pos;
  s = apply_one_qubit(s, pauli_correction(pub.bell), pos);
  const std::size_t keep[] = {pos};
  auto rho = partial_trace(s, keep);
  const double f = fidelity_state(rho, run.chi);
  return {std::move(rho), f};
}

/// Probability-weighted noncooperative fidelity over the four Bell results.
inline double noncooperative_average_fidelity(const ProtocolRun& run) {
  double avg = 0.0;
  for (int k = 0; k < 4; ++k) {
    WebPageSession s(run);
    auto src = OutcomeSource::scripted({k});
    BellBits bits;
    try {
      bits = s.publish(src);
    } catch (const ZeroProbabilityBranch&) {
      continue;
    }
    const PublishResult pub{s.reg().state, s.transcript(), bits};
    avg += s.branch_probability() * noncooperative_retrieve(pub, run).fidelity;
  }
  return avg;
}

//----------------------------------------------------------------------------
// Audits
//----------------------------------------------------------------------------

namespace detail {

// Post-protocol state of every qubit except the retriever's, averaged over
// branches: the Bell projector on (chi, publisher) and each assistant's
// collapsed basis vector. Qubit order: chi, publisher, assistants ascending.
inline DensityMatrix environment_state(const ProtocolRun& run) {
  const auto assistants = run.assistants();
  const std::size_t n_env = 2 + assistants.size();
  const auto d = static_cast<Eigen::Index>(dim_of(n_env));
  MatrixX rho = MatrixX::Zero(d, d);
  for (const auto& b : enumerate_retrieval(run)) {
    Eigen::VectorXcd env = bell_vector(BellBits::from_index(b.script[0]));
    for (std::size_t k = 0; k < assistants.size(); ++k) {
      const auto& v = run.bases.basis_for(assistants[k], run.publisher, run.retriever).vector(b.script[k + 1]);
      Eigen::VectorXcd next(env.size() * 2);
      for (Eigen::Index i = 0; i < env.size(); ++i) {
        next[2 * i] = env[i] * v(0);
        next[2 * i + 1] = env[i] * v(1);
      }
      env = std::move(next);
    }
    rho += b.probability * env * env.adjoint();
  }
  return detail::hermitize(std::move(rho));
}

}  // namespace detail

struct NoCloningAudit {
  double trace_distance = 0.0;
  bool pass = false;
};

/// After a full cooperative retrieval, the joint state left with everyone
/// but the retriever must not depend on chi.
inline NoCloningAudit no_cloning_audit(const ProtocolRun& run, const PureState& chi_a, const PureState& chi_b,
                                       double tol = kTol) {
  ProtocolRun a = run, b = run;
  a.chi = chi_a;
  b.chi = chi_b;
  const double dist = trace_distance(detail::environment_state(a), detail::environment_state(b));
  return {dist, dist <= tol};
}

enum class StepKind { Publish, Assist };
struct ProtocolStep {
  StepKind kind = StepKind::Publish;
  std::size_t party = 0;
};

inline std::vector<ProtocolStep> publish_first_schedule(const ProtocolRun& run) {
  std::vector<ProtocolStep> steps{{StepKind::Publish, run.publisher}};
  for (auto a : run.assistants()) steps.push_back({StepKind::Assist, a});
  return steps;
}

inline std::vector<ProtocolStep> random_schedule(const ProtocolRun& run, std::uint64_t seed) {
  auto steps = publish_first_schedule(run);
  std::mt19937_64 rng(seed);
  std::shuffle(steps.begin(), steps.end(), rng);
  return steps;
}

struct OrderCheck {
  bool pass = true;
  std::size_t branches = 0;
  double max_probability_gap = 0.0;
  double min_fidelity = 1.0;
};

/// Branch by branch, the retrieved state under `schedule` must match the
/// publish-first execution up to global phase, with equal probability.
inline OrderCheck order_independence_check(const ProtocolRun& run, std::span<const ProtocolStep> schedule) {
  const auto assistants = run.assistants();
  if (schedule.size() != assistants.size() + 1) throw std::invalid_argument("order_independence_check: bad schedule");
  OrderCheck out;
  for (const auto& ref : enumerate_retrieval(run)) {
    std::map<std::size_t, int> bit_of_party;
    for (std::size_t k = 0; k < assistants.size(); ++k) bit_of_party[assistants[k]] = ref.script[k + 1];
    std::vector<int> script;
    for (const auto& st : schedule) script.push_back(st.kind == StepKind::Publish ? ref.script[0] : bit_of_party.at(st.party));
    WebPageSession s(run);
    auto src = OutcomeSource::scripted(script);
    for (const auto& st : schedule) {
      if (st.kind == StepKind::Publish) s.publish(src);
      else s.assist(st.party, src);
    }
    const auto r = s.complete_retrieval();
    ++out.branches;
    out.max_probability_gap = std::max(out.max_probability_gap, std::abs(s.branch_probability() - ref.probability));
    out.min_fidelity = std::min(out.min_fidelity, r.fidelity);
    if (!states_equal_up_to_phase(r.final_state, ref.final_state, kTol)) out.pass = false;
  }
  out.pass = out.pass && out.max_probability_gap <= kTol && out.min_fidelity >= 1.0 - kTol;
  return out;
}

struct WithheldReport {
  // Worst over known-outcome branches of the best achievable fidelity.
  double worst_branch_best_fidelity = 1.0;
  std::size_t branches = 0;
};

/// The retriever knows the Bell result and every assistant outcome except
/// `withheld`'s; its qubit is then a mixture over the withheld outcome. For
/// each known branch the best single-qubit unitary is found by brute force
/// over an Euler-angle grid.
inline WithheldReport withheld_assistant_fidelity(const ProtocolRun& run, std::size_t withheld, int grid = 24) {
  const auto assistants = run.assistants();
  const auto wpos = std::find(assistants.begin(), assistants.end(), withheld);
  if (wpos == assistants.end()) throw std::invalid_argument("withheld_assistant_fidelity: not an assistant");
  const std::size_t widx = static_cast<std::size_t>(wpos - assistants.begin());

  std::vector<Matrix2> grid_unitaries;
  for (int a = 0; a < grid; ++a)
    for (int b = 0; b <= grid / 2; ++b)
      for (int c = 0; c < grid; ++c)
        grid_unitaries.push_back(gates::euler(2 * std::numbers::pi * a / grid, 2 * std::numbers::pi * b / grid,
                                              2 * std::numbers::pi * c / grid));

  // key: script with the withheld bit cleared
  std::map<std::vector<int>, Matrix2> mixtures;
  std::map<std::vector<int>, double> weights;
  for (int bell = 0; bell < 4; ++bell)
    for (std::size_t mask = 0; mask < dim_of(assistants.size()); ++mask) {
      std::vector<int> script{bell};
      for (std::size_t k = 0; k < assistants.size(); ++k) script.push_back(bit_of(mask, assistants.size(), k));
      try {
        WebPageSession s(run);
        auto src = OutcomeSource::scripted(script);
        s.publish(src);
        for (auto a : assistants) s.assist(a, src);
        const auto q = s.retriever_qubit();
        Eigen::Vector2cd v(q[0], q[1]);
        auto key = script;
        key[widx + 1] = -1;
        auto [it, inserted] = mixtures.try_emplace(key, Matrix2::Zero());
        it->second += s.branch_probability() * v * v.adjoint();
        weights[key] += s.branch_probability();
      } catch (const ZeroProbabilityBranch&) {
      }
    }
  WithheldReport rep;
  const Eigen::Vector2cd chi(run.chi[0], run.chi[1]);
  for (const auto& [key, m] : mixtures) {
    const Matrix2 rho = m / weights.at(key);
    double best = 0.0;
    for (const auto& u : grid_unitaries) {
      const Eigen::Vector2cd w = u.adjoint() * chi;
      best = std::max(best, (w.adjoint() * rho * w)(0, 0).real());
    }
    rep.worst_branch_best_fidelity = std::min(rep.worst_branch_best_fidelity, best);
    ++rep.branches;
  }
  return rep;
}

}  // namespace qweb
