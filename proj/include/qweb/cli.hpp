#pragma once

#include <cctype>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eprep.hpp"
#include "measures.hpp"
#include "protocol.hpp"
#include "statevec.hpp"
#include "webstates.hpp"

namespace qweb::cli {

inline constexpr const char* kVersion = "0.1.0";

// Bad input that is the caller's fault: exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

//----------------------------------------------------------------------------
// Files
//----------------------------------------------------------------------------

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("malformed JSON in " + path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  out << j.dump(2) << '\n';
}

// State files may carry a "bases" hint next to the amplitudes.
inline void save_state(const PureState& s, const std::string& path, const nlohmann::json& bases_hint = nullptr) {
  auto j = state_to_json(s);
  if (!bases_hint.is_null()) j["bases"] = bases_hint;
  write_json_file(path, j);
}

inline PureState load_state(const std::string& path) {
  const auto j = read_json_file(path);
  try {
    return state_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed state file " + path + ": " + e.what());
  }
}

//----------------------------------------------------------------------------
// Flag values
//----------------------------------------------------------------------------

// "A".."Z" (case-insensitive) or a decimal index.
inline std::size_t parse_party(const std::string& text) {
  if (text.size() == 1 && std::isalpha(static_cast<unsigned char>(text[0])))
    return static_cast<std::size_t>(std::toupper(static_cast<unsigned char>(text[0])) - 'A');
  try {
    std::size_t used = 0;
    const auto v = std::stoul(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("bad party: " + text);
}

inline std::string party_name(std::size_t p) {
  return p < 26 ? std::string(1, static_cast<char>('A' + p)) : std::to_string(p);
}

// "AB", "A,B" or "0,1".
inline PartyPair parse_pair(const std::string& text) {
  const auto comma = text.find(',');
  if (comma != std::string::npos) return {parse_party(text.substr(0, comma)), parse_party(text.substr(comma + 1))};
  if (text.size() == 2) return {parse_party(text.substr(0, 1)), parse_party(text.substr(1))};
  throw UsageError("bad pair: " + text);
}

// Named presets, or explicit amplitudes as JSON [[re, im], [re, im]] or "a,b".
// "+/-" expands to both x-basis states.
inline std::vector<PureState> parse_chi(const std::string& text) {
  if (text == "0") return {ket0()};
  if (text == "1") return {ket1()};
  if (text == "+") return {ket_plus()};
  if (text == "-") return {ket_minus()};
  if (text == "+/-") return {ket_plus(), ket_minus()};
  if (text == "i") return {ket_plus_i()};
  if (text == "-i") return {PureState(1, {M_SQRT1_2, -kI * M_SQRT1_2})};
  Amplitudes amps;
  try {
    if (!text.empty() && text.front() == '[') {
      for (const auto& a : nlohmann::json::parse(text)) amps.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
    } else {
      std::stringstream ss(text);
      std::string part;
      while (std::getline(ss, part, ',')) amps.emplace_back(std::stod(part), 0.0);
    }
  } catch (const std::exception&) {
    throw UsageError("bad --chi value: " + text);
  }
  if (amps.size() != 2) throw UsageError("--chi needs two amplitudes");
  double sq = std::norm(amps[0]) + std::norm(amps[1]);
  if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) throw InvariantError("--chi is not normalized");
  return {PureState::normalized(1, std::move(amps))};
}

// ghz | computational | contextual | auto (hint in the state file, else
// ghz) | path to a bases JSON file.
inline PreparationBases resolve_bases(const std::string& choice, std::size_t n, const std::string& state_path) {
  std::string c = choice;
  nlohmann::json hint;
  if (c == "auto") {
    if (!state_path.empty()) {
      const auto j = read_json_file(state_path);
      if (j.contains("bases")) hint = j.at("bases");
    }
    if (hint.is_null()) c = "ghz";
    else if (hint.is_string()) c = hint.get<std::string>();
  }
  try {
    if (hint.is_object()) return bases_from_json(hint);
    if (c == "ghz") return PreparationBases::ghz(n);
    if (c == "computational") return PreparationBases::computational(n);
    if (c == "contextual") {
      if (n != 4) throw UsageError("contextual bases need 4 parties");
      return contextual_example_bases();
    }
    return bases_from_json(read_json_file(c));
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed bases: " + std::string(e.what()));
  }
}

//----------------------------------------------------------------------------
// Reports
//----------------------------------------------------------------------------

struct Report {
  nlohmann::json command;
  nlohmann::json results = nlohmann::json::object();
  bool pass = true;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"command", command}, {"results", results}, {"pass", pass}, {"version", kVersion}, {"seed", seed}};
  }
};

inline void print_human(const nlohmann::json& j, std::ostream& out, const std::string& prefix = "") {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) print_human(v, out, prefix.empty() ? k : prefix + "." + k);
    return;
  }
  if (j.is_array() && !j.empty() && (j.front().is_object() || j.front().is_array()) && j.size() > 8) {
    out << prefix << ": [" << j.size() << " entries]\n";
    return;
  }
  out << prefix << ": " << j.dump() << '\n';
}

//----------------------------------------------------------------------------
// Verbs
//----------------------------------------------------------------------------

struct Options {
  std::uint64_t seed = 0;
  double tol = kTol;
  bool json = false;
  std::string out;
  std::string state;
  std::string bases = "auto";
  std::string pair = "AB";
  std::string publisher = "A";
  std::string retriever = "B";
  std::string chi = "+";
  std::string config;
  std::string transcript;
  std::size_t n = 0;
  std::size_t ghz = 0;
  std::size_t web = 0;
  bool contextual = false;
  bool enumerate = false;
  bool noncooperative = false;
  int multistarts = 16;
};

inline PureState require_state(const Options& o) {
  if (o.state.empty()) throw UsageError("--state is required");
  return load_state(o.state);
}

inline void cmd_gen(const Options& o, Report& r) {
  PureState s = ket0();
  nlohmann::json hint;
  const int picked = (o.ghz > 0) + (o.web > 0) + (o.contextual ? 1 : 0);
  if (picked != 1) throw UsageError("gen needs exactly one of --ghz N, --web N, --contextual");
  if (o.ghz > 0) {
    s = make_ghz(o.ghz);
    hint = "ghz";
    r.results["kind"] = "ghz";
  } else if (o.web > 0) {
    if (o.web < 3) throw UsageError("--web needs N >= 3");
    auto [spec, state] = random_web_state(o.web, o.seed);
    s = std::move(state);
    hint = "computational";
    r.results["kind"] = "web";
    r.results["spec"] = spec.to_json();
  } else {
    s = make_contextual_example();
    hint = bases_to_json(contextual_example_bases());
    r.results["kind"] = "contextual";
  }
  r.results["n_qubits"] = s.n_qubits();
  if (o.out.empty()) {
    r.results["state"] = state_to_json(s);
  } else {
    save_state(s, o.out, hint);
    r.results["out"] = o.out;
  }
}

inline void cmd_verify(const Options& o, Report& r) {
  const auto s = require_state(o);
  const auto bases = resolve_bases(o.bases, s.n_qubits(), o.state);
  const auto rep = verify_web_state(s, bases, o.tol);
  r.results["verification"] = rep.to_json();
  r.pass = rep.pass;
}

inline void cmd_teleport(const Options& o, Report& r) {
  double worst = 1.0;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& chi : parse_chi(o.chi)) {
    const auto t = teleport(chi, o.seed);
    worst = std::min(worst, t.fidelity);
    runs.push_back({{"chi", state_to_json(chi)},
                    {"fidelity", t.fidelity},
                    {"final_state", state_to_json(t.final_state)},
                    {"transcript", t.transcript.to_json()}});
  }
  r.results["fidelity"] = worst;
  r.results["runs"] = std::move(runs);
  r.pass = worst >= 1.0 - o.tol;
}

inline ProtocolRun run_from_options(const Options& o, const PureState& chi) {
  if (!o.config.empty()) {
    try {
      auto run = ProtocolRun::from_json(read_json_file(o.config));
      run.chi = chi;
      return run;
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("malformed run configuration: " + std::string(e.what()));
    }
  }
  const auto s = require_state(o);
  auto run = ProtocolRun::with(s, resolve_bases(o.bases, s.n_qubits(), o.state), chi, parse_party(o.publisher),
                               parse_party(o.retriever), o.seed);
  return run;
}

inline void cmd_run(const Options& o, Report& r) {
  double worst = 1.0;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& chi : parse_chi(o.chi)) {
    auto run = run_from_options(o, chi);
    if (o.config.empty()) run.seed = o.seed;
    nlohmann::json entry{{"chi", state_to_json(chi)},
                         {"publisher", party_name(run.publisher)},
                         {"retriever", party_name(run.retriever)}};
    if (o.noncooperative) {
      const double f = noncooperative_average_fidelity(run);
      entry["noncooperative_average_fidelity"] = f;
      entry["cloning_bound"] = cloning_fidelity_bound(static_cast<int>(run.n_parties));
      runs.push_back(std::move(entry));
      continue;
    }
    if (o.enumerate) {
      const auto branches = enumerate_retrieval(run);
      double mn = 1.0, total = 0.0;
      for (const auto& b : branches) {
        mn = std::min(mn, b.fidelity);
        total += b.probability;
      }
      entry["branches"] = branches.size();
      entry["total_probability"] = total;
      entry["fidelity"] = mn;
      worst = std::min(worst, mn);
    } else {
      const auto pub = publish(run);
      const auto ret = retrieve(pub.residual, run, pub.transcript);
      entry["bell"] = pub.bell.name();
      entry["fidelity"] = ret.fidelity;
      entry["final_state"] = state_to_json(ret.final_state);
      entry["transcript"] = ret.transcript.to_json();
      worst = std::min(worst, ret.fidelity);
      if (!o.out.empty()) write_json_file(o.out, {{"run", run.to_json()}, {"transcript", ret.transcript.to_json()}});
    }
    runs.push_back(std::move(entry));
  }
  if (!o.noncooperative) {
    r.results["fidelity"] = worst;
    r.pass = worst >= 1.0 - o.tol;
  }
  r.results["runs"] = std::move(runs);
}

inline void cmd_measure(const Options& o, Report& r) {
  const auto s = require_state(o);
  const auto pair = parse_pair(o.pair);
  validate_pair(s.n_qubits(), pair);
  nlohmann::json single = nlohmann::json::array();
  for (std::size_t q = 0; q < s.n_qubits(); ++q) single.push_back(entropy_of_entanglement(s, {q}));
  r.results["single_qubit_entropy"] = std::move(single);
  const auto rho = partial_trace(s, {pair.first, pair.second});
  const OptimizerConfig cfg{.multistarts = o.multistarts, .seed = o.seed};
  r.results["pair"] = party_name(pair.first) + party_name(pair.second);
  r.results["concurrence"] = concurrence(rho);
  r.results["entanglement_of_formation"] = entanglement_of_formation_2q(rho);
  r.results["concurrence_of_assistance"] = concurrence_of_assistance(rho);
  r.results["entanglement_of_assistance"] = entanglement_of_assistance_2q(rho, cfg).to_json();
  r.results["singlet_fraction"] = singlet_fraction(rho).to_json();
  const int n = static_cast<int>(s.n_qubits());
  r.results["singlet_fraction_bound"] = singlet_fraction_bound(n);
  r.results["cloning_fidelity_bound"] = cloning_fidelity_bound(n);
}

inline void cmd_eprep(const Options& o, Report& r) {
  const auto s = require_state(o);
  const auto pair = parse_pair(o.pair);
  const OptimizerConfig cfg{.multistarts = o.multistarts, .seed = o.seed};
  const auto est = estimate_entanglement_of_preparation(s, pair, cfg);
  const auto ea = entanglement_of_assistance_2q(partial_trace(s, {pair.first, pair.second}));
  auto j = est.to_json();
  j["label"] = est.value >= 1.0 - 1e-6 ? "certified" : "lower bound";
  r.results["entanglement_of_preparation"] = std::move(j);
  r.results["entanglement_of_assistance"] = ea.value;
  r.results["pair"] = party_name(pair.first) + party_name(pair.second);
  r.pass = est.value >= -1e-12 && est.value <= 1.0 + 1e-12 && est.value <= ea.value + 1e-3;
}

// Transcript files written by `run --out` embed their run configuration;
// --config overrides it.
inline void cmd_replay(const Options& o, Report& r) {
  if (o.transcript.empty()) throw UsageError("--transcript is required");
  const auto tj = read_json_file(o.transcript);
  try {
    nlohmann::json cfg;
    if (!o.config.empty()) cfg = read_json_file(o.config);
    else if (tj.contains("run")) cfg = tj.at("run");
    else throw UsageError("replay needs --config or a transcript file with an embedded run");
    const auto run = ProtocolRun::from_json(cfg);
    const auto t = Transcript::from_json(tj.contains("transcript") ? tj.at("transcript") : tj);
    const auto res = replay(run, t);
    r.results["fidelity"] = res.fidelity;
    r.results["final_state"] = state_to_json(res.final_state);
    r.results["measurements"] = t.records.size();
    r.pass = res.fidelity >= 1.0 - o.tol;
    r.seed = t.seed;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed replay input: " + std::string(e.what()));
  }
}

//----------------------------------------------------------------------------
// Entry point
//----------------------------------------------------------------------------

/// Exit codes: 0 pass, 1 verification/protocol failure or norm violation,
/// 2 usage error or malformed input.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Web-page protocol simulator and entanglement toolkit", "qweb"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kVersion);
  Options o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "RNG seed");
    sub->add_option("--tol", o.tol, "Pass tolerance")->check(CLI::PositiveNumber);
    sub->add_flag("--json", o.json, "Print the report as JSON");
    sub->add_option("--out", o.out, "Output file");
  };
  auto with_state = [&o](CLI::App* sub) { sub->add_option("--state", o.state, "State JSON file"); };
  auto with_bases = [&o](CLI::App* sub) {
    sub->add_option("--bases", o.bases, "ghz | computational | contextual | auto | bases JSON file");
  };

  auto* gen = app.add_subcommand("gen", "Generate a GHZ, web or contextual state");
  common(gen);
  gen->add_option("--ghz", o.ghz, "GHZ state on N qubits");
  gen->add_option("--web", o.web, "Random-phase web state on N qubits");
  gen->add_option("--n", o.n, "Alias for --web");
  gen->add_flag("--contextual", o.contextual, "Four-party contextual example");

  auto* verify = app.add_subcommand("verify", "Check the web-state property");
  common(verify);
  with_state(verify);
  with_bases(verify);

  auto* tele = app.add_subcommand("teleport", "Two-party teleportation");
  common(tele);
  tele->add_option("--chi", o.chi, "0 | 1 | + | - | +/- | i | -i | a,b | [[re,im],[re,im]]");

  auto* run = app.add_subcommand("run", "Publish and retrieve over a shared state");
  common(run);
  with_state(run);
  with_bases(run);
  run->add_option("--publisher", o.publisher, "Party letter or index");
  run->add_option("--retriever", o.retriever, "Party letter or index");
  run->add_option("--chi", o.chi, "State to publish, same forms as teleport");
  run->add_option("--config", o.config, "Run configuration JSON");
  run->add_flag("--enumerate", o.enumerate, "Every outcome branch instead of one sampled run");
  run->add_flag("--noncooperative", o.noncooperative, "Retriever uses only the Bell result");

  auto* measure = app.add_subcommand("measure", "Two-qubit measures of a pair reduction");
  common(measure);
  with_state(measure);
  measure->add_option("--pair", o.pair, "AB, A,B or 0,1");
  measure->add_option("--multistarts", o.multistarts, "Optimizer restarts")->check(CLI::PositiveNumber);

  auto* eprep = app.add_subcommand("eprep", "Estimate the entanglement of preparation");
  common(eprep);
  with_state(eprep);
  eprep->add_option("--pair", o.pair, "AB, A,B or 0,1");
  eprep->add_option("--multistarts", o.multistarts, "Optimizer restarts")->check(CLI::PositiveNumber);

  auto* rep = app.add_subcommand("replay", "Re-execute a recorded run");
  common(rep);
  rep->add_option("--transcript", o.transcript, "Transcript JSON");
  rep->add_option("--config", o.config, "Run configuration JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << app.help();
    return 2;
  }
  if (o.n > 0 && o.web == 0) o.web = o.n;

  auto* sub = app.get_subcommands().front();
  Report r;
  r.seed = o.seed;
  r.command = {{"verb", sub->get_name()}, {"args", std::vector<std::string>(argv + 1, argv + argc)}};
  try {
    const auto& verb = sub->get_name();
    if (verb == "gen") cmd_gen(o, r);
    else if (verb == "verify") cmd_verify(o, r);
    else if (verb == "teleport") cmd_teleport(o, r);
    else if (verb == "run") cmd_run(o, r);
    else if (verb == "measure") cmd_measure(o, r);
    else if (verb == "eprep") cmd_eprep(o, r);
    else cmd_replay(o, r);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n' << sub->help();
    return 2;
  } catch (const InvariantError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    // Non-web input, zero-probability branches and similar protocol failures.
    err << "error: " << e.what() << '\n';
    return 1;
  }

  const auto j = r.to_json();
  if (o.json) out << j.dump(2) << '\n';
  else print_human(j, out);
  return r.pass ? 0 : 1;
}

}  // namespace qweb::cli
