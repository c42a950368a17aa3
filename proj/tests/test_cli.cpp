#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <qweb/cli.hpp>

namespace fs = std::filesystem;
using namespace qweb;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

// In-process invocation.
CliResult call(std::vector<std::string> args) {
  args.insert(args.begin(), "qweb");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Through the installed binary, for the process exit status.
int exec(const std::string& args) {
  const std::string cmd = std::string(QWEB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("qweb_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  fs::path dir_;
};

nlohmann::json report(const CliResult& r) { return nlohmann::json::parse(r.out); }

}  // namespace

TEST_F(CliTest, GenGhz4WritesSixteenAmplitudes) {
  const auto r = call({"gen", "--ghz", "4", "--out", path("s.json")});
  EXPECT_EQ(r.code, 0);
  std::ifstream in(path("s.json"));
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("amplitudes").size(), 16u);
  EXPECT_EQ(j.at("bases"), "ghz");
  EXPECT_EQ(exec("gen --ghz 4 --out " + path("t.json")), 0);
}

TEST_F(CliTest, VerifyGhz4MatchesLibrary) {
  ASSERT_EQ(call({"gen", "--ghz", "4", "--out", path("s.json")}).code, 0);
  const auto r = call({"verify", "--state", path("s.json"), "--bases", "ghz", "--json"});
  EXPECT_EQ(r.code, 0);
  const auto j = report(r);
  EXPECT_TRUE(j.at("pass").get<bool>());
  const auto lib = verify_web_state(make_ghz(4), PreparationBases::ghz(4));
  EXPECT_EQ(j.at("results").at("verification").at("cases").size(), lib.cases.size());
  EXPECT_EQ(exec("verify --state " + path("s.json") + " --bases ghz"), 0);
}

TEST_F(CliTest, VerifyFailureExitsOne) {
  ASSERT_EQ(call({"gen", "--ghz", "4", "--out", path("s.json")}).code, 0);
  const auto r = call({"verify", "--state", path("s.json"), "--bases", "computational", "--json"});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(report(r).at("pass").get<bool>());
  EXPECT_EQ(exec("verify --state " + path("s.json") + " --bases computational"), 1);
}

TEST_F(CliTest, RunExampleGivesFidelityOne) {
  ASSERT_EQ(call({"gen", "--ghz", "4", "--out", path("s.json")}).code, 0);
  const auto r = call({"run", "--state", path("s.json"), "--publisher", "A", "--retriever", "C", "--chi", "+/-",
                       "--seed", "7", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = report(r);
  EXPECT_NEAR(j.at("results").at("fidelity").get<double>(), 1.0, 1e-9);
  EXPECT_EQ(j.at("results").at("runs").size(), 2u);
  EXPECT_EQ(j.at("seed"), 7);
  EXPECT_EQ(j.at("version"), cli::kVersion);
  EXPECT_EQ(exec("run --state " + path("s.json") + " --publisher A --retriever C --chi \"+/-\" --seed 7 --json"), 0);
}

TEST_F(CliTest, RunEnumerateWebAndContextual) {
  ASSERT_EQ(call({"gen", "--web", "5", "--seed", "3", "--out", path("w.json")}).code, 0);
  auto r = call({"run", "--state", path("w.json"), "--publisher", "B", "--retriever", "E", "--chi", "i", "--enumerate",
                 "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = report(r);
  EXPECT_EQ(j.at("results").at("runs")[0].at("branches"), 32);
  EXPECT_NEAR(j.at("results").at("runs")[0].at("total_probability").get<double>(), 1.0, 1e-12);

  ASSERT_EQ(call({"gen", "--contextual", "--out", path("c.json")}).code, 0);
  r = call({"run", "--state", path("c.json"), "--publisher", "A", "--retriever", "B", "--chi", "0.6,0.8",
            "--enumerate", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(report(r).at("results").at("fidelity").get<double>(), 1.0, 1e-9);
}

TEST_F(CliTest, RunNonWebBasesIsAProtocolFailure) {
  ASSERT_EQ(call({"gen", "--ghz", "3", "--out", path("s.json")}).code, 0);
  EXPECT_EQ(call({"run", "--state", path("s.json"), "--bases", "computational", "--chi", "+"}).code, 1);
}

TEST_F(CliTest, RunNoncooperativeReportsCloningBound) {
  ASSERT_EQ(call({"gen", "--ghz", "3", "--out", path("s.json")}).code, 0);
  const auto r = call({"run", "--state", path("s.json"), "--chi", "+", "--noncooperative", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = report(r);
  const auto& run = j.at("results").at("runs")[0];
  EXPECT_NEAR(run.at("noncooperative_average_fidelity").get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(run.at("cloning_bound").get<double>(), 5.0 / 6.0, 1e-12);
}

TEST_F(CliTest, TeleportPresets) {
  for (const char* chi : {"0", "1", "+", "-", "i", "-i", "[[0.6,0],[0,0.8]]"}) {
    const auto r = call({"teleport", "--chi", chi, "--seed", "11", "--json"});
    ASSERT_EQ(r.code, 0) << chi << " " << r.err;
    EXPECT_NEAR(report(r).at("results").at("fidelity").get<double>(), 1.0, 1e-12);
  }
  EXPECT_EQ(call({"teleport", "--chi", "0.9,0.1"}).code, 1);
  EXPECT_EQ(call({"teleport", "--chi", "banana"}).code, 2);
}

TEST_F(CliTest, MeasureGhz3Pair) {
  ASSERT_EQ(call({"gen", "--ghz", "3", "--out", path("s.json")}).code, 0);
  const auto r = call({"measure", "--state", path("s.json"), "--pair", "A,C", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto res = report(r).at("results");
  for (const auto& e : res.at("single_qubit_entropy")) EXPECT_NEAR(e.get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(res.at("concurrence").get<double>(), 0.0, 1e-9);
  EXPECT_NEAR(res.at("concurrence_of_assistance").get<double>(), 1.0, 1e-9);
  EXPECT_NEAR(res.at("entanglement_of_assistance").at("value").get<double>(), 1.0, 1e-6);
  EXPECT_NEAR(res.at("singlet_fraction").at("value").get<double>(), 0.5, 1e-6);
  EXPECT_EQ(res.at("pair"), "AC");
}

TEST_F(CliTest, EprepOnWebState) {
  ASSERT_EQ(call({"gen", "--web", "4", "--seed", "2", "--out", path("w.json")}).code, 0);
  const auto r = call({"eprep", "--state", path("w.json"), "--pair", "AD", "--multistarts", "6", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto res = report(r).at("results");
  EXPECT_NEAR(res.at("entanglement_of_preparation").at("value").get<double>(), 1.0, 1e-6);
  EXPECT_EQ(res.at("entanglement_of_preparation").at("label"), "certified");
  EXPECT_EQ(res.at("entanglement_of_preparation").at("strategy").size(), 2u);
}

TEST_F(CliTest, RunThenReplayReproducesFinalState) {
  ASSERT_EQ(call({"gen", "--web", "4", "--seed", "9", "--out", path("w.json")}).code, 0);
  const auto r = call({"run", "--state", path("w.json"), "--publisher", "C", "--retriever", "A", "--chi", "i",
                       "--seed", "5", "--out", path("t.json"), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rr = call({"replay", "--transcript", path("t.json"), "--json"});
  ASSERT_EQ(rr.code, 0) << rr.err;
  EXPECT_EQ(report(rr).at("results").at("final_state"), report(r).at("results").at("runs")[0].at("final_state"));
  EXPECT_EQ(report(rr).at("seed"), 5);
  EXPECT_EQ(exec("replay --transcript " + path("t.json")), 0);
}

TEST_F(CliTest, ReplayWithSeparateConfig) {
  const auto run = ProtocolRun::with(make_ghz(3), PreparationBases::ghz(3), ket_plus_i(), 0, 2, 4);
  std::ofstream(path("run.json")) << run.to_json().dump();
  const auto pub = publish(run);
  const auto ret = retrieve(pub.residual, run, pub.transcript);
  std::ofstream(path("tr.json")) << ret.transcript.to_json().dump();
  const auto r = call({"replay", "--config", path("run.json"), "--transcript", path("tr.json"), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(state_from_json(report(r).at("results").at("final_state")), ret.final_state);
}

TEST_F(CliTest, JsonOutputIsByteIdentical) {
  ASSERT_EQ(call({"gen", "--ghz", "5", "--out", path("s.json")}).code, 0);
  const std::vector<std::string> args{"run", "--state", path("s.json"), "--publisher", "E", "--retriever", "B",
                                      "--chi", "[[0.8,0],[0,0.6]]", "--seed", "21", "--json"};
  const auto a = call(args), b = call(args);
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  const std::vector<std::string> g{"gen", "--web", "4", "--seed", "8", "--json"};
  EXPECT_EQ(call(g).out, call(g).out);
}

TEST_F(CliTest, SaveLoadRoundTripIsBitExact) {
  auto [spec, state] = random_web_state(5, 13);
  cli::save_state(state, path("w.json"));
  EXPECT_EQ(cli::load_state(path("w.json")), state);
  cli::save_state(make_ghz(5), path("g.json"));
  EXPECT_EQ(cli::load_state(path("g.json")), make_ghz(5));
}

TEST_F(CliTest, TruncatedFileIsUsageError) {
  ASSERT_EQ(call({"gen", "--ghz", "3", "--out", path("s.json")}).code, 0);
  std::string text;
  {
    std::ifstream in(path("s.json"));
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  write("cut.json", text.substr(0, text.size() / 2));
  EXPECT_EQ(call({"verify", "--state", path("cut.json")}).code, 2);
  EXPECT_EQ(exec("verify --state " + path("cut.json")), 2);
  write("shape.json", R"({"n_qubits": 2, "amplitudes": [[1, 0]]})");
  EXPECT_EQ(call({"verify", "--state", path("shape.json")}).code, 2);
  EXPECT_EQ(call({"verify", "--state", path("missing.json")}).code, 2);
}

TEST_F(CliTest, NormViolationExitsOne) {
  write("bad.json", R"({"n_qubits": 1, "amplitudes": [[0.9, 0], [0, 0]]})");
  const auto r = call({"measure", "--state", path("bad.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("norm"), std::string::npos);
  EXPECT_EQ(exec("verify --state " + path("bad.json")), 1);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(call({}).code, 2);
  EXPECT_EQ(call({"frobnicate"}).code, 2);
  EXPECT_EQ(call({"gen", "--bogus"}).code, 2);
  EXPECT_EQ(call({"gen"}).code, 2);
  EXPECT_EQ(call({"gen", "--ghz", "3", "--contextual"}).code, 2);
  EXPECT_EQ(call({"verify"}).code, 2);
  EXPECT_EQ(call({"replay"}).code, 2);
  EXPECT_EQ(exec("frobnicate"), 2);
  EXPECT_EQ(exec("--help"), 0);
  const auto r = call({"frobnicate"});
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST_F(CliTest, BadPartiesAreUsageErrors) {
  ASSERT_EQ(call({"gen", "--ghz", "3", "--out", path("s.json")}).code, 0);
  EXPECT_EQ(call({"run", "--state", path("s.json"), "--publisher", "Q"}).code, 2);
  EXPECT_EQ(call({"run", "--state", path("s.json"), "--publisher", "A", "--retriever", "A"}).code, 2);
  EXPECT_EQ(call({"eprep", "--state", path("s.json"), "--pair", "ABC"}).code, 2);
}

TEST_F(CliTest, HumanReadableOutput) {
  const auto r = call({"teleport", "--chi", "+"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("pass: true"), std::string::npos);
  EXPECT_NE(r.out.find("results.fidelity: "), std::string::npos);
}
