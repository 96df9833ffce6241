#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "finslerhj/cli.hpp"

namespace finslerhj {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome RunMain(std::vector<std::string> args) {
  args.insert(args.begin(), "finslerhj");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  int const code = cli::Main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    auto const* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / "finslerhj_cli_test" / info->name();
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string Config(std::string const& name, json const& j) const {
    auto const p = dir / name;
    WriteFile(p, j.dump(2));
    return p.string();
  }
  std::string Out(std::string const& name) const { return (dir / name).string(); }
};

json DiskConfig() {
  return {{"grid", {{"bounds", {-1.1, -1.1, 1.1, 1.1}}, {"resolution", 101},
                    {"mask", "x1^2 + x2^2 - 1"}}},
          {"problem", {{"type", "eikonal"}, {"boundary", {{"constant", 0}}}}}};
}

TEST_F(CliTest, EikonalDiskMatchesDistanceToBoundary) {
  auto const r = RunMain({"solve-eikonal", "--config", Config("disk.json", DiskConfig()), "--out",
                          Out("o")});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  auto const f = FieldFromCsv(ReadFile(dir / "o" / "u.csv"));
  double const h = 2.2 / 100.0;
  double err = 0.0;
  std::size_t inside = 0;
  for (std::size_t j = 0; j < f.field.ny(); ++j) {
    for (std::size_t i = 0; i < f.field.nx(); ++i) {
      double const x = -1.1 + h * i, y = -1.1 + h * j;
      if (std::hypot(x, y) >= 1.0) continue;
      ++inside;
      err = std::max(err, std::abs(f.field(i, j) - (1.0 - std::hypot(x, y))));
    }
  }
  EXPECT_GT(inside, 6000u);
  EXPECT_LE(err, 2.0 * h);
  EXPECT_NE(r.out.find("PASS ridge"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "o" / "reports.json"));
}

TEST_F(CliTest, BuiltinEx2BoundsAndLipschitz) {
  json const c = {{"grid", {{"bounds", {-4, -4, 4, 4}}, {"resolution", 61}}},
                  {"x0", {0, 0}},
                  {"problem", {{"type", "stationary"}, {"builtin", "ex2"}}},
                  {"verify", {"bounds", "lipschitz"}}};
  auto const r = RunMain({"solve-stationary", "--config", Config("ex2.json", c), "--out", Out("o")});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  auto const reports = json::parse(ReadFile(dir / "o" / "reports.json"));
  ASSERT_EQ(reports.size(), 2u);
  for (auto const& rep : reports) EXPECT_TRUE(rep.at("pass").get<bool>()) << rep.dump();

  auto const flags = RunMain({"solve-stationary", "--builtin", "ex2", "--x0", "0,0", "--bounds",
                              "-4,-4,4,4", "--res", "41", "--out", Out("flags")});
  EXPECT_EQ(flags.code, 0) << flags.out << flags.err;
  EXPECT_TRUE(fs::exists(dir / "flags" / "u.csv"));
}

TEST_F(CliTest, NonLipschitzBoundaryIsASchemaError) {
  json const c = {{"grid", {{"bounds", {0, 0, 1, 1}}, {"resolution", 21}}},
                  {"problem", {{"type", "eikonal"}, {"boundary", {{"expression", "3 * x1"}}}}}};
  auto const r = RunMain({"solve-eikonal", "--config", Config("bad.json", c), "--out", Out("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("boundary pair ("), std::string::npos) << r.err;

  json waived = c;
  waived["problem"]["waive_lipschitz"] = true;
  waived["verify"] = json::array();
  EXPECT_EQ(RunMain({"solve-eikonal", "--config", Config("w.json", waived), "--out", Out("w")}).code,
            0);
}

TEST_F(CliTest, SchemaErrorsExitTwo) {
  json c = DiskConfig();
  c["colour"] = "blue";
  auto r = RunMain({"solve-eikonal", "--config", Config("a.json", c)});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown key 'colour'"), std::string::npos) << r.err;

  r = RunMain({"solve-evolution", "--config", Config("b.json", DiskConfig())});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("expects problem.type evolution"), std::string::npos) << r.err;

  c = DiskConfig();
  c["grid"]["resolution"] = "many";
  EXPECT_EQ(RunMain({"solve-eikonal", "--config", Config("c.json", c)}).code, 2);

  c = DiskConfig();
  c["verify"] = {"no-such-check"};
  EXPECT_EQ(RunMain({"solve-eikonal", "--config", Config("d.json", c)}).code, 2);

  WriteFile(dir / "e.json", "{not json");
  EXPECT_EQ(RunMain({"solve-eikonal", "--config", Out("e.json")}).code, 2);
  EXPECT_EQ(RunMain({"solve-eikonal"}).code, 2);
  EXPECT_EQ(RunMain({"no-such-subcommand"}).code, 2);
  EXPECT_EQ(RunMain({"solve-stationary", "--builtin", "ex9"}).code, 2);
}

TEST_F(CliTest, SolverErrorExitsThree) {
  json const c = {{"grid", {{"bounds", {-4, -4, 4, 4}}, {"resolution", 41}}},
                  {"problem", {{"type", "stationary"}, {"builtin", "ex2"}, {"max_sweeps", 1}}}};
  auto const r = RunMain({"solve-stationary", "--config", Config("s.json", c), "--out", Out("o")});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("solver error"), std::string::npos) << r.err;
}

TEST_F(CliTest, VerificationFailureExitsOneWithReportPath) {
  auto const cfg = Config("disk.json", DiskConfig());
  ASSERT_EQ(RunMain({"solve-eikonal", "--config", cfg, "--out", Out("o")}).code, 0);
  auto f = FieldFromCsv(ReadFile(dir / "o" / "u.csv"));
  for (auto& v : f.field.values()) v *= 2.0;
  WriteFile(dir / "doubled.csv", FieldToCsv(f.field, f.bounds));
  auto const r = RunMain({"verify", "--config", cfg, "--field", Out("doubled.csv"), "--verify",
                          "eikonal-lipschitz,eikonal-boundary", "--out", Out("v")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL eikonal-lipschitz"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("PASS eikonal-boundary"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find((dir / "v" / "reports.json").string()), std::string::npos) << r.out;
  auto const reports = json::parse(ReadFile(dir / "v" / "reports.json"));
  ASSERT_TRUE(reports.is_array());
  EXPECT_FALSE(reports[0].at("witnesses").empty());
  // verify does not rewrite the field it was given
  EXPECT_FALSE(fs::exists(dir / "v" / "u.csv"));
}

TEST_F(CliTest, ManifestListsEveryArtifactWithItsHash) {
  json const c = {{"grid", {{"bounds", {-1, -1, 1, 1}}, {"resolution", 21}}},
                  {"problem", {{"type", "evolution"}, {"hamiltonian", "m"}, {"lipschitz_m", 1},
                               {"initial", "min(sqrt(x1^2 + x2^2), 0.5)"}, {"T", 0.2},
                               {"stride", 5}}},
                  {"verify", {"evolution-envelope", "evolution-comparison"}}};
  auto const r = RunMain({"solve-evolution", "--config", Config("evo.json", c), "--out", Out("o")});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  auto const manifest = json::parse(ReadFile(dir / "o" / "manifest.json"));
  EXPECT_EQ(manifest.at("problem"), "evolution");
  EXPECT_EQ(manifest.at("version"), cli::kVersion);
  EXPECT_EQ(manifest.at("config_hash").get<std::string>().size(), 16u);
  EXPECT_TRUE(manifest.at("timings").contains("solve_s"));
  std::set<std::string> listed;
  for (auto const& f : manifest.at("files")) {
    auto const path = f.at("path").get<std::string>();
    listed.insert(path);
    EXPECT_EQ(f.at("fnv1a"), Fnv1a(ReadFile(dir / "o" / path))) << path;
  }
  std::size_t snapshots = 0;
  for (auto const& e : fs::directory_iterator(dir / "o")) {
    auto const name = e.path().filename().string();
    if (name == "manifest.json") continue;
    EXPECT_TRUE(listed.count(name)) << name;
    snapshots += name.rfind("snapshot_", 0) == 0;
  }
  EXPECT_GE(snapshots, 2u);
  EXPECT_TRUE(listed.count("final.csv"));
  EXPECT_TRUE(listed.count("solve.json"));
}

TEST_F(CliTest, DistanceFieldAndSidecar) {
  json const c = {{"grid", {{"bounds", {-1, -1, 1, 1}}, {"resolution", 41}}},
                  {"problem", {{"type", "distance"}, {"seeds", {{0, 0}}}}}};
  auto const r = RunMain({"distance", "--config", Config("d.json", c), "--out", Out("o")});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  auto const f = FieldFromCsv(ReadFile(dir / "o" / "distance.csv"));
  double const h = 0.05;
  for (std::size_t j = 0; j < 41; ++j) {
    for (std::size_t i = 0; i < 41; ++i) {
      EXPECT_NEAR(f.field(i, j), std::hypot(-1 + h * i, -1 + h * j), 2 * h);
    }
  }
  auto const side = json::parse(ReadFile(dir / "o" / "distance.json"));
  for (auto const* k : {"bounds", "resolution", "stencil_order", "seeds"}) {
    EXPECT_TRUE(side.contains(k)) << k;
  }
  EXPECT_EQ(side.at("stencil_order"), 16);
}

TEST_F(CliTest, ListBuiltins) {
  auto r = RunMain({"list-builtins"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 6);
  for (auto const* id : {"ex1", "ex2", "ex3", "ex4", "ex5"}) {
    EXPECT_NE(r.out.find(id), std::string::npos) << id;
  }
  r = RunMain({"list-builtins", "--json"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out).size(), 5u);
  r = RunMain({"list-builtins", "--json", "--id", "ex3"});
  auto const one = json::parse(r.out);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].at("lower"), "a/b");
  EXPECT_EQ(RunMain({"list-builtins", "--id", "ex7"}).code, 2);
}

int Shell(std::string const& cmd) {
  int const status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(CliTest, BinaryRunsAreByteIdentical) {
  std::string const bin = FINSLERHJ_CLI_BINARY;
  auto const cfg = Config("disk.json", DiskConfig());
  for (auto const* o : {"a", "b"}) {
    ASSERT_EQ(Shell(bin + " solve-eikonal --config " + cfg + " --out " + Out(o) + " > /dev/null"),
              0);
  }
  EXPECT_EQ(ReadFile(dir / "a" / "u.csv"), ReadFile(dir / "b" / "u.csv"));
  EXPECT_EQ(ReadFile(dir / "a" / "reports.json"), ReadFile(dir / "b" / "reports.json"));
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
  std::string const bin = FINSLERHJ_CLI_BINARY;
  json c = DiskConfig();
  c["grid"]["resolution"] = 31;
  auto const cfg = Config("disk.json", c);
  ASSERT_EQ(Shell("FINSLERHJ_OUT=" + Out("env") + " " + bin + " solve-eikonal --config " + cfg +
                  " > /dev/null"),
            0);
  EXPECT_TRUE(fs::exists(dir / "env" / "manifest.json"));
  EXPECT_EQ(Shell(bin + " --version > /dev/null"), 0);
}

}  // namespace
}  // namespace finslerhj
