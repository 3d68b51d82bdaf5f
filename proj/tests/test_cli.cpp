#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "habs/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int status = -1;
  std::string out;  // stdout and stderr
};

Run run(const std::string& args, const std::string& env = {}) {
  const std::string cmd = env + " '" HABS_CLI "' " + args + " 2>&1";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p);
  std::array<char, 4096> buf{};
  while (const auto n = std::fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
  const int raw = ::pclose(p);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("habs_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
  static inline int counter = 0;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kData = HABS_DATA_DIR;

}  // namespace

TEST_CASE("calibrate fits the table and writes the poly") {
  TempDir dir;
  const auto r = run("calibrate --data " + kData + "/calibration_points.csv --out " + (dir / "poly.json"));
  REQUIRE(r.status == 0);
  CHECK(r.out.find("residual") != std::string::npos);
  CHECK(r.out.find("rms residual: 0.9330") != std::string::npos);
  const auto poly = habs::io::poly_from_json(json::parse(slurp(dir / "poly.json")));
  CHECK(poly.c3 == doctest::Approx(0.072).epsilon(1e-3));
  CHECK(poly.c0 == doctest::Approx(38.1792).epsilon(1e-4));
}

TEST_CASE("calibrate rejects short and missing input") {
  TempDir dir;
  std::ofstream(dir / "three.csv") << "T,V\n23,-3.5\n30,-2.5\n40,1.2\n";
  const auto r = run("calibrate --data " + (dir / "three.csv") + " --out " + (dir / "p.json"));
  CHECK(r.status != 0);
  CHECK(r.out.find("need >=4 points") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "p.json"));

  const auto missing = run("calibrate --data " + (dir / "nope.csv"));
  CHECK(missing.status != 0);
  CHECK(missing.out.find("cannot open") != std::string::npos);
}

TEST_CASE("step then identify recovers the regional model") {
  TempDir dir;
  for (const auto& [u0, u1] : {std::pair{"0", "1"}, {"1", "2"}, {"2", "3"}}) {
    const auto r = run(std::string("step --u0 ") + u0 + " --u1 " + u1 + " --out " +
                       (dir / (std::string("s") + u0 + ".csv")));
    REQUIRE(r.status == 0);
    CHECK(r.out.find("651 samples") != std::string::npos);
  }
  const auto r = run("identify " + (dir / "s0.csv") + " " + (dir / "s2.csv") + " " + (dir / "s1.csv") +
                     " --out " + (dir / "model.json"));
  REQUIRE(r.status == 0);
  const auto model = habs::io::regional_model_from_json(json::parse(slurp(dir / "model.json")));
  REQUIRE(model.regions.size() == 3);
  const double gains[] = {9.5, 8.0, 10.0};
  const double taus[] = {6.5, 15.0, 16.0};
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(model.regions[i].model.gain == doctest::Approx(gains[i]).epsilon(0.01));
    CHECK(model.regions[i].model.tau == doctest::Approx(taus[i]).epsilon(0.02));
  }
  CHECK(model.regions[0].u_low == 0.0);
  CHECK(model.regions[1].u_low == 1.0);
  CHECK(std::isinf(model.regions[2].u_high));
}

TEST_CASE("identify needs records") {
  const auto r = run("identify");
  CHECK(r.status != 0);
  CHECK(r.out.find("records") != std::string::npos);
}

TEST_CASE("step honours HABS_LOG_DIR") {
  TempDir dir;
  const auto r = run("step --u0 1 --u1 1 --duration 5", "HABS_LOG_DIR='" + dir.path.string() + "'");
  REQUIRE(r.status == 0);
  CHECK(fs::exists(dir / "step_1_1.csv"));
  CHECK(r.out.find("not identifiable") != std::string::npos);
}

TEST_CASE("simulate writes the log and a summary") {
  TempDir dir;
  const auto r = run("simulate --scenario " + kData + "/scenarios/ladder.json --out " + (dir / "ladder.csv"));
  REQUIRE(r.status == 0);
  const auto summary = json::parse(r.out);
  CHECK(summary["ticks"] == 3600);
  REQUIRE(summary["steps"].size() == 3);
  for (const auto& s : summary["steps"]) {
    const bool meets = s["metrics"]["rise_time"].get<double>() < 4.0 && s["metrics"]["overshoot"].get<double>() < 10.0;
    CHECK(s["meets_objectives"] == meets);
  }
  // The first level is reachable without saturating; the later 10 C jumps are actuator limited.
  CHECK(summary["steps"][0]["meets_objectives"] == true);
  const auto csv = slurp(dir / "ladder.csv");
  CHECK(csv.rfind(std::string(habs::io::kSimLogHeader) + "\n", 0) == 0);
  CHECK(csv.find(",III\n") != std::string::npos);

  std::ofstream(dir / "bad.json") << R"({"duration": 10, "setpionts": []})";
  const auto bad = run("simulate --scenario " + (dir / "bad.json"));
  CHECK(bad.status != 0);
  CHECK(bad.out.find("unknown key 'setpionts'") != std::string::npos);
}

TEST_CASE("no subcommand is a usage error") {
  CHECK(run("").status != 0);
  CHECK(run("frobnicate").status != 0);
}
