#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "cutlearn_cli_test";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const nlohmann::json& j) {
  fs::create_directories(kWork);
  const fs::path p = kWork / (name + ".json");
  std::ofstream(p) << j.dump(2);
  return p;
}

// Runs the CLI with stderr captured to err.txt; returns the exit code.
int run(const std::string& args, std::string* err = nullptr) {
  fs::create_directories(kWork);
  const fs::path e = kWork / "err.txt";
  const std::string cmd = std::string(CUTLEARN_CLI) + " " + args + " > " + (kWork / "log.txt").string() + " 2> " + e.string();
  const int st = std::system(cmd.c_str());
  if (err) *err = slurp(e);
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::vector<std::vector<std::string>> csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    rows.push_back(f);
  }
  return rows;
}

nlohmann::json base(int setting, int n) {
  return {{"setting", setting}, {"n", n}, {"estimands", {"survival"}}, {"workers", 1}};
}

}  // namespace

TEST_CASE("simulate is reproducible and records the model") {
  const auto cfg = write_config("sim1", base(1, 120));
  const fs::path a = kWork / "sim_a", b = kWork / "sim_b";
  REQUIRE(run("simulate --config " + cfg.string() + " --seed 7 --out " + a.string()) == 0);
  REQUIRE(run("simulate --config " + cfg.string() + " --seed 7 --out " + b.string()) == 0);
  for (const char* f : {"data.csv", "truth.csv", "manifest.json"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto rows = csv(a / "data.csv");
  REQUIRE(rows.size() == 121);
  CHECK(rows[0] == std::vector<std::string>{"id", "x1", "x2", "x3", "x4", "x5", "x6", "a", "time", "status"});

  const auto m1 = nlohmann::json::parse(slurp(a / "manifest.json"));
  REQUIRE(run("simulate --config " + cfg.string() + " --seed 8 --out " + b.string()) == 0);
  const auto m1b = nlohmann::json::parse(slurp(b / "manifest.json"));
  CHECK(m1["coefficient_hash"] == m1b["coefficient_hash"]);
  CHECK(m1["data_hash"] != m1b["data_hash"]);
  const auto cfg2 = write_config("sim2", base(2, 120));
  REQUIRE(run("simulate --config " + cfg2.string() + " --seed 7 --out " + b.string()) == 0);
  CHECK(m1["coefficient_hash"] != nlohmann::json::parse(slurp(b / "manifest.json"))["coefficient_hash"]);
}

TEST_CASE("setting 3 statuses cover both causes") {
  auto j = base(3, 600);
  j["estimands"] = {"cif"};
  const auto cfg = write_config("sim3", j);
  const fs::path out = kWork / "sim3";
  REQUIRE(run("simulate --config " + cfg.string() + " --out " + out.string()) == 0);
  std::set<std::string> status;
  const auto rows = csv(out / "data.csv");
  for (std::size_t i = 1; i < rows.size(); ++i) status.insert(rows[i].back());
  CHECK(status == std::set<std::string>{"0", "1", "2"});
}

TEST_CASE("configuration errors exit with 2") {
  auto j = base(1, 100);
  j["learners"] = {"S", "Q-learner"};
  std::string err;
  CHECK(run("fit --config " + write_config("bad", j).string(), &err) == 2);
  CHECK(err.find("learners[1]") != std::string::npos);
  j = base(1, 100);
  j["estimands"] = nlohmann::json::parse(R"([{"family": "sep_direct_cif", "cause": 1}])");
  CHECK(run("bench --config " + write_config("bad2", j).string(), &err) == 2);
  CHECK(err.find("estimands[0]") != std::string::npos);
  CHECK(run("simulate --config " + (kWork / "missing.json").string()) == 2);
  CHECK(run("fit") == 2);
}

TEST_CASE("fit is reproducible and reports floors") {
  auto j = base(1, 300);
  j["learners"] = {"T", "AIPTW", "U"};
  const auto cfg = write_config("fit", j);
  const fs::path a = kWork / "fit_a", b = kWork / "fit_b";
  REQUIRE(run("fit --config " + cfg.string() + " --seed 3 --out " + a.string()) == 0);
  REQUIRE(run("fit --config " + cfg.string() + " --seed 3 --out " + b.string()) == 0);
  CHECK(slurp(a / "predictions.csv") == slurp(b / "predictions.csv"));
  CHECK(csv(a / "predictions.csv").size() == 1 + 3 * 300);
  const auto d = nlohmann::json::parse(slurp(a / "diagnostics.json"));
  REQUIRE(d["runs"].size() == 1);
  for (const auto& l : d["runs"][0]["learners"]) {
    CHECK(l.contains("floored_fraction"));
    CHECK(l["floored_fraction"].get<double>() >= 0.0);
  }
  CHECK(d["runs"][0]["audit"]["violations"].get<long>() == 0);
}

TEST_CASE("fit on a user dataset and schema errors") {
  auto j = base(1, 200);
  const auto cfg = write_config("simfit", j);
  const fs::path s = kWork / "simfit";
  REQUIRE(run("simulate --config " + cfg.string() + " --out " + s.string()) == 0);
  j["learners"] = {"S"};
  j["data"] = (s / "data.csv").string();
  REQUIRE(run("fit --config " + write_config("userfit", j).string() + " --out " + (kWork / "userfit").string()) == 0);
  CHECK(csv(kWork / "userfit" / "predictions.csv").size() == 201);

  std::string text = slurp(s / "data.csv");
  const auto pos = text.find('\n', text.find('\n') + 1);
  text.insert(pos, ",extra");
  std::ofstream(kWork / "broken.csv") << text;
  j["data"] = (kWork / "broken.csv").string();
  std::string err;
  CHECK(run("fit --config " + write_config("broken", j).string() + " --out " + (kWork / "broken").string(), &err) == 1);
  CHECK(err.find("broken.csv:2") != std::string::npos);
}

TEST_CASE("bench with three replications") {
  auto j = base(1, 500);
  j["replications"] = 3;
  j["learners"] = "all";
  const auto cfg = write_config("bench", j);
  const fs::path out = kWork / "bench";
  REQUIRE(run("bench --config " + cfg.string() + " --seed 4 --out " + out.string()) == 0);
  const auto rows = csv(out / "metrics.csv");
  REQUIRE(!rows.empty());
  CHECK(rows[0] == std::vector<std::string>{"setting", "replication", "learner", "estimand", "cut", "metric", "value"});
  std::map<std::pair<std::string, std::string>, int> count;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    count[{rows[i][2], rows[i][5]}]++;
    if (rows[i][2] == "oracle" && rows[i][5] == "pehe") CHECK(std::stod(rows[i][6]) == 0.0);
  }
  for (const char* l : {"S", "T", "X", "IF", "IPTW", "RA", "AIPTW", "MC", "MCEA", "R", "U", "oracle"})
    for (const char* m : {"pehe", "grd", "gain", "regret", "pehe_h", "accuracy"}) {
      CAPTURE(l);
      CAPTURE(m);
      CHECK(count[{l, m}] == 3);
    }
  CHECK(fs::exists(out / "summary.csv"));
  CHECK(fs::exists(out / "psi_distribution.csv"));
  const auto b = nlohmann::json::parse(slurp(out / "bench.json"));
  CHECK(b["violations"].get<long>() == 0);
  CHECK(b["replication_seeds"].size() == 3);
}

TEST_CASE("every shipped non-bench config runs") {
  for (const auto& e : fs::directory_iterator(CUTLEARN_CONFIG_DIR)) {
    const std::string name = e.path().stem().string();
    if (name.rfind("bench", 0) == 0) continue;
    CAPTURE(name);
    std::string err;
    CHECK(run("bench --config " + e.path().string() + " --out " + (kWork / "corpus" / name).string(), &err) == 0);
  }
}
