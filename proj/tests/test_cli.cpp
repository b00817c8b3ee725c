#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "wot/csv.hpp"

namespace fs = std::filesystem;
using namespace wot;

namespace {
fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(WOT_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct Run {
  int code;
  std::string out;
};

Run cli(const std::string& args, const fs::path& dir) {
  const auto log = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + WOT_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

bool keys_sorted(const nlohmann::ordered_json& j) {
  if (j.is_object()) {
    std::string prev;
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first && it.key() < prev) return false;
      prev = it.key();
      first = false;
      if (!keys_sorted(it.value())) return false;
    }
  } else if (j.is_array()) {
    for (const auto& v : j)
      if (!keys_sorted(v)) return false;
  }
  return true;
}

const char* kSmall = R"({
  "seed": 5,
  "output_dir": "OUT",
  "grids": {
    "gh": {"scheme": "gauss-hermite", "dim": 1, "resolution": 60},
    "mesh": {"scheme": "truncated-uniform", "dim": 1, "resolution": 161, "truncation_radius": 6}
  },
  "densities": {
    "std": {"family": "reference", "dim": 1},
    "quarter": {"family": "gaussian", "mean": [0], "cov": [[0.25]]},
    "shift": {"family": "mean-shift", "shift": [1]}
  },
  "jobs": [
    {"kind": "solve", "name": "same", "rho": "std", "nu": "std", "grid": "gh"},
    {"kind": "inequalities", "name": "ineq", "densities": ["shift", "quarter"], "checks": ["talagrand", "lsi"]},
    {"kind": "oracle-compare", "name": "cmp", "rho": "std", "nu": "quarter", "grid": "mesh",
     "methods": ["gaussian", "quantile"]}
  ]
})";

std::string small_config(const fs::path& out) {
  std::string s = kSmall;
  s.replace(s.find("OUT"), 3, out.string());
  return s;
}
}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("empty job list exits 0 with a manifest") {
    const auto dir = scratch("empty");
    spit(dir / "c.json", R"({"seed": 1, "output_dir": ")" + (dir / "run").string() + R"(", "jobs": []})");
    const auto r = cli("run " + (dir / "c.json").string(), dir);
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "run" / "manifest.json"));
    CHECK(cli("report " + (dir / "run").string(), dir).code == 0);
  }

  TEST_CASE("config errors exit 2") {
    const auto dir = scratch("bad");
    spit(dir / "unknown.json", R"({"seed": 1, "jobs": [], "colour": 3})");
    CHECK(cli("run " + (dir / "unknown.json").string(), dir).code == 2);
    spit(dir / "ref.json", R"({"seed": 1, "jobs": [{"kind": "solve", "rho": "a", "nu": "b"}]})");
    CHECK(cli("run " + (dir / "ref.json").string(), dir).code == 2);
    spit(dir / "syntax.json", "{ not json");
    CHECK(cli("run " + (dir / "syntax.json").string(), dir).code == 2);
    CHECK(cli("run " + (dir / "missing.json").string(), dir).code == 2);
    CHECK(cli("frobnicate", dir).code == 2);
    CHECK(cli("run " + (dir / "unknown.json").string() + " --jobs 0", dir).code == 2);
  }

  TEST_CASE("report without a manifest exits 2") {
    const auto dir = scratch("nomanifest");
    CHECK(cli("report " + dir.string(), dir).code == 2);
  }

  TEST_CASE("run, artifacts, sorted JSON, seed override and report") {
    const auto dir = scratch("small");
    spit(dir / "c.json", small_config(dir / "run"));
    const auto r = cli("--seed 42 run " + (dir / "c.json").string(), dir);
    REQUIRE(r.code == 0);
    const auto run = dir / "run";
    for (const auto& entry : fs::recursive_directory_iterator(run)) {
      if (entry.path().extension() != ".json") continue;
      const auto j = nlohmann::ordered_json::parse(slurp(entry.path()));
      CHECK_MESSAGE(keys_sorted(j), entry.path().string());
    }
    const auto job = nlohmann::json::parse(slurp(run / "01-same" / "job.json"));
    CHECK(job["seed"] == 42);
    const auto sol = nlohmann::json::parse(slurp(run / "01-same" / "solution.json"));
    CHECK(std::abs(sol["cost"].get<double>()) < 1e-12);
    const auto manifest = nlohmann::json::parse(slurp(run / "manifest.json"));
    CHECK(manifest["exit_code"] == 0);
    CHECK(manifest["jobs"].size() == 3);
    const auto rep = cli("report " + run.string(), dir);
    CHECK(rep.code == 0);
    CHECK(rep.out.rfind("PASS 100%", 0) == 0);
  }

  TEST_CASE("a corrupted Talagrand row surfaces first") {
    const auto dir = scratch("corrupt");
    spit(dir / "c.json", small_config(dir / "run"));
    REQUIRE(cli("run " + (dir / "c.json").string(), dir).code == 0);
    const auto csv = dir / "run" / "02-ineq" / "inequalities.csv";
    auto rows = parse_csv(slurp(csv));
    REQUIRE(rows.size() > 2);
    CsvTable t(rows[0]);
    bool hit = false;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (!hit && rows[i][0] == "talagrand") {
        rows[i][2] = "-1";
        rows[i][3] = "-2";
        rows[i][4] = "false";
        hit = true;
      }
      t.row(rows[i]);
    }
    REQUIRE(hit);
    spit(csv, t.str());
    const auto rep = cli("report " + (dir / "run").string(), dir);
    CHECK(rep.code == 1);
    CHECK(rep.out.rfind("FAIL", 0) == 0);
    const auto first = rep.out.find("FAIL ineq: talagrand");
    const auto pass = rep.out.find("\npass ");
    REQUIRE(first != std::string::npos);
    CHECK((pass == std::string::npos || first < pass));
  }

  TEST_CASE("reruns and parallel runs give byte-identical CSV") {
    const auto dir = scratch("determinism");
    spit(dir / "c.json", small_config(dir / "a"));
    REQUIRE(cli("run " + (dir / "c.json").string(), dir).code == 0);
    REQUIRE(cli("--out " + (dir / "b").string() + " --jobs 3 run " + (dir / "c.json").string(), dir).code == 0);
    int compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
      if (entry.path().extension() != ".csv") continue;
      const auto other = dir / "b" / fs::relative(entry.path(), dir / "a");
      CHECK(slurp(entry.path()) == slurp(other));
      ++compared;
    }
    CHECK(compared >= 3);
  }

  TEST_CASE("compare runs only oracle-compare jobs") {
    const auto dir = scratch("compare");
    spit(dir / "c.json", small_config(dir / "run"));
    REQUIRE(cli("compare " + (dir / "c.json").string(), dir).code == 0);
    const auto manifest = nlohmann::json::parse(slurp(dir / "run" / "manifest.json"));
    REQUIRE(manifest["jobs"].size() == 1);
    const auto rows = parse_csv(slurp(dir / "run" / "03-cmp" / "compare.csv"));
    REQUIRE(rows.size() == 3);
    CHECK(std::abs(std::stod(rows[1][2]) - 0.25) < 1e-12);
    CHECK(std::abs(std::stod(rows[2][2]) - 0.25) < 1e-8);
  }

  TEST_CASE("CSV quoting follows RFC 4180") {
    CsvTable t({"a", "b"});
    t.row({"plain", "has,comma"});
    t.row({"say \"hi\"", "two\nlines"});
    const auto text = t.str();
    CHECK(text == "a,b\r\nplain,\"has,comma\"\r\n\"say \"\"hi\"\"\",\"two\nlines\"\r\n");
    const auto back = parse_csv(text);
    REQUIRE(back.size() == 3);
    CHECK(back[1][1] == "has,comma");
    CHECK(back[2][0] == "say \"hi\"");
    CHECK(back[2][1] == "two\nlines");
  }
}
