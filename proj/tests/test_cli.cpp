#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

fs::path scratch() {
  static const fs::path root = [] {
    auto p = fs::temp_directory_path() /
             ("evstudy_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void put(const fs::path &p, const std::string &text) {
  std::ofstream(p, std::ios::binary) << text;
}

Run cli(const std::string &args) {
  static int n = 0;
  const auto err = scratch() / ("stderr_" + std::to_string(n++) + ".txt");
  const std::string cmd = std::string("\"") + EVSTUDY_CLI + "\" " + args +
                          " > /dev/null 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

// Small simulated data set shared by the tests.
const fs::path &data_dir() {
  static const fs::path dir = [] {
    const auto d = scratch() / "data";
    put(scratch() / "dgp.json",
        R"({"n_municipalities": 40, "n_ring": 10, "students_per_cell": 25})");
    const auto r = cli("simulate --config " + (scratch() / "dgp.json").string() +
                       " --seed 3 --out " + d.string());
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::string inputs(const fs::path &d) {
  return " --panel " + (d / "students.csv").string() + " --centroids " +
         (d / "centroids.csv").string() + " --events " + (d / "events.csv").string();
}

} // namespace

TEST_CASE("missing config file exits 2 and names the path") {
  const auto r = cli("estimate --config /nonexistent/run.json --out " +
                     (scratch() / "o1").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("/nonexistent/run.json") != std::string::npos);
}

TEST_CASE("unknown config key exits 2") {
  put(scratch() / "bad.json", R"({"panel": "x.csv", "pannel": "y.csv"})");
  const auto r = cli("estimate --config " + (scratch() / "bad.json").string() +
                     " --out " + (scratch() / "o2").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("pannel") != std::string::npos);
  put(scratch() / "badspec.json", R"({"controls": ["shoe_size"]})");
  CHECK(cli("estimate" + inputs(data_dir()) + " --spec " +
            (scratch() / "badspec.json").string() + " --out " +
            (scratch() / "o2b").string())
            .code == 2);
  CHECK(cli("estimate --bogus-flag").code == 2);
}

TEST_CASE("unreadable panel exits 3") {
  const auto d = data_dir();
  auto r = cli("estimate --panel /nonexistent/students.csv --centroids " +
               (d / "centroids.csv").string() + " --events " +
               (d / "events.csv").string() + " --out " + (scratch() / "o3").string());
  CHECK(r.code == 3);
  CHECK(r.err.find("/nonexistent/students.csv") != std::string::npos);

  put(scratch() / "broken.csv", "student_id,year\nA,2008\n");
  r = cli("estimate --panel " + (scratch() / "broken.csv").string() +
          " --centroids " + (d / "centroids.csv").string() + " --events " +
          (d / "events.csv").string() + " --out " + (scratch() / "o3b").string());
  CHECK(r.code == 3);
}

TEST_CASE("same seed gives identical bytes") {
  const auto a = scratch() / "sa";
  const auto b = scratch() / "sb";
  const std::string cfg = " --config " + (scratch() / "dgp.json").string();
  data_dir();
  REQUIRE(cli("simulate" + cfg + " --seed 9 --out " + a.string()).code == 0);
  REQUIRE(cli("--threads 1 simulate" + cfg + " --seed 9 --out " + b.string()).code == 0);
  for (const char *f : {"students.csv", "centroids.csv", "events.csv", "truth.json"}) {
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  }
}

TEST_CASE("estimate writes its artifacts and re-runs from the resolved config") {
  const auto d = data_dir();
  const auto o = scratch() / "est";
  REQUIRE(cli("estimate" + inputs(d) + " --out " + o.string()).code == 0);
  for (const char *f : {"resolved_config.json", "ingest_report.json", "design.json",
                        "fit.json", "table.txt", "plot.csv"}) {
    CHECK_MESSAGE(fs::exists(o / f), f);
  }
  const auto o2 = scratch() / "est2";
  REQUIRE(cli("estimate --config " + (o / "resolved_config.json").string() +
              " --out " + o2.string())
              .code == 0);
  CHECK(slurp(o / "fit.json") == slurp(o2 / "fit.json"));
  CHECK(slurp(o / "table.txt") == slurp(o2 / "table.txt"));
  CHECK(slurp(o / "resolved_config.json") == slurp(o2 / "resolved_config.json"));
}

TEST_CASE("null effect: no reported event coefficient is significant at 1%") {
  put(scratch() / "null.json",
      R"({"n_municipalities": 60, "n_ring": 0, "students_per_cell": 30, "K_near": 2.0})");
  const auto d = scratch() / "null";
  REQUIRE(cli("simulate --config " + (scratch() / "null.json").string() +
              " --seed 21 --out " + d.string())
              .code == 0);
  const auto o = scratch() / "null_est";
  REQUIRE(cli("estimate" + inputs(d) + " --mode semidynamic --out " + o.string()).code == 0);
  const auto fit = nlohmann::json::parse(slurp(o / "fit.json"));
  int tested = 0;
  for (const auto &c : fit["coefficients"]) {
    const std::string name = c["name"];
    if (name.rfind("ev_", 0) == 0 && name.find("_x_dist") == std::string::npos) {
      ++tested;
      CHECK_MESSAGE(c["p"].get<double>() >= 0.01, name);
    }
  }
  CHECK(tested == 12);
}

TEST_CASE("diagnose: pretrend plot rows and ring-free placebo error") {
  const auto d = data_dir();
  const auto o = scratch() / "diag";
  REQUIRE(cli("diagnose" + inputs(d) + " --out " + o.string()).code == 0);
  std::istringstream plot(slurp(o / "pretrend_plot.csv"));
  std::string line;
  std::getline(plot, line);
  CHECK(line == "k,estimate,ci_low,ci_high");
  std::vector<int> ks;
  while (std::getline(plot, line)) {
    ks.push_back(std::stoi(line.substr(0, line.find(','))));
  }
  CHECK(ks == std::vector<int>{-8, -7, -6, -5, -4, -2});
  const auto rep = nlohmann::json::parse(slurp(o / "diagnostics.json"));
  CHECK(rep["suites_succeeded"] == 3);

  const auto n = scratch() / "null";
  const auto o2 = scratch() / "diag_noring";
  const auto r = cli("diagnose" + inputs(n) + " --out " + o2.string());
  CHECK(r.code == 0);
  const auto rep2 = nlohmann::json::parse(slurp(o2 / "diagnostics.json"));
  CHECK(rep2["placebo"]["status"] == "error");
  CHECK(rep2["placebo"]["error"].get<std::string>().find("ring") != std::string::npos);
  CHECK(rep2["pretrend"]["status"] == "ok");
}

TEST_CASE("assign and distribution") {
  const auto d = data_dir();
  const auto o = scratch() / "assign";
  REQUIRE(cli("assign --centroids " + (d / "centroids.csv").string() + " --events " +
              (d / "events.csv").string() + " --out " + o.string())
              .code == 0);
  CHECK(slurp(o / "eventmap.csv")
            .rfind("municipality_id,event_municipality_id,distance_km,buffer_class,opening_year\n", 0) == 0);
  const auto o2 = scratch() / "dist";
  REQUIRE(cli("distribution" + inputs(d) + " --out " + o2.string()).code == 0);
  CHECK(slurp(o2 / "distribution.txt").find("τ−9") != std::string::npos);
}
