#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string output;
};

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "shapeband_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run(const std::string& args) {
  const std::string cmd = "cd '" + workdir().string() + "' && '" SHAPEBAND_CLI "' " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  while (const auto n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const std::string& name) {
  std::ifstream in(workdir() / name, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("calibrate, simulate and band pipeline is reproducible") {
  auto r = run("calibrate --class isotonic --m 12 --d 2 --alpha 0.05 --nsim 200 --seed 7 --out cal.kv");
  CHECK(r.code == 0);
  CHECK(r.output.find("kappa=") != std::string::npos);
  REQUIRE(fs::exists(workdir() / "cal.kv"));
  CHECK(run("simulate --function x1+x2 --m 12 --seed 3 --out y.csv").code == 0);
  r = run("band --data y.csv --cal cal.kv --out band.csv --plot-data plot.csv --truth sum");
  CHECK(r.code == 0);
  CHECK(r.output.find("width min=") != std::string::npos);
  CHECK(r.output.find("covered=") != std::string::npos);
  const auto band = slurp("band.csv"), plot = slurp("plot.csv"), cal = slurp("cal.kv");

  CHECK(run("--threads 3 calibrate --class isotonic --m 12 --d 2 --alpha 0.05 --nsim 200 --seed 7 --out cal2.kv").code == 0);
  CHECK(slurp("cal2.kv") == cal);
  CHECK(run("band --data y.csv --cal cal2.kv --out band2.csv --plot-data plot2.csv --truth sum").code == 0);
  CHECK(slurp("band2.csv") == band);
  CHECK(slurp("plot2.csv") == plot);
}

TEST_CASE("usage and validation errors exit with 2") {
  CHECK(run("calibrate --class isotonic --m 12").code == 2);
  const auto r = run("calibrate --class isotonic --m 12 --alpha 0.7 --out c.kv");
  CHECK(r.code == 2);
  CHECK(r.output.find("alpha") != std::string::npos);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("simulate --function nope --m 12 --out z.csv").code == 2);
}

TEST_CASE("runtime failures exit with 1") {
  REQUIRE(run("calibrate --class isotonic --m 8 --nsim 100 --seed 1 --out c8.kv").code == 0);
  CHECK(run("band --data missing.csv --cal c8.kv --out b.csv").code == 1);

  REQUIRE(run("simulate --function sum --m 8 --seed 1 --out y8.csv").code == 0);
  std::istringstream in(slurp("y8.csv"));
  std::ofstream out(workdir() / "holey.csv");
  std::string line;
  for (int i = 0; std::getline(in, line); ++i) {
    if (i != 5) out << line << '\n';
  }
  out.close();
  const auto r = run("band --data holey.csv --cal c8.kv --out b.csv");
  CHECK(r.code == 1);
  CHECK(r.output.find("(0.125,0.625)") != std::string::npos);

  REQUIRE(run("simulate --function sum --m 9 --seed 1 --out y9.csv").code == 0);
  CHECK(run("band --data y9.csv --cal c8.kv --out b.csv").code == 1);

  auto text = slurp("c8.kv");
  text[text.find("kappa=") + 8] ^= 1;
  std::ofstream(workdir() / "bad.kv") << text;
  const auto t = run("band --data y8.csv --cal bad.kv --out b.csv");
  CHECK(t.code == 1);
  CHECK(t.output.find("checksum") != std::string::npos);
}

TEST_CASE("constants table") {
  const auto r = run("constants --class convex --d 2");
  CHECK(r.code == 0);
  CHECK(r.output.find("1.19788") != std::string::npos);
  CHECK(r.output.find("0.68278") != std::string::npos);
  const auto both = run("constants");
  CHECK(both.output.find("1.86121") != std::string::npos);
  CHECK(both.output.find("class=isotonic d=2") != std::string::npos);
}

TEST_CASE("coverage and rates write re-readable reports") {
  REQUIRE(run("calibrate --class isotonic --m 8 --nsim 100 --seed 1 --out c8.kv").code == 0);
  auto r = run("coverage --function sum20 --class isotonic --m 8 --cal c8.kv --reps 100 --seed 3 --out cov.txt");
  CHECK(r.code == 0);
  CHECK(r.output.find("coverage") != std::string::npos);
  const auto first = slurp("cov.txt");
  CHECK(first.find("[coverage]") == 0);
  CHECK(run("--threads 2 coverage --function sum20 --class isotonic --m 8 --cal c8.kv --reps 100 --seed 3 --out cov2.txt")
            .code == 0);
  CHECK(slurp("cov2.txt") == first);

  r = run("rates --function indicator --class isotonic --grids 8,10,12 --region \"x1<=0.3\" --nsim 100 --reps 2 "
          "--cache-dir cache --out rates.txt");
  CHECK(r.code == 0);
  CHECK(r.output.find("slope") != std::string::npos);
  CHECK(slurp("rates.txt").find("[rates]") == 0);
}
