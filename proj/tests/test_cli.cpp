#include <doctest.h>

#include <sstream>

#include "pvdyn/cli.hpp"

using namespace pvdyn;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "pvdyn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("verify passes and catches an injected sign error") {
  const Result ok = run({"verify", "--seed", "0"});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("all checks passed") != std::string::npos);

  const Result bad = run({"verify", "--seed", "0", "--count", "2", "--inject-fault", "jt-lambda-sign"});
  CHECK(bad.code == 1);
  CHECK(bad.out.find("FAIL  pv-vs-oracle") != std::string::npos);

  CHECK(run({"verify", "--count", "0"}).code == 2);
  CHECK(run({"verify", "--inject-fault", "nonsense"}).code == 2);
}

TEST_CASE("verify accepts a user model") {
  const Result r = run({"verify", "--count", "3", "--model", PVDYN_EXAMPLE_DIR "/pendulum2.json", "--constraints",
                        PVDYN_EXAMPLE_DIR "/pendulum2_tip.json"});
  CHECK(r.code == 0);
  CHECK(r.out.find("user#") == std::string::npos);
}

TEST_CASE("bench reports one row per size and solver") {
  const Result r = run({"bench", "--family", "chain", "--sizes", "16,32,64,128", "--reps", "100"});
  REQUIRE(r.code == 0);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == cli::BenchReport::csv_header());
  double previous = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = split(rows[i]);
    REQUIRE(f.size() == 10);
    CHECK(f[4] == "pv");
    const double median = std::stod(f[5]);
    CHECK(median > previous);
    previous = median;
  }
}

TEST_CASE("bench usage errors") {
  CHECK(run({"bench", "--sizes", "32,16"}).code == 2);
  CHECK(run({"bench", "--sizes", "16", "--solvers", "magic"}).code == 2);
  CHECK(run({"bench", "--family", "tree", "--sizes", "16"}).code == 2);
  CHECK(run({"bench", "--sizes", "16", "--reps", "10"}).code == 2);
}

TEST_CASE("simulate writes one row per step") {
  const Result r = run({"simulate", "--model", "builtin:pendulum", "--duration", "1"});
  REQUIRE(r.code == 0);
  const auto rows = lines(r.out);
  CHECK(rows.size() == 1002);
  CHECK(rows[0] == "t,q0,qd0,qdd0,con_pos_err,con_vel_err,energy");
  CHECK(r.err.find("samples 1001") != std::string::npos);

  const Result again = run({"simulate", "--model", "builtin:pendulum", "--duration", "1"});
  CHECK(again.out == r.out);
}

TEST_CASE("soft quadruped stance holds its feet") {
  const Result r = run({"simulate", "--model", "builtin:quadruped", "--solver", "pv-soft", "--soft-weight", "1e6",
                        "--duration", "1"});
  REQUIRE(r.code == 0);
  const auto rows = lines(r.out);
  const auto header = split(rows.front());
  const auto last = split(rows.back());
  REQUIRE(header.size() == last.size());
  std::size_t col = 0;
  while (header[col] != "con_pos_err") ++col;
  CHECK(std::stod(last[col]) < 1e-3);
}

TEST_CASE("simulate usage errors") {
  CHECK(run({"simulate"}).code == 2);
  CHECK(run({"simulate", "--model", "no/such/model.json"}).code == 2);
  CHECK(run({"simulate", "--model", PVDYN_EXAMPLE_DIR "/pendulum2.json", "--constraints", "missing.json"}).code == 2);
  CHECK(run({"simulate", "--model", "builtin:pendulum", "--solver", "fastest"}).code == 2);
  CHECK(run({"simulate", "--model", "builtin:unicorn"}).code == 2);
}

TEST_CASE("osim prints the inverse operational-space inertia") {
  const Result r = run({"osim", "--model", "builtin:quadruped", "--seed", "3"});
  REQUIRE(r.code == 0);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 12);
  for (const auto& row : rows) CHECK(split(row).size() == 12);
}

}  // TEST_SUITE
