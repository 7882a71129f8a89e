// End-to-end tests of the command line tool: spawns the real binary and
// inspects exit codes and report files. PLSPOLY_CLI_PATH is injected by the
// build so the tests track the actual artifact.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#ifndef PLSPOLY_CLI_PATH
#error "PLSPOLY_CLI_PATH must point at the built binary"
#endif

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int counter = 0;

RunResult run_cli(const std::string& args) {
  const std::string tag = "/tmp/plspoly_cli_" + std::to_string(++counter);
  const std::string out_path = tag + ".out";
  const std::string err_path = tag + ".err";
  const std::string cmd = std::string(PLSPOLY_CLI_PATH) + " " + args + " > " +
                          out_path + " 2> " + err_path;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  std::remove(out_path.c_str());
  std::remove(err_path.c_str());
  return r;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// Diagonal fixture: design diag(sqrt(2), 1), response (1, 1).
void write_fixture(std::string* design, std::string* response) {
  *design = "/tmp/plspoly_cli_design.csv";
  *response = "/tmp/plspoly_cli_response.csv";
  write_file(*design, "1.4142135623730951,0\n0,1\n");
  write_file(*response, "1\n1\n");
}

}  // namespace

TEST_CASE("cli fit reproduces the fixture residual path") {
  std::string design, response;
  write_fixture(&design, &response);
  const RunResult r =
      run_cli("fit --design " + design + " --response " + response);
  REQUIRE(r.exit_code == 0);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j.at("schema_version").get<int>() == 1);
  CHECK(j.at("rank").get<int>() == 2);
  CHECK(j.at("truncated").get<bool>() == false);
  const auto residual = j.at("residual_sq").get<std::vector<double>>();
  REQUIRE(residual.size() == 3);
  CHECK(residual[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(residual[1] == doctest::Approx(0.2).epsilon(1e-10));
  CHECK(std::fabs(residual[2]) <= 1e-12);
  const auto& f1 = j.at("filter_factors").at(0);
  CHECK(f1.at("k").get<int>() == 1);
  CHECK(f1.at("factors").at(0).get<double>() ==
        doctest::Approx(1.2).epsilon(1e-10));
  CHECK(f1.at("factors").at(1).get<double>() ==
        doctest::Approx(0.6).epsilon(1e-10));
  CHECK(f1.at("truncated_factors").at(0).get<double>() ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cli fit flags truncation when the request exceeds the rank") {
  std::string design, response;
  write_fixture(&design, &response);
  const RunResult r = run_cli("fit --design " + design + " --response " +
                              response + " --k-max 5");
  REQUIRE(r.exit_code == 0);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j.at("truncated").get<bool>() == true);
  CHECK(j.at("k_max").get<int>() == 2);
}

TEST_CASE("cli missing input exits 2 and names the path") {
  std::string design, response;
  write_fixture(&design, &response);
  const RunResult r = run_cli("fit --design /tmp/plspoly_cli_no_such.csv "
                              "--response " +
                              response);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("/tmp/plspoly_cli_no_such.csv") != std::string::npos);
}

TEST_CASE("cli rejects ambiguous input sources") {
  std::string design, response;
  write_fixture(&design, &response);
  write_file("/tmp/plspoly_cli_spec.json",
             "{\"n\": 4, \"p\": 3, \"spectrum\": {\"kind\": \"explicit\", "
             "\"values\": [2.0, 1.0]}, \"seed\": 5}");
  const RunResult r =
      run_cli("fit --design " + design + " --response " + response +
              " --spec /tmp/plspoly_cli_spec.json");
  CHECK(r.exit_code == 2);
}

TEST_CASE("cli diagnose carries the fixture risk row and weight tables") {
  std::string design, response;
  write_fixture(&design, &response);
  const RunResult r =
      run_cli("diagnose --design " + design + " --response " + response);
  REQUIRE(r.exit_code == 0);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  const auto& risk1 = j.at("risk").at(0);
  CHECK(risk1.at("k").get<int>() == 1);
  CHECK(risk1.at("empirical_risk_direct").get<double>() ==
        doctest::Approx(0.2).epsilon(1e-10));
  CHECK(risk1.at("empirical_risk_formula").get<double>() ==
        doctest::Approx(0.2).epsilon(1e-10));
  CHECK(risk1.at("pcr_risk").get<double>() ==
        doctest::Approx(1.0).epsilon(1e-10));
  CHECK(j.at("mse").at("available").get<bool>() == false);
  CHECK(j.at("weights").at("evaluated").get<bool>() == true);
  CHECK(j.at("weights").at("tables").size() == 2);
  CHECK(j.at("shrinkage").at("pass").get<bool>() == true);

  // zero budget: tables are skipped, not an error
  const RunResult r0 = run_cli("diagnose --design " + design + " --response " +
                               response + " --enum-budget 0");
  REQUIRE(r0.exit_code == 0);
  const nlohmann::json j0 = nlohmann::json::parse(r0.out);
  CHECK(j0.at("weights").at("evaluated").get<bool>() == false);
  CHECK(j0.at("weights").at("tables").size() == 0);
}

TEST_CASE("cli reports are byte identical across reruns") {
  write_file("/tmp/plspoly_cli_sim.json",
             "{\"n\": 6, \"p\": 4, \"spectrum\": {\"kind\": \"geometric\", "
             "\"count\": 4, \"first\": 5.0, \"rate\": 0.6}, \"noise_sd\": 0.5, "
             "\"seed\": 11, \"replications\": 40}");
  const RunResult a =
      run_cli("simulate --spec /tmp/plspoly_cli_sim.json");
  const RunResult b =
      run_cli("simulate --spec /tmp/plspoly_cli_sim.json");
  REQUIRE(a.exit_code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("weight_status") != std::string::npos);

  const RunResult d1 =
      run_cli("diagnose --spec /tmp/plspoly_cli_sim.json --format csv");
  const RunResult d2 =
      run_cli("diagnose --spec /tmp/plspoly_cli_sim.json --format csv");
  REQUIRE(d1.exit_code == 0);
  CHECK(d1.out == d2.out);
}

TEST_CASE("cli simulate with one noiseless replication matches the formula "
          "weights exactly") {
  write_file("/tmp/plspoly_cli_sim0.json",
             "{\"n\": 6, \"p\": 4, \"spectrum\": {\"kind\": \"geometric\", "
             "\"count\": 4, \"first\": 5.0, \"rate\": 0.6}, \"noise_sd\": 0.0, "
             "\"seed\": 3, \"replications\": 1}");
  const RunResult r =
      run_cli("simulate --spec /tmp/plspoly_cli_sim0.json --format json");
  REQUIRE(r.exit_code == 0);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  for (const auto& row : j.at("rows")) {
    REQUIRE(row.at("weights_evaluated").get<bool>());
    CHECK(row.at("weight_gap").get<double>() == 0.0);
    CHECK(row.at("weight_status").get<std::string>() == "within-band");
  }
}

TEST_CASE("cli verify passes on a small sweep and writes a report") {
  const RunResult r =
      run_cli("verify --problems 25 --out /tmp/plspoly_cli_verify.json");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("verification: PASS") != std::string::npos);
  const nlohmann::json j =
      nlohmann::json::parse(slurp("/tmp/plspoly_cli_verify.json"));
  CHECK(j.at("pass").get<bool>() == true);
  CHECK(j.at("problems_run").get<int>() == 25);
  CHECK(j.at("results").size() >= 25);
  std::remove("/tmp/plspoly_cli_verify.json");
}

TEST_CASE("cli verify detects an injected corruption") {
  const RunResult r = run_cli("verify --problems 3 --inject-perturbation");
  CHECK(r.exit_code == 1);
  CHECK(r.out.find("FAIL poly-gram-offdiag") != std::string::npos);
  CHECK(r.out.find("verification: FAIL") != std::string::npos);
}

TEST_CASE("cli verify suite filter narrows the run") {
  const RunResult r = run_cli("verify --problems 5 --suite shrinkage");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("norm-chain") != std::string::npos);
  CHECK(r.out.find("poly-values-two-routes") == std::string::npos);

  const RunResult bad = run_cli("verify --problems 5 --suite nosuch");
  CHECK(bad.exit_code == 2);
}

TEST_CASE("cli centering is accepted for file input only") {
  std::string design, response;
  write_fixture(&design, &response);
  const RunResult ok = run_cli("fit --design " + design + " --response " +
                               response + " --center");
  CHECK(ok.exit_code == 0);
  write_file("/tmp/plspoly_cli_spec2.json",
             "{\"n\": 4, \"p\": 3, \"spectrum\": {\"kind\": \"explicit\", "
             "\"values\": [2.0, 1.0]}, \"seed\": 5}");
  const RunResult bad =
      run_cli("fit --spec /tmp/plspoly_cli_spec2.json --center");
  CHECK(bad.exit_code == 2);
}
