#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ned/constructions.hpp"
#include "ned/harness.hpp"
#include "ned/io.hpp"

using namespace ned;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ned_test_" + name);
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

}  // namespace

TEST_CASE("checkpoints round-trip bit for bit") {
  for (const std::string& name : {"heat_d5", "bvp_1d", "sin_10pi"}) {
    CAPTURE(name);
    const ProblemDef p = preset(name);
    const Network net(p.net);
    const ParamVec th = init_params(net, 12);
    const nlohmann::json j = checkpoint_to_json(net, th, 12, 40);
    const Checkpoint ck = checkpoint_from_json(nlohmann::json::parse(j.dump()));
    CHECK(ck.params == th.values);
    CHECK(ck.seed == 12);
    CHECK(ck.epoch == 40);
    auto [net2, th2] = restore(ck);
    const Vector x = Vector::Constant(p.dim(), 0.3);
    CHECK(forward(net2, th2, x) == forward(net, th, x));
  }
}

TEST_CASE("checkpoint with the wrong parameter count is rejected") {
  const Network net(NetworkSpec::fnn(2, {3}, Activation::relu));
  nlohmann::json j = checkpoint_to_json(net, init_params(net, 1), 1, 0);
  j["params"].push_back(1.0);
  CHECK_THROWS_AS(checkpoint_from_json(j), std::invalid_argument);
}

TEST_CASE("gadget nets serialize as checkpoints") {
  const GadgetNet g = sigma2_product();
  const Checkpoint ck = checkpoint_from_json(checkpoint_to_json(g.net, g.theta, 0, 0));
  auto [net, th] = restore(ck);
  Vector x(2);
  x << 1.5, -0.75;
  CHECK(forward(net, th, x) == doctest::Approx(-1.125).epsilon(1e-14));
}

TEST_CASE("run config parsing") {
  const RunConfig c = RunConfig::from_json(nlohmann::json::parse(R"({
    "preset": "normsq_d2", "smoke": true, "methods": ["sgd", "ned_fe"], "seed": 9,
    "trainer": {"epochs": 3}, "per_method": {"sgd": {"tau0": 0.5}}})"));
  CHECK(c.preset_name() == "normsq_d2_smoke");
  CHECK(c.methods.size() == 2);
  const ProblemDef p = preset(c.preset_name());
  CHECK(c.trainer_for(p, Method::sgd).tau0 == 0.5);
  CHECK(c.trainer_for(p, Method::ned_fe).tau0 == p.tau0_ned);
  CHECK(c.trainer_for(p, Method::ned_fe).epochs == 3);
  CHECK(RunConfig::from_json(c.to_json()).to_json() == c.to_json());

  CHECK_THROWS(RunConfig::from_json({{"preset", "x"}, {"colour", 1}}));
  CHECK_THROWS(RunConfig::from_json({{"preset", "x"}, {"trainer", {{"tau", 1}}}}));
  CHECK_THROWS(RunConfig::from_json({{"preset", "x"}, {"methods", {"sgd", "sgd"}}}));
  CHECK_THROWS(RunConfig::from_json(nlohmann::json::object()));
}

TEST_CASE("ordering verdicts") {
  std::vector<MethodResult> m(3);
  m[0].name = "ned_fe";
  m[0].final_rel_l2 = 0.1;
  m[1].name = "ned_rk2";
  m[1].final_rel_l2 = 0.05;
  m[2].name = "sgd";
  m[2].final_rel_l2 = 0.1;
  const auto v = ordering_verdicts(m);
  REQUIRE(v.size() == 3);
  CHECK(v[0].rfind("ned_fe >= ned_rk2", 0) == 0);
  CHECK(v[1].rfind("ned_fe >= sgd", 0) == 0);
  CHECK(v[2].rfind("ned_rk2 < sgd", 0) == 0);
}

TEST_CASE("comparison run writes traces, report and plot data; reruns are byte-identical") {
  const fs::path a = scratch_dir("run_a"), b = scratch_dir("run_b");
  nlohmann::json j = {{"preset", "sin_2pi"}, {"smoke", true}, {"seed", 3}, {"trainer", {{"epochs", 6}}}};
  j["out"] = a.string();
  const ComparisonReport ra = run(RunConfig::from_json(j));
  j["out"] = b.string();
  j["threads"] = 2;
  j["parallel_methods"] = true;
  j["checkpoint_every"] = 4;
  const ComparisonReport rb = run(RunConfig::from_json(j));
  CHECK(ra.completed);
  REQUIRE(ra.methods.size() == 3);
  for (const std::string m : {"ned_fe", "ned_rk2", "sgd"}) {
    CHECK(fs::exists(a / (m + ".csv")));
    CHECK(slurp(a / (m + ".csv")) == slurp(b / (m + ".csv")));
    CHECK(fs::exists(b / (m + "_epoch4.json")));
    CHECK(fs::exists(b / (m + "_epoch6.json")));
  }
  const auto report = read_json_file((a / "report.json").string());
  CHECK(report.at("preset") == "sin_2pi_smoke");
  CHECK(report.at("methods").size() == 3);
  CHECK(report.at("verdicts").size() == 3);

  const auto paths = emit_plotdata(ra, a.string());
  CHECK(paths.size() == 4);
  const std::string data = slurp(a / "sgd_rel_l2.csv");
  CHECK(data.rfind("epoch,rel_l2\n0,", 0) == 0);
  CHECK(slurp(a / "plot.gp").find("ned_rk2_rel_l2.csv") != std::string::npos);

  // the final checkpoint holds the parameters the trace ends with
  const Checkpoint ck = load_checkpoint((b / "ned_fe_epoch6.json").string());
  CHECK(ck.params == ra.methods[0].trace.theta.values);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("preset dump") {
  const nlohmann::json j = preset_to_json(preset("heat_d5"));
  CHECK(j.at("samples") == 10000);
  CHECK(j.at("net").at("ansatz").at("kind").get<std::string>().size() > 0);
  CHECK(j.at("rel_tol").get<double>() > 0.0);
}

TEST_CASE("validation suites run") {
  const SuiteReport r = validate_suite("linalg");
  CHECK(r.passed());
  CHECK(r.text().find("linalg: passed") != std::string::npos);
  CHECK_THROWS(validate_suite("nope"));
}
