// Acceptance run: one PASS/FAIL line per criterion.
//
// Exit status is 0 once every selected criterion has been evaluated, whatever
// the verdicts; --strict turns any FAIL into exit status 1.
#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ned/harness.hpp"
#include "ned/io.hpp"

using namespace ned;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// limit_s <= 0 means no runtime limit
Verdict from_suite(const SuiteReport& r, double limit_s) {
  Verdict v;
  const bool fast = limit_s <= 0.0 || r.seconds <= limit_s;
  v.pass = r.passed() && fast;
  int failed = 0;
  for (const SuiteCheck& c : r.checks) {
    if (!c.passed) ++failed;
    v.details.push_back(std::string(c.passed ? "ok   " : "FAIL ") + c.name + ": " + c.detail);
  }
  for (const std::string& n : r.notes) v.details.push_back("note " + n);
  v.summary = std::to_string(r.checks.size() - failed) + "/" + std::to_string(r.checks.size()) + " checks, " +
              fmt("%.1f", r.seconds) + " s" + (limit_s > 0.0 ? " (limit " + fmt("%g", limit_s) + " s)" : "");
  return v;
}

// Least-squares slope of rel_l2 over the last min(100, n) records.
double trailing_slope(const FlowTrace& t) {
  const std::size_t n = t.records.size();
  const std::size_t m = std::min<std::size_t>(100, n);
  if (m < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = n - m; i < n; ++i) {
    const double x = t.records[i].epoch, y = t.records[i].rel_l2;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(m);
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

struct Timed {
  ComparisonReport report;
  double seconds = 0.0;
};

Timed compare(const std::string& preset, const fs::path& out, const nlohmann::json& per_method = nlohmann::json::object()) {
  RunConfig cfg;
  cfg.preset = preset;
  cfg.seed = 1;
  cfg.out_dir = (out / preset).string();
  cfg.per_method = per_method;
  const auto t0 = std::chrono::steady_clock::now();
  Timed t;
  t.report = run(cfg);
  t.seconds = seconds_since(t0);
  emit_plotdata(t.report, cfg.out_dir);
  return t;
}

const MethodResult& method(const ComparisonReport& r, const std::string& name) {
  for (const MethodResult& m : r.methods)
    if (m.name == name) return m;
  throw std::logic_error("missing method " + name);
}

std::string finals(const ComparisonReport& r) {
  std::string s;
  for (const MethodResult& m : r.methods) {
    s += (s.empty() ? "" : ", ") + m.name + " " + fmt("%.4g", m.final_rel_l2);
    if (m.trace.aborted) s += " (stopped at epoch " + std::to_string(m.trace.records.back().epoch) + ")";
  }
  return s;
}

Verdict criterion_5(const fs::path& out) {
  Verdict v;
  v.pass = true;
  for (const std::string preset : {"sin_2pi", "normsq_d2"}) {
    const Timed t = compare(preset, out);
    const double fe = method(t.report, "ned_fe").final_rel_l2;
    const double rk2 = method(t.report, "ned_rk2").final_rel_l2;
    const double sgd = method(t.report, "sgd").final_rel_l2;
    const bool order = rk2 <= fe && fe < sgd;
    const bool gap = std::max(fe, rk2) < 0.5 * sgd;
    const bool fast = t.seconds <= 300.0;
    const bool ok = order && gap && fast && t.report.completed;
    v.pass = v.pass && ok;
    v.details.push_back(std::string(ok ? "ok   " : "FAIL ") + preset + ": " + finals(t.report) + "; RK2<=FE<SGD " +
                        (order ? "yes" : "no") + ", NED<SGD/2 " + (gap ? "yes" : "no") + ", " +
                        fmt("%.0f", t.seconds) + " s (limit 300 s)");
    v.summary += (v.summary.empty() ? "" : "; ") + preset + (ok ? " ok" : " fails");
  }
  return v;
}

Verdict criterion_6(const fs::path& out, double bvp_budget_s) {
  Verdict v;
  v.pass = true;
  {
    // the full preset does not fit the runtime limit on this machine; each
    // method gets a third of the budget and stops where it is
    const nlohmann::json budget = {{"time_budget_s", bvp_budget_s / 3.0}};
    const Timed t = compare("bvp_1d", out, {{"ned_fe", budget}, {"ned_rk2", budget}, {"sgd", budget}});
    const FlowTrace& sgd = method(t.report, "sgd").trace;
    bool ok = t.report.completed;
    std::string why = t.report.completed ? "" : "not all methods reached the final epoch; ";
    for (const std::string m : {"ned_fe", "ned_rk2"}) {
      const FlowTrace& ned = method(t.report, m).trace;
      int checked = 0, worse = 0;
      for (std::size_t i = 0; i < ned.records.size() && i < sgd.records.size(); ++i)
        if (ned.records[i].epoch > 1500) {
          ++checked;
          worse += ned.records[i].rel_l2 >= sgd.records[i].rel_l2;
        }
      if (checked == 0 || worse > 0) ok = false;
      why += m + " below SGD at " + std::to_string(checked - worse) + "/" + std::to_string(checked) +
             " compared epochs > 1500; ";
    }
    const bool fast = t.seconds <= 600.0 + 30.0;
    ok = ok && fast;
    v.pass = v.pass && ok;
    v.details.push_back(std::string(ok ? "ok   " : "FAIL ") + "bvp_1d: " + finals(t.report) + "; " + why +
                        fmt("%.0f", t.seconds) + " s (limit 600 s)");
    v.summary += std::string("bvp_1d") + (ok ? " ok" : " fails");
  }
  for (const std::string preset : {"heat_d5_smoke", "react_d5_smoke"}) {
    const Timed t = compare(preset, out);
    const double sgd = method(t.report, "sgd").final_rel_l2;
    bool ok = t.report.completed && t.seconds <= 600.0;
    std::string why;
    for (const std::string m : {"ned_fe", "ned_rk2"}) {
      const MethodResult& r = method(t.report, m);
      const double slope = trailing_slope(r.trace);
      const bool below = r.final_rel_l2 < sgd, down = slope <= 0.0;
      ok = ok && below && down;
      why += m + (below ? " < SGD" : " >= SGD") + ", trailing slope " + fmt("%.3g", slope) + "; ";
    }
    v.pass = v.pass && ok;
    v.details.push_back(std::string(ok ? "ok   " : "FAIL ") + preset + ": " + finals(t.report) + "; " + why +
                        fmt("%.0f", t.seconds) + " s (limit 600 s)");
    v.summary += "; " + preset + (ok ? " ok" : " fails");
  }
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict criterion_8(const fs::path& out) {
  Verdict v;
  v.pass = true;
  int compared = 0;
  for (const std::string preset : {"sin_2pi_smoke", "heat_d5_smoke", "bvp_1d_smoke"}) {
    std::vector<fs::path> dirs;
    int k = 0;
    for (auto [threads, parallel, every] : {std::tuple{1, false, 0}, std::tuple{1, false, 0}, std::tuple{4, false, 0},
                                            std::tuple{3, true, 2}}) {
      nlohmann::json j = {{"preset", preset},
                          {"seed", 5},
                          {"threads", threads},
                          {"parallel_methods", parallel},
                          {"checkpoint_every", every},
                          {"trainer", {{"epochs", 5}, {"samples", 300}, {"eval_points", 500}}}};
      const fs::path dir = out / "determinism" / (preset + "_" + std::to_string(k++));
      fs::remove_all(dir);
      j["out"] = dir.string();
      run(RunConfig::from_json(j));
      dirs.push_back(dir);
    }
    for (const std::string m : {"ned_fe", "ned_rk2", "sgd"}) {
      const std::string ref = slurp(dirs[0] / (m + ".csv"));
      bool same = !ref.empty();
      for (std::size_t i = 1; i < dirs.size(); ++i) same = same && slurp(dirs[i] / (m + ".csv")) == ref;
      ++compared;
      v.pass = v.pass && same;
      v.details.push_back(std::string(same ? "ok   " : "FAIL ") + preset + " " + m +
                          ": repeat, 4 threads, 3 threads with parallel methods and checkpoints");
    }
  }
  v.summary = std::to_string(compared) + " traces compared across 4 settings each";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  bool strict = false;
  std::string out = "acceptance_out";
  std::vector<int> only;
  double bvp_budget = 540.0;
  app.add_flag("--strict", strict, "exit 1 if any criterion fails");
  app.add_option("--out", out, "directory for traces and reports");
  app.add_option("--only", only, "criteria to run (default all)")->check(CLI::Range(1, 8));
  app.add_option("--bvp-budget", bvp_budget, "seconds shared by the three bvp_1d runs");
  CLI11_PARSE(app, argc, argv);

  const fs::path dir(out);
  fs::create_directories(dir);
  // ctest hides the output of passing tests, so keep a copy next to the traces
  std::ofstream log(dir / "acceptance.txt");
  auto emit = [&](const std::string& s) {
    std::printf("%s\n", s.c_str());
    std::fflush(stdout);
    log << s << "\n" << std::flush;
  };
  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8} : std::set<int>(only.begin(), only.end());
  const std::map<int, std::pair<std::string, std::function<Verdict()>>> criteria = {
      {1, {"derivative fidelity", [] { return from_suite(check_derivatives(100), 30.0); }}},
      {2, {"integrator orders", [] { return from_suite(check_integrator_orders(), 5.0); }}},
      {3, {"energy monotonicity", [] { return from_suite(check_energy_monotonicity(), 0.0); }}},
      {4, {"pseudoinverse suite", [] { return from_suite(check_pinv(), 10.0); }}},
      {5, {"supervised ordering", [&] { return criterion_5(dir); }}},
      {6, {"PDE ordering", [&] { return criterion_6(dir, bvp_budget); }}},
      {7, {"construction bounds", [] { return from_suite(check_constructions(), 60.0); }}},
      {8, {"determinism", [&] { return criterion_8(dir); }}},
  };

  int failed = 0;
  std::vector<std::string> lines;
  for (const auto& [k, entry] : criteria) {
    if (!selected.count(k)) continue;
    Verdict v;
    try {
      v = entry.second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.summary = std::string("error: ") + e.what();
    }
    for (const std::string& d : v.details) emit("    " + d);
    const std::string line = "CRITERION " + std::to_string(k) + " " + (v.pass ? "PASS" : "FAIL") + "  " +
                             entry.first + ": " + v.summary;
    emit(line);
    lines.push_back(line);
    failed += !v.pass;
  }
  emit("");
  for (const std::string& l : lines) emit(l);
  emit(std::to_string(failed) + " of " + std::to_string(lines.size()) + " criteria failed");
  return strict && failed > 0 ? 1 : 0;
}
