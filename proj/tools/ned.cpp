// Command-line front end: comparison runs, validation suites, gadgets, presets.
#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "ned/constructions.hpp"
#include "ned/harness.hpp"
#include "ned/io.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& preset, bool smoke, std::int64_t seed,
            const std::string& out, int threads) {
  nlohmann::json j = config_path.empty() ? nlohmann::json::object() : ned::read_json_file(config_path);
  if (!preset.empty()) j["preset"] = preset;
  if (smoke) j["smoke"] = true;
  if (seed >= 0) j["seed"] = seed;
  if (!out.empty()) j["out"] = out;
  if (threads > 0) j["threads"] = threads;
  const ned::RunConfig cfg = ned::RunConfig::from_json(j);
  const ned::ComparisonReport rep = ned::run(cfg);
  ned::emit_plotdata(rep, cfg.out_dir);
  for (const auto& m : rep.methods) {
    std::printf("%-8s final rel_l2 %.6e  (%s)", m.name.c_str(), m.final_rel_l2, m.trace_path.c_str());
    if (m.trace.aborted) std::printf("  aborted: %s", m.trace.abort_reason.c_str());
    std::printf("\n");
  }
  for (const auto& v : rep.verdicts) std::printf("%s\n", v.c_str());
  return rep.completed ? 0 : 3;
}

int cmd_validate(const std::string& suite) {
  bool ok = true;
  for (const std::string& s : suite == "all" ? ned::suite_names() : std::vector<std::string>{suite}) {
    const ned::SuiteReport r = ned::validate_suite(s);
    std::cout << r.text();
    ok = ok && r.passed();
  }
  return ok ? 0 : 1;
}

int cmd_gadget(const std::string& name, const std::vector<double>& params, const std::string& out, int samples) {
  const ned::GadgetNet g = ned::gadget_by_name(name, params);
  const ned::GadgetReport r = ned::verify_by_name(name, params, samples);
  nlohmann::json j = ned::checkpoint_to_json(g.net, g.theta, 0, 0);
  j["gadget"] = {{"name", g.name},
                 {"params", g.params},
                 {"width", g.width()},
                 {"depth", g.depth()},
                 {"width_budget", g.width_budget},
                 {"depth_budget", g.depth_budget},
                 {"budget_rule", g.budget_rule},
                 {"error_bound", g.error_bound},
                 {"verification",
                  {{"points", r.points},
                   {"measured", r.measured},
                   {"tolerance", r.tolerance},
                   {"budget_ok", r.budget_ok},
                   {"error_ok", r.error_ok}}}};
  if (!out.empty()) {
    ned::write_text_file(out, j.dump(1) + "\n");
  } else {
    std::cout << j.dump(1) << "\n";
  }
  std::fprintf(stderr, "%s %s: width %d/%d depth %d/%d, error %.3g (tolerance %.3g, %d points)%s\n", g.name.c_str(),
               g.params.c_str(), g.width(), g.width_budget, g.depth(), g.depth_budget, r.measured, r.tolerance,
               r.points, r.passed() ? "" : "  FAILED");
  return r.passed() ? 0 : 1;
}

int cmd_presets(const std::string& name) {
  nlohmann::json j = nlohmann::json::array();
  for (const std::string& n : ned::preset_names())
    if (name.empty() || n == name) j.push_back(ned::preset_to_json(ned::preset(n)));
  if (j.empty()) throw std::invalid_argument("unknown preset '" + name + "'");
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural energy descent experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ned::version_info().dump());

  std::string config, preset, out;
  bool smoke = false;
  std::int64_t seed = -1;
  int threads = 0;
  auto* run = app.add_subcommand("run", "train every configured method and write traces, report.json and plot data");
  run->add_option("--config", config, "run configuration JSON");
  run->add_option("--preset", preset, "preset name (overrides the config)");
  run->add_flag("--smoke", smoke, "quarter-size variant");
  run->add_option("--seed", seed, "master seed");
  run->add_option("--out", out, "output directory");
  run->add_option("--threads", threads, "assembly threads");

  std::string suite = "all";
  auto* validate = app.add_subcommand("validate", "run a property suite");
  validate->add_option("--suite", suite, "deriv, linalg, constructions, integrators or all")
      ->check(CLI::IsMember({"all", "deriv", "linalg", "constructions", "integrators"}));

  std::string gname, gout;
  int gsamples = 100000;
  std::vector<double> gparams;
  auto* gadget = app.add_subcommand("gadget", "build an explicit construction and emit it as a checkpoint");
  gadget->add_option("--name", gname, "gadget name")->required()->check(CLI::IsMember(ned::gadget_names()));
  gadget->add_option("--params", gparams, "numeric parameters");
  gadget->add_option("--out", gout, "write the checkpoint here instead of stdout");
  gadget->add_option("--samples", gsamples, "random points for the error check")->check(CLI::PositiveNumber);

  std::string pname;
  auto* presets = app.add_subcommand("presets", "print the registered presets as JSON");
  presets->add_option("--name", pname, "only this preset");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) {
      if (config.empty() && preset.empty()) throw std::invalid_argument("run needs --config or --preset");
      return cmd_run(config, preset, smoke, seed, out, threads);
    }
    if (*validate) return cmd_validate(suite);
    if (*gadget) return cmd_gadget(gname, gparams, gout, gsamples);
    if (*presets) return cmd_presets(pname);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
