#include "ned/harness.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ned/io.hpp"

#ifndef NED_VERSION
#define NED_VERSION "0.0.0"
#endif

namespace ned {

using nlohmann::json;

namespace {

const std::vector<std::string> kRunKeys{"preset",   "smoke",   "methods",          "seed",
                                        "out",      "threads", "parallel_methods", "checkpoint_every",
                                        "trainer",  "per_method"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void apply_trainer_json(TrainerConfig& cfg, const json& j) {
  if (!j.is_object()) throw std::invalid_argument("trainer settings must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "tau0") cfg.tau0 = v.get<double>();
    else if (key == "q") cfg.q = v.get<double>();
    else if (key == "epochs") cfg.epochs = v.get<int>();
    else if (key == "rel_tol") cfg.rel_tol = v.get<double>();
    else if (key == "lambda") cfg.lambda = v.get<double>();
    else if (key == "schedule") cfg.schedule = schedule_from_string(v.get<std::string>());
    else if (key == "pde_form") cfg.pde_form = pde_form_from_string(v.get<std::string>());
    else if (key == "resample") cfg.resample = resample_from_string(v.get<std::string>());
    else if (key == "samples") cfg.samples = v.get<int>();
    else if (key == "boundary_samples") cfg.boundary_samples = v.get<int>();
    else if (key == "eval_points") cfg.eval_points = v.get<int>();
    else if (key == "divergence_factor") cfg.divergence_factor = v.get<double>();
    else if (key == "record_wall_time") cfg.record_wall_time = v.get<bool>();
    else if (key == "time_budget_s") cfg.time_budget_s = v.get<double>();
    else throw std::invalid_argument("unknown trainer key '" + key + "'");
  }
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("run config must be a JSON object");
  for (const auto& [key, v] : j.items())
    if (std::find(kRunKeys.begin(), kRunKeys.end(), key) == kRunKeys.end())
      throw std::invalid_argument("unknown run config key '" + key + "'");
  RunConfig c;
  c.preset = j.at("preset").get<std::string>();
  c.smoke = j.value("smoke", false);
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods")) c.methods.push_back(method_from_string(m.get<std::string>()));
  }
  c.seed = j.value("seed", std::uint64_t{1});
  c.out_dir = j.value("out", c.out_dir);
  c.threads = j.value("threads", 1);
  c.parallel_methods = j.value("parallel_methods", false);
  c.checkpoint_every = j.value("checkpoint_every", 0);
  if (j.contains("trainer")) c.trainer = j.at("trainer");
  if (j.contains("per_method")) c.per_method = j.at("per_method");
  c.validate();
  return c;
}

json RunConfig::to_json() const {
  json ms = json::array();
  for (Method m : methods) ms.push_back(ned::to_string(m));
  return {{"preset", preset},     {"smoke", smoke},
          {"methods", ms},        {"seed", seed},
          {"out", out_dir},       {"threads", threads},
          {"parallel_methods", parallel_methods},
          {"checkpoint_every", checkpoint_every},
          {"trainer", trainer},   {"per_method", per_method}};
}

std::string RunConfig::preset_name() const {
  const bool suffixed = preset.size() > 6 && preset.compare(preset.size() - 6, 6, "_smoke") == 0;
  return smoke && !suffixed ? preset + "_smoke" : preset;
}

TrainerConfig RunConfig::trainer_for(const ProblemDef& problem, Method m) const {
  TrainerConfig cfg = config_for(problem, m);
  cfg.threads = threads;
  apply_trainer_json(cfg, trainer);
  const std::string key = ned::to_string(m);
  if (per_method.contains(key)) apply_trainer_json(cfg, per_method.at(key));
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  if (preset.empty()) throw std::invalid_argument("run config: preset is required");
  if (methods.empty()) throw std::invalid_argument("run config: no methods");
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t k = i + 1; k < methods.size(); ++k)
      if (methods[i] == methods[k]) throw std::invalid_argument("run config: duplicate method");
  if (threads < 1) throw std::invalid_argument("run config: threads must be >= 1");
  if (checkpoint_every < 0) throw std::invalid_argument("run config: checkpoint_every must be >= 0");
  if (!trainer.is_object() || !per_method.is_object())
    throw std::invalid_argument("run config: trainer and per_method must be objects");
  for (const auto& [key, v] : per_method.items()) method_from_string(key);
  // probe the overrides now rather than after the first method has trained
  TrainerConfig probe;
  apply_trainer_json(probe, trainer);
  for (const auto& [key, v] : per_method.items()) apply_trainer_json(probe, v);
}

json ComparisonReport::to_json() const {
  json ms = json::array();
  for (const MethodResult& r : methods) {
    json m = {{"name", r.name},
              {"final_rel_l2", r.final_rel_l2},
              {"trace", r.trace_path},
              {"epochs_recorded", r.trace.records.size()},
              {"config_hash", r.trace.config_hash},
              {"aborted", r.trace.aborted}};
    if (r.trace.aborted) m["abort_reason"] = r.trace.abort_reason;
    if (r.trace.energy_surrogate) m["energy"] = "residual_rms";
    ms.push_back(m);
  }
  return {{"preset", preset}, {"seed", seed},       {"completed", completed},
          {"methods", ms},    {"verdicts", verdicts}, {"version", version_info()}};
}

std::vector<std::string> ordering_verdicts(const std::vector<MethodResult>& methods) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t k = i + 1; k < methods.size(); ++k) {
      const MethodResult& a = methods[i];
      const MethodResult& b = methods[k];
      const char* rel = a.final_rel_l2 < b.final_rel_l2 ? " < " : " >= ";
      out.push_back(a.name + rel + b.name + " at final epoch (" + fmt(a.final_rel_l2) + " vs " +
                    fmt(b.final_rel_l2) + ")");
    }
  return out;
}

namespace {

MethodResult run_method(const RunConfig& config, const ProblemDef& problem, const Network& net,
                        const ParamVec& theta0, Method m) {
  namespace fs = std::filesystem;
  const TrainerConfig cfg = config.trainer_for(problem, m);
  const std::string name = ned::to_string(m);
  FlowTrace trace;
  if (config.checkpoint_every <= 0) {
    trace = train(problem, net, theta0, cfg, config.seed);
  } else {
    // train in segments; each segment restarts from the parameters recorded
    // at its first epoch, so the joined trace equals an uninterrupted run
    ParamVec theta = theta0;
    int start = 0;
    double reference = 0.0;
    bool first = true;
    for (;;) {
      TrainerConfig seg = cfg;
      seg.stop_epoch = std::min(cfg.epochs, start + config.checkpoint_every);
      FlowTrace part = train(problem, net, theta, seg, config.seed, start, reference);
      reference = part.rms_reference;
      const std::size_t skip = first ? 0 : 1;
      if (part.records.size() > skip)
        trace.records.insert(trace.records.end(), part.records.begin() + static_cast<std::ptrdiff_t>(skip),
                             part.records.end());
      trace.seed = part.seed;
      trace.config_hash = part.config_hash;
      trace.energy_surrogate = part.energy_surrogate;
      trace.rms_reference = part.rms_reference;
      trace.theta = part.theta;
      first = false;
      if (part.aborted) {
        trace.aborted = true;
        trace.abort_reason = part.abort_reason;
        break;
      }
      const int reached = part.records.back().epoch;
      save_checkpoint((fs::path(config.out_dir) / (name + "_epoch" + std::to_string(reached) + ".json")).string(),
                      net, part.theta, config.seed, reached);
      if (reached >= cfg.epochs) break;
      theta = part.theta;
      start = reached;
    }
  }
  MethodResult r;
  r.name = name;
  r.final_rel_l2 = trace.records.empty() ? 0.0 : trace.records.back().rel_l2;
  r.trace_path = (fs::path(config.out_dir) / (name + ".csv")).string();
  write_text_file(r.trace_path, trace_csv(trace));
  r.trace = std::move(trace);
  return r;
}

}  // namespace

ComparisonReport run(const RunConfig& config) {
  config.validate();
  const ProblemDef problem = preset(config.preset_name());
  std::filesystem::create_directories(config.out_dir);
  const Network net(problem.net);
  const ParamVec theta0 = init_params(net, config.seed);

  ComparisonReport report;
  report.preset = problem.name;
  report.seed = config.seed;
  report.methods.resize(config.methods.size());
  if (config.parallel_methods && config.methods.size() > 1) {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(config.methods.size());
    for (std::size_t i = 0; i < config.methods.size(); ++i)
      workers.emplace_back([&, i] {
        try {
          report.methods[i] = run_method(config, problem, net, theta0, config.methods[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    for (auto& w : workers) w.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (std::size_t i = 0; i < config.methods.size(); ++i)
      report.methods[i] = run_method(config, problem, net, theta0, config.methods[i]);
  }
  for (const MethodResult& r : report.methods) report.completed = report.completed && !r.trace.aborted;
  report.verdicts = ordering_verdicts(report.methods);
  json j = report.to_json();
  j["config"] = config.to_json();
  write_text_file((std::filesystem::path(config.out_dir) / "report.json").string(), j.dump(2) + "\n");
  return report;
}

std::vector<std::string> emit_plotdata(const ComparisonReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> paths;
  std::ostringstream gp;
  gp << "set datafile separator ','\nset logscale y\nset xlabel 'epoch'\nset ylabel 'relative L2 error'\n"
     << "set title '" << report.preset << "'\nplot ";
  for (std::size_t i = 0; i < report.methods.size(); ++i) {
    const MethodResult& r = report.methods[i];
    std::ostringstream csv;
    csv << "epoch,rel_l2\n";
    char buf[64];
    for (const FlowRecord& rec : r.trace.records) {
      std::snprintf(buf, sizeof buf, "%d,%.17g\n", rec.epoch, rec.rel_l2);
      csv << buf;
    }
    const std::string file = r.name + "_rel_l2.csv";
    const std::string path = (fs::path(out_dir) / file).string();
    write_text_file(path, csv.str());
    paths.push_back(path);
    gp << (i ? ", \\\n     " : "") << "'" << file << "' using 1:2 skip 1 with lines title '" << r.name << "'";
  }
  gp << "\n";
  const std::string gp_path = (fs::path(out_dir) / "plot.gp").string();
  write_text_file(gp_path, gp.str());
  paths.push_back(gp_path);
  return paths;
}

json version_info() {
  return {{"ned", NED_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__},
          {"scalar", "double"}};
}

}  // namespace ned
