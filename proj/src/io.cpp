#include "ned/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ned {

using nlohmann::json;

namespace {

std::string arch_name(Architecture a) {
  switch (a) {
    case Architecture::constant: return "constant";
    case Architecture::fnn: return "fnn";
    case Architecture::resnet: return "resnet";
  }
  return "?";
}

Architecture arch_from(const std::string& s) {
  if (s == "constant") return Architecture::constant;
  if (s == "fnn") return Architecture::fnn;
  if (s == "resnet") return Architecture::resnet;
  throw std::invalid_argument("unknown architecture '" + s + "'");
}

json vec(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

json spec_to_json(const NetworkSpec& spec) {
  json j;
  j["input_dim"] = spec.input_dim;
  j["arch"] = arch_name(spec.arch);
  j["widths"] = spec.widths;
  json acts = json::array();
  for (Activation a : spec.activations) acts.push_back(std::string(to_string(a)));
  j["activations"] = acts;
  j["blocks"] = spec.blocks;
  j["block_width"] = spec.block_width;
  j["block_activation"] = std::string(to_string(spec.block_activation));
  j["output_dim"] = spec.output_dim;
  if (spec.ansatz) {
    if (spec.ansatz->kind == "custom") throw std::invalid_argument("spec_to_json: custom ansatz is not serializable");
    j["ansatz"] = {{"kind", spec.ansatz->kind}, {"params", spec.ansatz->params}};
  } else {
    j["ansatz"] = nullptr;
  }
  return j;
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec s;
  s.input_dim = j.at("input_dim").get<int>();
  s.arch = arch_from(j.at("arch").get<std::string>());
  s.widths = j.at("widths").get<std::vector<int>>();
  s.activations.clear();
  for (const auto& a : j.at("activations")) s.activations.push_back(activation_from_string(a.get<std::string>()));
  s.blocks = j.value("blocks", 0);
  s.block_width = j.value("block_width", 0);
  s.block_activation = activation_from_string(j.value("block_activation", std::string("relu3")));
  s.output_dim = j.value("output_dim", 1);
  if (j.contains("ansatz") && !j.at("ansatz").is_null())
    s.ansatz = make_ansatz(j.at("ansatz").at("kind").get<std::string>(),
                           j.at("ansatz").at("params").get<std::vector<double>>());
  s.validate();
  return s;
}

json layout_to_json(const ParamLayout& layout) {
  json blocks = json::array();
  for (const ParamBlock& b : layout.blocks)
    blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"rows", b.rows}, {"cols", b.cols}});
  return {{"size", layout.size}, {"blocks", blocks}};
}

json checkpoint_to_json(const Network& net, const ParamVec& theta, std::uint64_t seed, int epoch) {
  net.check(theta);
  // nlohmann writes doubles with the shortest text that parses back exactly
  return {{"spec", spec_to_json(net.spec())},
          {"layout", layout_to_json(net.layout())},
          {"params", vec(theta.values)},
          {"seed", seed},
          {"epoch", epoch}};
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint ck;
  ck.spec = spec_from_json(j.at("spec"));
  const auto p = j.at("params").get<std::vector<double>>();
  ck.params = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
  ck.seed = j.at("seed").get<std::uint64_t>();
  ck.epoch = j.at("epoch").get<int>();
  const Network net(ck.spec);
  if (ck.params.size() != net.num_params())
    throw std::invalid_argument("checkpoint: " + std::to_string(ck.params.size()) + " parameters, spec needs " +
                                std::to_string(net.num_params()));
  if (j.contains("layout") && j.at("layout").at("size").get<Eigen::Index>() != net.num_params())
    throw std::invalid_argument("checkpoint: layout size does not match spec");
  return ck;
}

void save_checkpoint(const std::string& path, const Network& net, const ParamVec& theta, std::uint64_t seed,
                     int epoch) {
  write_text_file(path, checkpoint_to_json(net, theta, seed, epoch).dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(read_json_file(path)); }

std::pair<Network, ParamVec> restore(const Checkpoint& ck) {
  Network net(ck.spec);
  ParamVec theta{ck.params, net.layout_ptr()};
  return {std::move(net), std::move(theta)};
}

json preset_to_json(const ProblemDef& p) {
  json j;
  j["name"] = p.name;
  j["kind"] = p.kind == ProblemKind::supervised ? "supervised" : "pde_steady";
  j["lo"] = vec(p.lo);
  j["hi"] = vec(p.hi);
  j["source_linear"] = p.source_linear;
  j["samples"] = p.samples;
  j["boundary_samples"] = p.boundary_samples;
  j["epochs"] = p.epochs;
  j["tau0_ned"] = p.tau0_ned;
  j["tau0_sgd"] = p.tau0_sgd;
  j["rel_tol"] = p.rel_tol;
  j["eval_points"] = p.eval_points;
  j["net"] = spec_to_json(p.net);
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace ned
