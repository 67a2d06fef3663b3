// JSON checkpoints and preset dumps.
#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ned/net.hpp"
#include "ned/problems.hpp"

namespace ned {

struct Checkpoint {
  NetworkSpec spec;
  Vector params;
  std::uint64_t seed = 0;
  int epoch = 0;
};

nlohmann::json spec_to_json(const NetworkSpec& spec);
/// Rebuilds registered ansätze by kind; a "custom" ansatz cannot be restored.
NetworkSpec spec_from_json(const nlohmann::json& j);

nlohmann::json layout_to_json(const ParamLayout& layout);

/// {spec, layout, params, seed, epoch}; parameters are written so that they
/// parse back to the same doubles.
nlohmann::json checkpoint_to_json(const Network& net, const ParamVec& theta, std::uint64_t seed, int epoch);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::string& path, const Network& net, const ParamVec& theta, std::uint64_t seed,
                     int epoch);
Checkpoint load_checkpoint(const std::string& path);

/// Network and ParamVec for a loaded checkpoint.
std::pair<Network, ParamVec> restore(const Checkpoint& ck);

/// Everything that identifies a preset: domain, hyperparameters, network.
nlohmann::json preset_to_json(const ProblemDef& p);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace ned
