#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pushrel/belief.hpp"
#include "pushrel/predictor.hpp"
#include "pushrel/scene.hpp"
#include "pushrel/sim.hpp"

namespace pushrel {

constexpr std::uint32_t kFormatVersion = 1;

struct Dataset {
  std::vector<Trajectory> trajectories;
  SceneGenConfig gen;
  SimConfig sim;
  PushConfig push;
  std::uint64_t seed = 0;
  std::string split;  // train / val / test

  int size() const { return static_cast<int>(trajectories.size()); }
};

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Physics checkpoint carries the stack sizes, weights and the velocity
// normalization statistics; belief checkpoints carry stack sizes, weights
// and the recurrent width plus the trained variant tag.
void save_predictor(const PredictorNet& net, const std::string& path);
PredictorNet load_predictor(const std::string& path);

void save_belief(const BeliefNet& net, bool one_step_variant, const std::string& path);
struct LoadedBelief {
  BeliefNet net;
  bool one_step_variant = false;
};
LoadedBelief load_belief(const std::string& path);

// Human-readable description of any file this module writes.
std::string describe_file(const std::string& path);

}  // namespace pushrel
