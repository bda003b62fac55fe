#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pushrel/belief.hpp"
#include "pushrel/scene.hpp"

namespace pushrel {

enum class BaselineKind {
  PropNetGT,      // ground-truth relations
  PropNetF,       // fixed joint for every close pair
  PropNetN,       // no joints anywhere
  BeliefOneStep,  // relations from the latest observation only
  BeliefFull,     // relations from the accumulated belief
};

const char* baseline_name(BaselineKind k);
std::optional<BaselineKind> baseline_from_name(const std::string& name);
bool baseline_needs_belief(BaselineKind k);

// Surface gap below which PropNetF declares a pair fixed.
constexpr double kFixedHeuristicGap = 0.025;

// Per-pair relation assignment for a baseline at the current instant.
// `belief` must be present exactly for the belief-driven baselines.
std::vector<JointType> assign_relations(const SceneState& scene, BaselineKind kind,
                                        const BeliefState* belief = nullptr);

}  // namespace pushrel
