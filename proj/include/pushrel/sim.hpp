#pragma once

#include <cstdint>
#include <vector>

#include "pushrel/scene.hpp"

namespace pushrel {

struct SimConfig {
  double dt = 0.05;                  // seconds per step
  int solver_iterations = 20;
  double baumgarte_beta = 0.2;       // positional drift correction gain
  double table_friction_decel = 0.5; // m/s^2, plane friction on free bodies
  double angular_friction_decel = 1.0;  // rad/s^2
  double restitution = 0.0;
  double contact_slop = 2e-4;        // penetration depth tolerated before bias
  double max_speed = 10.0;           // beyond this the solver is deemed divergent

  void validate() const;
};

enum class SceneLayout { Sparse, Dense };

struct SceneGenConfig {
  int n_objects = 9;
  double radius_min = 0.08;
  double radius_max = 0.16;
  SceneLayout layout = SceneLayout::Sparse;
  EnvironmentMode environment_mode = EnvironmentMode::Mixed;
  double joint_probability = 0.5;
  double workspace_half_x = 1.25;  // workspace rectangle is +/- these extents
  double workspace_half_y = 1.25;
  double pusher_radius = 0.03;

  void validate() const;
};

struct PushConfig {
  double speed = 0.1;      // m/s
  double length = 0.30;    // meters of straight-line travel
  int n_candidates = 8;    // candidate approach lines scored per scene
};

// Advances the scene by one step: the pusher moves exactly by
// pusher_velocity*dt, free bodies feel plane friction, contact impulses and
// joint constraint impulses. Throws if any speed exceeds cfg.max_speed.
SceneState step(const SceneState& scene, Vec2 pusher_velocity, const SimConfig& cfg);

// One velocity-constraint solve on `scene` in place (friction and
// integration excluded). Exposed for constraint-level tests.
void solve_joints(SceneState& scene, const SimConfig& cfg);

SceneState generate_scene(const SceneGenConfig& cfg, std::uint64_t seed);

// Straight-line push: picks the best of cfg.n_candidates approach lines by
// how many objects the line would sweep, places the pusher outside all
// objects and returns the per-step velocity commands.
std::vector<Vec2> generate_push(SceneState& scene, const PushConfig& cfg,
                                const SimConfig& sim_cfg, std::uint64_t seed);

Trajectory rollout_ground_truth(const SceneState& scene, const std::vector<Vec2>& controls,
                                const SimConfig& cfg);

double kinetic_energy(const SceneState& scene);

}  // namespace pushrel
