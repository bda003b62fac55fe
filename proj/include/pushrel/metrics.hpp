#pragma once

#include <vector>

#include "pushrel/scene.hpp"
#include "pushrel/tensor.hpp"

namespace pushrel {

// Mean Euclidean position error over free objects and compared time steps
// (the shared initial state is excluded), in centimeters.
double trajectory_error_cm(const Trajectory& predicted, const Trajectory& ground_truth);

// Trajectory in which nothing but the pusher ever moves; the no-dynamics
// reference for predictor efficacy checks.
Trajectory static_world_trajectory(const SceneState& start, const std::vector<Vec2>& controls,
                                   double dt);

struct AccuracyPoint {
  double raw = 0.0;          // fraction of free-object pairs exactly correct
  double equivalence = 0.0;  // fixed/no-joint confusions inside matching rigid
                             // groups counted correct
};

// Accuracy of one per-pair classification against a scene's ground truth.
// Pairs involving the pusher are excluded.
AccuracyPoint relation_accuracy(const std::vector<JointType>& predicted,
                                const SceneState& scene);

// Accuracy after each observation step, given per-step distributions.
std::vector<AccuracyPoint> relation_accuracy_curve(const std::vector<Tensor2>& dists,
                                                   const SceneState& scene);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;       // population std
  double stderr_mean = 0.0;  // std / sqrt(n)
  long n = 0;
};

MeanStd mean_std(const std::vector<double>& values);

}  // namespace pushrel
