#pragma once

#include <map>
#include <string>
#include <vector>

#include "pushrel/config.hpp"
#include "pushrel/metrics.hpp"

namespace pushrel {

struct ExperimentConfig {
  std::string dataset_path;
  std::string physics_checkpoint;
  std::string belief_checkpoint;        // required iff belief_full is evaluated
  std::string belief_1step_checkpoint;  // required iff belief_1step is evaluated
  EvalJob eval;
  std::string out_dir;
  std::string tag = "results";
};

struct ExperimentResult {
  // error_cm[baseline][timepoint] lists one value per trajectory, in
  // trajectory order.
  std::map<BaselineKind, std::map<int, std::vector<double>>> error_cm;
  // raw/equivalence accuracy per trajectory per observation step (full belief).
  std::vector<std::vector<AccuracyPoint>> accuracy_curves;
  std::vector<int> timepoints;
};

// Evaluates every (trajectory, baseline, timepoint) cell of the comparison
// protocol: regulate the belief on the observed prefix, predict the
// remainder, and score it against the simulator's ground truth. Writes
// <tag>_results.csv, <tag>_summary.csv, <tag>_accuracy.csv and SVG plots
// into out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace pushrel
