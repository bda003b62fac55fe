#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pushrel/belief.hpp"
#include "pushrel/io.hpp"
#include "pushrel/predictor.hpp"

namespace pushrel {

struct TrainConfig {
  int batch_size = 64;
  double lr = 1e-3;
  double decay_factor = 0.8;
  int patience = 20;                 // validation checks without improvement
  int max_epochs = 500;
  double physics_epoch_fraction = 0.5;  // share of shuffled samples used per epoch
  int belief_batches_per_epoch = 100;
  int belief_batch_size = 64;        // trajectories per belief batch
  int sequence_length = 100;
  int loss_window_lo = 50;
  int loss_window_hi = 100;
  int validate_every = 1;            // epochs between validation checks
  // Physics training perturbs free-object positions and velocities with
  // Gaussian noise and re-simulates the one-step target from the perturbed
  // state. Chained rollouts drift off the clean-state manifold (most
  // notably, the kinematic pusher penetrates a lagging disc), so the model
  // must be trained on how the world reacts from such states.
  double position_noise = 0.005;  // meters
  double velocity_noise = 0.003;  // m/s
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_score = 0.0;  // rollout error (m) or 1 - accuracy
  double lr = 0.0;
};

struct TrainReport {
  std::vector<EpochRow> rows;
  int best_epoch = 0;
  double best_score = 0.0;
};

void write_report_csv(const TrainReport& report, const std::string& path);

// Mean Euclidean position error (meters) of ground-truth-relation rollouts
// over the validation set; pooled over trajectories, steps and free objects.
double evaluate_validation(const PredictorNet& net, const Dataset& validation);
// 1 - mean final-step relation accuracy over the validation set.
double evaluate_validation(const BeliefNet& net, const Dataset& validation, int sequence_length,
                           bool one_step);

struct PhysicsTrainResult {
  PredictorNet net;
  TrainReport report;
};

// Single-step velocity regression against ground-truth relations; per-epoch
// validation on full rollouts selects the returned parameters.
PhysicsTrainResult train_physics(const Dataset& train, const Dataset& validation,
                                 const TrainConfig& cfg);

struct BeliefTrainResult {
  BeliefNet net;
  TrainReport report;
  bool one_step_variant = false;
};

BeliefTrainResult train_belief(const Dataset& train, const Dataset& validation,
                               const TrainConfig& cfg, bool one_step_variant);

}  // namespace pushrel
