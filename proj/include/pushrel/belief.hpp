#pragma once

#include <cstdint>
#include <vector>

#include "pushrel/predictor.hpp"

namespace pushrel {

// Relation-inference network: its own propagation stack feeds each directed
// edge's final effect into a recurrent cell; a linear head over the hidden
// state classifies the pair's joint type.
class BeliefNet {
 public:
  BeliefNet() = default;
  explicit BeliefNet(const StackSizes& sizes, int recurrent_hidden = 100);

  void init(std::uint64_t seed);

  PropagationStack& stack() { return stack_; }
  const PropagationStack& stack() const { return stack_; }
  Lstm& cell() { return cell_; }
  const Lstm& cell() const { return cell_; }
  Mlp& classifier() { return classifier_; }
  const Mlp& classifier() const { return classifier_; }

  int recurrent_hidden() const { return cell_.spec().hidden_dim; }

  void zero_grads();
  void collect_params(std::vector<ParamRef>& out);

 private:
  PropagationStack stack_;
  Lstm cell_;       // code_dim -> hidden
  Mlp classifier_;  // hidden -> 4, linear
};

// Per-unordered-pair recurrent state and joint-type distribution. The
// per-object slot mirrors the stack's object path; no object attribute is
// inferred from it yet.
struct BeliefState {
  int n_objects = 0;
  Tensor2 hidden;         // n_pairs x H
  Tensor2 cell;           // n_pairs x H
  Tensor2 dist;           // n_pairs x 4, each row sums to 1
  Tensor2 object_hidden;  // n_objects x H, reserved
  int time = 0;

  int pair_rows() const { return dist.rows; }
};

// Uniform prior, zero recurrent state.
BeliefState initial_belief(int n_objects, int hidden_width = 100, int time = 0);

// One observation update: consumes the transition from prev to cur (object
// velocities are finite-differenced from positions), feeds the believed
// distributions back as soft relation attributes, and returns the updated
// belief. Throws unless cur.time == prev.time + 1 == state.time + 1.
BeliefState belief_step(const BeliefState& state, const SceneState& prev,
                        const SceneState& cur, double dt, const BeliefNet& net);

// Same network evaluated from a zeroed recurrent state: the no-history
// variant. Stateless; identical inputs give identical outputs.
Tensor2 one_step_belief(const SceneState& prev, const SceneState& cur, double dt,
                        const BeliefNet& net);

// Argmax per pair; exact ties resolve to the lowest type index, so an
// all-uniform row yields NoJoint.
std::vector<JointType> classify_relations(const BeliefState& state);
std::vector<JointType> classify_distribution(const Tensor2& dist);

// Folds belief_step over states[0..upto]; element t of the result is the
// belief after observing the transition into state t.
std::vector<BeliefState> belief_history(const Trajectory& traj, int upto_step,
                                        const BeliefNet& net);

// Belief regulation composed with the physics predictor: infer relations
// from the observed prefix, then roll the remainder out with them hardened.
struct RegulatedRollout {
  std::vector<JointType> relations;
  Trajectory predicted;
};
RegulatedRollout regulated_rollout(const std::vector<SceneState>& history, double dt,
                                   const std::vector<Vec2>& remaining_controls, int steps,
                                   const PredictorNet& predictor, const BeliefNet& belief);

// ---- training-side machinery ----

struct BeliefLossWindow {
  int lo = 50;
  int hi = 100;
};

struct BeliefBatchStats {
  double loss = 0.0;  // mean cross-entropy over counted (step, pair) cells
  long counted = 0;
};

// Unrolls the belief over seq_len observations of each trajectory (holding
// the final state when a trajectory is shorter; padded steps are masked from
// the loss), accumulates parameter gradients by backpropagation through
// time (including through the fed-back distributions), and returns the
// window loss. With one_step set, the recurrent state is zeroed before every
// step. bptt_truncate > 0 stops the backward sweep that many steps below the
// loss window; 0 backpropagates to the first observation.
BeliefBatchStats belief_train_batch(BeliefNet& net,
                                    const std::vector<const Trajectory*>& batch, int seq_len,
                                    BeliefLossWindow window, bool one_step,
                                    int bptt_truncate = 0);

// Forward-only variant of the same unroll; returns the final distributions
// per trajectory.
std::vector<Tensor2> belief_eval_batch(const BeliefNet& net,
                                       const std::vector<const Trajectory*>& batch,
                                       int seq_len, bool one_step);

}  // namespace pushrel
