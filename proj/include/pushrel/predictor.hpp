#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pushrel/nn.hpp"
#include "pushrel/scene.hpp"

namespace pushrel {

// Shapes shared by the physics and belief propagation stacks.
struct StackSizes {
  int code_dim = 150;
  std::vector<int> object_encoder_hidden{150, 150, 150};
  std::vector<int> relation_encoder_hidden{100};
  std::vector<int> relation_propagator_hidden{150, 150};
  std::vector<int> object_propagator_hidden{100};
  int prop_steps = 3;

  static StackSizes standard() { return {}; }
  // Small shapes for gradient-check instances.
  static StackSizes tiny(int code_dim = 6, int prop_steps = 2);
};

// A scene view plus the per-pair relation attributes the networks should see.
// Edge gating: when `gate` is set, edges that are neither in contact nor
// carrying a joint attribute are dropped, so far pairs transmit no effect.
struct BatchSample {
  const SceneState* scene = nullptr;
  const std::array<double, 4>* pair_attrs = nullptr;  // pair_count(n) entries
  bool gate = true;
};

struct GraphBatch {
  int n_objects = 0;  // total across samples
  int n_edges = 0;
  Tensor2 object_feats;           // n_objects x 4
  Tensor2 edge_feats;             // n_edges x 11
  std::vector<int> edge_recv;     // global object row per edge
  std::vector<int> edge_send;
  std::vector<int> object_sample;          // sample index per object row
  std::vector<int> sample_offset;          // first object row of each sample
  std::vector<int> sample_edge_offset;     // first edge of each sample
  std::vector<std::uint8_t> controlled;    // per object row
  std::vector<std::vector<int>> incoming;  // edge indices by receiver row
};

GraphBatch build_graph_batch(const std::vector<BatchSample>& samples);

// Encoded codes plus the running propagation state (Eqs. of the stack).
struct PropagationState {
  Tensor2 object_codes;    // N x D
  Tensor2 relation_codes;  // E x D
  Tensor2 effects;         // E x D, zero before the first propagation step
  Tensor2 propagated;      // N x D, zero before the first propagation step
  int step = 0;
};

struct StackCaches {
  MlpCache object_encoder, relation_encoder;
  std::vector<MlpCache> relation_propagator, object_propagator;
};

// Propagation stack: two encoders and two propagators with weights shared
// across propagation steps.
class PropagationStack {
 public:
  PropagationStack() = default;
  PropagationStack(const std::string& name, const StackSizes& sizes);

  void init_glorot(Rng& rng);

  PropagationState encode(const GraphBatch& batch, StackCaches* caches = nullptr) const;
  // Advances the state by one propagation step. Effect aggregation sums each
  // receiver's incoming effect rows in content-sorted order, so results do
  // not depend on object labelling.
  void propagate(PropagationState& state, const GraphBatch& batch,
                 StackCaches* caches = nullptr) const;

  // Runs encode plus prop_steps propagations.
  PropagationState run(const GraphBatch& batch, StackCaches* caches = nullptr) const;

  struct InputGrads {
    Tensor2 edge_features;    // E x 11
    Tensor2 object_features;  // N x 4
  };

  // Backward through run(). effects_grad/propagated_grad are gradients
  // w.r.t. the final state; accumulates parameter gradients and returns the
  // gradients w.r.t. the input features (the belief unroll feeds believed
  // distributions back through the edge attribute columns).
  InputGrads backward(const GraphBatch& batch, const StackCaches& caches,
                      const Tensor2& effects_grad, const Tensor2& propagated_grad);

  void zero_grads();
  void collect_params(std::vector<ParamRef>& out);

  const StackSizes& sizes() const { return sizes_; }

 private:
  StackSizes sizes_;
  Mlp object_encoder_, relation_encoder_, relation_propagator_, object_propagator_;
};

struct VelocityNorm {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> stddev{1.0, 1.0};
};

// Physics predictor: propagation stack plus a linear read-out of per-object
// velocity in normalized target space.
class PredictorNet {
 public:
  PredictorNet() = default;
  explicit PredictorNet(const StackSizes& sizes);

  void init(std::uint64_t seed);

  PropagationStack& stack() { return stack_; }
  const PropagationStack& stack() const { return stack_; }
  Mlp& output_head() { return output_head_; }
  const Mlp& output_head() const { return output_head_; }

  VelocityNorm norm;

  // Normalized-space predictions for every object row.
  Tensor2 forward(const GraphBatch& batch, StackCaches* caches = nullptr,
                  MlpCache* head_cache = nullptr) const;
  void backward(const GraphBatch& batch, const StackCaches& caches,
                const MlpCache& head_cache, const Tensor2& out_grad);

  void zero_grads();
  void collect_params(std::vector<ParamRef>& out);

  int prop_steps() const { return stack_.sizes().prop_steps; }

 private:
  PropagationStack stack_;
  Mlp output_head_;
};

// Velocity prediction (m/s) for each free object; rows for controlled
// objects are zero. The pusher's own next velocity is the command.
std::vector<Vec2> predict_step(const SceneState& scene,
                               const std::vector<JointType>& relations, Vec2 pusher_velocity,
                               const PredictorNet& net);

// Chains predict_step T times, feeding predictions back and recomputing
// displacement and contact features from predicted positions.
Trajectory rollout(const SceneState& scene, const std::vector<JointType>& relations,
                   const std::vector<Vec2>& controls, const PredictorNet& net, int steps,
                   double dt);

std::vector<std::array<double, 4>> hard_attrs(const std::vector<JointType>& relations);

}  // namespace pushrel
