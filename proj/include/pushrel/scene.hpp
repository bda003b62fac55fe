#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pushrel/geom.hpp"

namespace pushrel {

// Bumped whenever the network-facing feature layout changes. Stamped into
// datasets and checkpoints; mismatching stamps are rejected at load time.
constexpr std::uint32_t kFeatureLayoutVersion = 1;

constexpr int kNumJointTypes = 4;
constexpr int kObjectFeatureWidth = 4;   // [vx, vy, radius, controlled]
constexpr int kEdgeFeatureWidth = 11;    // [dx, dy, sx, sy, type onehot x4, r_recv, r_send, contact]

// Surface gap below which the contact flag of an edge is set.
constexpr double kContactMargin = 0.005;

enum class JointType : int { NoJoint = 0, Fixed = 1, Revolute = 2, Prismatic = 3 };

const char* joint_type_name(JointType t);

struct ObjectState {
  Vec2 position;
  Vec2 velocity;
  double orientation = 0.0;       // simulator-internal, never fed to networks
  double angular_velocity = 0.0;
  double radius = 0.0;
  bool controlled = false;        // true only for the pusher
};

struct JointSpec {
  int a = 0;
  int b = 0;
  JointType kind = JointType::Fixed;
  Vec2 anchor;  // world frame at creation
  Vec2 axis;    // unit vector, prismatic only

  // Creation-time constants the constraint solver measures drift against.
  Vec2 local_a;      // anchor in body a's frame
  Vec2 local_b;      // anchor in body b's frame
  Vec2 local_axis;   // axis in body a's frame
  double rest_angle = 0.0;  // orientation_a - orientation_b at creation
};

struct SceneState {
  std::vector<ObjectState> objects;
  std::vector<JointSpec> joints;
  int time = 0;

  int pusher_index() const;
  int object_count() const { return static_cast<int>(objects.size()); }
  // Throws if invariants are violated (exactly one pusher, indices in range,
  // positive radii, free-pair penetration above tolerance).
  void validate() const;
};

// Fills the creation-time locals of `joint` from the current poses in `scene`.
JointSpec make_joint(const SceneState& scene, int a, int b, JointType kind, Vec2 anchor,
                     Vec2 axis = {1.0, 0.0});

enum class EnvironmentMode { FixedOnly, Mixed };

struct Trajectory {
  std::vector<SceneState> states;   // length T+1
  std::vector<Vec2> controls;       // length T, pusher velocity commands
  double dt = 0.05;
  EnvironmentMode environment_mode = EnvironmentMode::Mixed;

  int step_count() const { return static_cast<int>(controls.size()); }
};

// Canonical index of the unordered pair {i, j} with i < j among n objects.
int pair_index(int i, int j, int n);
int pair_count(int n);

// Directed edge. Displacement and velocity difference are always recomputed
// from the scene when features are built, never cached here.
struct RelationEdge {
  int receiver = 0;  // i
  int sender = 0;    // j
  std::array<double, 4> type_attr{};  // one-hot for hard types, soft for beliefs
  bool contact = false;
};

struct RelationGraph {
  int n_objects = 0;
  std::vector<RelationEdge> edges;  // all ordered pairs, receiver-major

  int edge_count() const { return static_cast<int>(edges.size()); }
};

std::array<double, 4> one_hot(JointType t);

enum class RelationSource { GroundTruth, Provided };

// Builds the fully connected directed graph over all objects including the
// pusher. With RelationSource::Provided, `provided` must cover every
// unordered pair (canonical pair order).
RelationGraph build_graph(const SceneState& scene, RelationSource source,
                          const std::vector<JointType>* provided = nullptr);

// Per-pair joint types from the ground-truth joint list.
std::vector<JointType> ground_truth_relations(const SceneState& scene);

// Writes the 11-wide edge feature row for `edge` into out[0..10].
void edge_features(const RelationEdge& edge, const SceneState& scene, double* out);
// Writes the 4-wide object feature row into out[0..3].
void object_features(const ObjectState& obj, double* out);

bool in_contact(const ObjectState& a, const ObjectState& b, double margin = kContactMargin);

}  // namespace pushrel
