#include "pushrel/scene.hpp"

#include <utility>

#include "pushrel/error.hpp"

namespace pushrel {

const char* joint_type_name(JointType t) {
  switch (t) {
    case JointType::NoJoint: return "no_joint";
    case JointType::Fixed: return "fixed";
    case JointType::Revolute: return "revolute";
    case JointType::Prismatic: return "prismatic";
  }
  return "?";
}

int SceneState::pusher_index() const {
  for (int i = 0; i < object_count(); ++i)
    if (objects[i].controlled) return i;
  return -1;
}

void SceneState::validate() const {
  int n_controlled = 0;
  for (const auto& o : objects) {
    require(o.radius > 0.0, "object radius must be positive");
    if (o.controlled) ++n_controlled;
  }
  require(n_controlled == 1, "scene must have exactly one controlled object");
  const int n = object_count();
  for (const auto& j : joints) {
    require(j.a >= 0 && j.a < n && j.b >= 0 && j.b < n && j.a != j.b,
            "joint indices out of range");
    require(j.kind != JointType::NoJoint, "joint kind must not be NoJoint");
  }
  constexpr double kPenetrationTolerance = 1e-3;
  for (int i = 0; i < n; ++i) {
    if (objects[i].controlled) continue;
    for (int j = i + 1; j < n; ++j) {
      if (objects[j].controlled) continue;
      const double dist = (objects[i].position - objects[j].position).norm();
      const double overlap = objects[i].radius + objects[j].radius - dist;
      require(overlap <= kPenetrationTolerance, "free objects overlap beyond tolerance");
    }
  }
}

JointSpec make_joint(const SceneState& scene, int a, int b, JointType kind, Vec2 anchor,
                     Vec2 axis) {
  JointSpec j;
  j.a = a;
  j.b = b;
  j.kind = kind;
  j.anchor = anchor;
  j.axis = axis.normalized();
  const ObjectState& oa = scene.objects[a];
  const ObjectState& ob = scene.objects[b];
  j.local_a = (anchor - oa.position).rotated(-oa.orientation);
  j.local_b = (anchor - ob.position).rotated(-ob.orientation);
  j.local_axis = j.axis.rotated(-oa.orientation);
  j.rest_angle = oa.orientation - ob.orientation;
  return j;
}

int pair_index(int i, int j, int n) {
  if (i > j) std::swap(i, j);
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

int pair_count(int n) { return n * (n - 1) / 2; }

std::array<double, 4> one_hot(JointType t) {
  std::array<double, 4> a{};
  a[static_cast<int>(t)] = 1.0;
  return a;
}

bool in_contact(const ObjectState& a, const ObjectState& b, double margin) {
  const double dist = (a.position - b.position).norm();
  return dist < a.radius + b.radius + margin;
}

std::vector<JointType> ground_truth_relations(const SceneState& scene) {
  const int n = scene.object_count();
  std::vector<JointType> rel(pair_count(n), JointType::NoJoint);
  for (const auto& j : scene.joints) rel[pair_index(j.a, j.b, n)] = j.kind;
  return rel;
}

RelationGraph build_graph(const SceneState& scene, RelationSource source,
                          const std::vector<JointType>* provided) {
  const int n = scene.object_count();
  std::vector<JointType> rel;
  if (source == RelationSource::GroundTruth) {
    rel = ground_truth_relations(scene);
  } else {
    require(provided != nullptr, "build_graph: provided relations missing");
    require(static_cast<int>(provided->size()) == pair_count(n),
            "build_graph: provided assignment must cover all " +
                std::to_string(pair_count(n)) + " pairs, got " +
                std::to_string(provided->size()));
    rel = *provided;
  }

  RelationGraph g;
  g.n_objects = n;
  g.edges.reserve(static_cast<std::size_t>(n) * (n - 1));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      RelationEdge e;
      e.receiver = i;
      e.sender = j;
      e.type_attr = one_hot(rel[pair_index(i, j, n)]);
      e.contact = in_contact(scene.objects[i], scene.objects[j]);
      g.edges.push_back(e);
    }
  }
  return g;
}

void edge_features(const RelationEdge& edge, const SceneState& scene, double* out) {
  const ObjectState& recv = scene.objects[edge.receiver];
  const ObjectState& send = scene.objects[edge.sender];
  const Vec2 d = recv.position - send.position;
  const Vec2 s = recv.velocity - send.velocity;
  out[0] = d.x;
  out[1] = d.y;
  out[2] = s.x;
  out[3] = s.y;
  for (int k = 0; k < 4; ++k) out[4 + k] = edge.type_attr[k];
  out[8] = recv.radius;
  out[9] = send.radius;
  out[10] = edge.contact ? 1.0 : 0.0;
}

void object_features(const ObjectState& obj, double* out) {
  out[0] = obj.velocity.x;
  out[1] = obj.velocity.y;
  out[2] = obj.radius;
  out[3] = obj.controlled ? 1.0 : 0.0;
}

}  // namespace pushrel
