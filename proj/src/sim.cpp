#include "pushrel/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "pushrel/error.hpp"
#include "pushrel/rng.hpp"

namespace pushrel {

namespace {

constexpr double kDensity = 1.0;          // kg/m^2, uniform discs
constexpr double kContactDetectMargin = 0.03;  // speculative contact band

struct Body {
  Vec2 p, v;
  double theta = 0.0, omega = 0.0;
  double radius = 0.0;
  double inv_mass = 0.0, inv_inertia = 0.0;
  bool kinematic = false;
};

std::vector<Body> make_bodies(const SceneState& scene) {
  std::vector<Body> bodies(scene.objects.size());
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const ObjectState& o = scene.objects[i];
    Body& b = bodies[i];
    b.p = o.position;
    b.v = o.velocity;
    b.theta = o.orientation;
    b.omega = o.angular_velocity;
    b.radius = o.radius;
    b.kinematic = o.controlled;
    if (!b.kinematic) {
      const double mass = kDensity * std::numbers::pi * o.radius * o.radius;
      b.inv_mass = 1.0 / mass;
      b.inv_inertia = 2.0 / (mass * o.radius * o.radius);
    }
  }
  return bodies;
}

struct Contact {
  int a, b;
  Vec2 normal;      // from b to a
  double gap;       // signed surface distance, negative when penetrating
  double accum = 0.0;
};

struct JointWork {
  const JointSpec* spec;
  Vec2 r_a, r_b;     // world anchor arms at step start
  Vec2 axis, tangent;  // prismatic only, world frame
  double perp_error = 0.0;
  Vec2 anchor_error;
  double angle_error = 0.0;
};

std::vector<Contact> find_contacts(const std::vector<Body>& bodies) {
  std::vector<Contact> contacts;
  const int n = static_cast<int>(bodies.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (bodies[i].kinematic && bodies[j].kinematic) continue;
      const Vec2 d = bodies[i].p - bodies[j].p;
      const double dist = d.norm();
      const double gap = dist - bodies[i].radius - bodies[j].radius;
      if (gap < kContactDetectMargin && dist > 1e-12) {
        contacts.push_back({i, j, d * (1.0 / dist), gap, 0.0});
      }
    }
  }
  return contacts;
}

std::vector<JointWork> prepare_joints(const std::vector<Body>& bodies,
                                      const std::vector<JointSpec>& joints) {
  std::vector<JointWork> work;
  work.reserve(joints.size());
  for (const auto& j : joints) {
    JointWork w;
    w.spec = &j;
    const Body& a = bodies[j.a];
    const Body& b = bodies[j.b];
    w.r_a = j.local_a.rotated(a.theta);
    w.r_b = j.local_b.rotated(b.theta);
    w.anchor_error = (a.p + w.r_a) - (b.p + w.r_b);
    w.angle_error = (a.theta - b.theta) - j.rest_angle;
    if (j.kind == JointType::Prismatic) {
      w.axis = j.local_axis.rotated(a.theta);
      w.tangent = w.axis.perp();
      const Vec2 d = (b.p + w.r_b) - (a.p + w.r_a);
      w.perp_error = w.tangent.dot(d);
    }
    work.push_back(w);
  }
  return work;
}

void solve_contact(std::vector<Body>& bodies, Contact& c, const SimConfig& cfg) {
  Body& a = bodies[c.a];
  Body& b = bodies[c.b];
  const double inv_mass_sum = a.inv_mass + b.inv_mass;
  if (inv_mass_sum <= 0.0) return;
  const double v_n = c.normal.dot(a.v - b.v);
  // Speculative when separated: allow closing exactly to touch. Baumgarte
  // push-out when penetrating beyond the slop.
  double target = 0.0;
  if (c.gap > 0.0) {
    target = -c.gap / cfg.dt;
  } else if (-c.gap > cfg.contact_slop) {
    target = cfg.baumgarte_beta / cfg.dt * (-c.gap - cfg.contact_slop);
  }
  const double lambda = (target - v_n) / inv_mass_sum;
  const double new_accum = std::max(0.0, c.accum + lambda);
  const double delta = new_accum - c.accum;
  c.accum = new_accum;
  a.v += delta * a.inv_mass * c.normal;
  b.v -= delta * b.inv_mass * c.normal;
}

void solve_anchor(std::vector<Body>& bodies, const JointWork& w, const SimConfig& cfg) {
  Body& a = bodies[w.spec->a];
  Body& b = bodies[w.spec->b];
  const Vec2 v_rel = (a.v + a.omega * w.r_a.perp()) - (b.v + b.omega * w.r_b.perp());
  const Vec2 bias = (cfg.baumgarte_beta / cfg.dt) * w.anchor_error;
  const Vec2 rhs = -(v_rel + bias);

  const double im = a.inv_mass + b.inv_mass;
  const double k11 = im + a.inv_inertia * w.r_a.y * w.r_a.y + b.inv_inertia * w.r_b.y * w.r_b.y;
  const double k12 = -a.inv_inertia * w.r_a.x * w.r_a.y - b.inv_inertia * w.r_b.x * w.r_b.y;
  const double k22 = im + a.inv_inertia * w.r_a.x * w.r_a.x + b.inv_inertia * w.r_b.x * w.r_b.x;
  const double det = k11 * k22 - k12 * k12;
  if (std::abs(det) < 1e-12) return;
  const Vec2 impulse{(k22 * rhs.x - k12 * rhs.y) / det, (k11 * rhs.y - k12 * rhs.x) / det};

  a.v += a.inv_mass * impulse;
  a.omega += a.inv_inertia * w.r_a.cross(impulse);
  b.v -= b.inv_mass * impulse;
  b.omega -= b.inv_inertia * w.r_b.cross(impulse);
}

void solve_relative_rotation(std::vector<Body>& bodies, const JointWork& w,
                             const SimConfig& cfg) {
  Body& a = bodies[w.spec->a];
  Body& b = bodies[w.spec->b];
  const double k = a.inv_inertia + b.inv_inertia;
  if (k <= 0.0) return;
  const double v_rel = a.omega - b.omega;
  const double bias = cfg.baumgarte_beta / cfg.dt * w.angle_error;
  const double lambda = -(v_rel + bias) / k;
  a.omega += a.inv_inertia * lambda;
  b.omega -= b.inv_inertia * lambda;
}

void solve_prismatic_perp(std::vector<Body>& bodies, const JointWork& w,
                          const SimConfig& cfg) {
  Body& a = bodies[w.spec->a];
  Body& b = bodies[w.spec->b];
  const Vec2 d = (b.p + w.r_b) - (a.p + w.r_a);
  const Vec2 ra_d = w.r_a + d;
  const double j_wa = ra_d.cross(w.tangent);  // -((r_a + d) x t) enters with -omega_a
  const double j_wb = w.r_b.cross(w.tangent);
  const double v_rel = w.tangent.dot(b.v - a.v) + j_wb * b.omega - j_wa * a.omega;
  const double k = a.inv_mass + b.inv_mass + a.inv_inertia * j_wa * j_wa +
                   b.inv_inertia * j_wb * j_wb;
  if (k <= 0.0) return;
  const double bias = cfg.baumgarte_beta / cfg.dt * w.perp_error;
  const double lambda = -(v_rel + bias) / k;
  a.v -= a.inv_mass * lambda * w.tangent;
  a.omega -= a.inv_inertia * j_wa * lambda;
  b.v += b.inv_mass * lambda * w.tangent;
  b.omega += b.inv_inertia * j_wb * lambda;
}

void solve_joint(std::vector<Body>& bodies, const JointWork& w, const SimConfig& cfg) {
  switch (w.spec->kind) {
    case JointType::Fixed:
      solve_relative_rotation(bodies, w, cfg);
      solve_anchor(bodies, w, cfg);
      break;
    case JointType::Revolute:
      solve_anchor(bodies, w, cfg);
      break;
    case JointType::Prismatic:
      solve_relative_rotation(bodies, w, cfg);
      solve_prismatic_perp(bodies, w, cfg);
      break;
    case JointType::NoJoint:
      break;
  }
}

// Half-step friction kick; clamps exactly to zero at low speed.
void friction_half_kick(std::vector<Body>& bodies, const SimConfig& cfg) {
  const double dv = 0.5 * cfg.table_friction_decel * cfg.dt;
  const double dw = 0.5 * cfg.angular_friction_decel * cfg.dt;
  for (auto& b : bodies) {
    if (b.kinematic) continue;
    const double speed = b.v.norm();
    b.v = speed <= dv ? Vec2{} : b.v * ((speed - dv) / speed);
    const double sp = std::abs(b.omega);
    b.omega = sp <= dw ? 0.0 : b.omega * ((sp - dw) / sp);
  }
}

void write_back(const std::vector<Body>& bodies, SceneState& scene) {
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    ObjectState& o = scene.objects[i];
    o.position = bodies[i].p;
    o.velocity = bodies[i].v;
    o.orientation = bodies[i].theta;
    o.angular_velocity = bodies[i].omega;
  }
}

}  // namespace

void SimConfig::validate() const {
  require(dt > 0.0, "dt must be positive");
  require(solver_iterations >= 1, "solver_iterations must be >= 1");
  require(baumgarte_beta >= 0.0 && baumgarte_beta <= 1.0, "baumgarte_beta must be in [0, 1]");
}

void solve_joints(SceneState& scene, const SimConfig& cfg) {
  cfg.validate();
  auto bodies = make_bodies(scene);
  auto joints = prepare_joints(bodies, scene.joints);
  for (int it = 0; it < cfg.solver_iterations; ++it)
    for (auto& w : joints) solve_joint(bodies, w, cfg);
  write_back(bodies, scene);
}

SceneState step(const SceneState& scene, Vec2 pusher_velocity, const SimConfig& cfg) {
  cfg.validate();
  SceneState next = scene;
  auto bodies = make_bodies(next);

  friction_half_kick(bodies, cfg);
  for (auto& b : bodies)
    if (b.kinematic) b.v = pusher_velocity;

  auto contacts = find_contacts(bodies);
  auto joints = prepare_joints(bodies, next.joints);
  for (int it = 0; it < cfg.solver_iterations; ++it) {
    // Interleaved symmetric sweeps; contact/joint networks under a pushing
    // kinematic body converge poorly with one-directional passes.
    for (auto& c : contacts) solve_contact(bodies, c, cfg);
    for (auto& w : joints) solve_joint(bodies, w, cfg);
    for (auto& c : contacts) solve_contact(bodies, c, cfg);
    for (auto it2 = joints.rbegin(); it2 != joints.rend(); ++it2)
      solve_joint(bodies, *it2, cfg);
    for (auto& c : contacts) solve_contact(bodies, c, cfg);
    for (auto& w : joints) solve_joint(bodies, w, cfg);
  }

  for (auto& b : bodies) {
    b.p += b.v * cfg.dt;
    b.theta += b.omega * cfg.dt;
  }
  friction_half_kick(bodies, cfg);

  for (std::size_t i = 0; i < bodies.size(); ++i) {
    if (bodies[i].v.norm() > cfg.max_speed) {
      fail("solver divergence at time step " + std::to_string(scene.time) + ", object " +
           std::to_string(i));
    }
  }

  write_back(bodies, next);
  next.time = scene.time + 1;
  return next;
}

Trajectory rollout_ground_truth(const SceneState& scene, const std::vector<Vec2>& controls,
                                const SimConfig& cfg) {
  Trajectory traj;
  traj.dt = cfg.dt;
  traj.states.reserve(controls.size() + 1);
  traj.states.push_back(scene);
  traj.controls = controls;
  for (const Vec2& u : controls) traj.states.push_back(step(traj.states.back(), u, cfg));
  return traj;
}

double kinetic_energy(const SceneState& scene) {
  double e = 0.0;
  for (const auto& o : scene.objects) {
    if (o.controlled) continue;
    const double mass = kDensity * std::numbers::pi * o.radius * o.radius;
    const double inertia = 0.5 * mass * o.radius * o.radius;
    e += 0.5 * mass * o.velocity.norm_sq() +
         0.5 * inertia * o.angular_velocity * o.angular_velocity;
  }
  return e;
}

void SceneGenConfig::validate() const {
  require(n_objects >= 1, "n_objects must be >= 1");
  require(radius_min > 0.0 && radius_max >= radius_min, "bad radius range");
  require(joint_probability >= 0.0 && joint_probability <= 1.0,
          "joint_probability must be in [0, 1]");
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

JointType sample_joint_kind(EnvironmentMode mode, Rng& rng) {
  if (mode == EnvironmentMode::FixedOnly) return JointType::Fixed;
  switch (rng.pick(3)) {
    case 0: return JointType::Fixed;
    case 1: return JointType::Revolute;
    default: return JointType::Prismatic;
  }
}

bool overlaps_any(const SceneState& scene, Vec2 p, double r, int upto) {
  for (int k = 0; k < upto; ++k) {
    const auto& o = scene.objects[k];
    if ((o.position - p).norm() < o.radius + r) return true;
  }
  return false;
}

SceneState generate_sparse(const SceneGenConfig& cfg, Rng& rng) {
  SceneState scene;
  scene.objects.resize(cfg.n_objects + 1);

  // Partition objects into chains of up to 3; chain edges become joints.
  std::vector<std::vector<int>> groups;
  for (int i = 0; i < cfg.n_objects;) {
    std::vector<int> group{i++};
    while (static_cast<int>(group.size()) < 3 && i < cfg.n_objects &&
           rng.chance(cfg.joint_probability)) {
      group.push_back(i++);
    }
    groups.push_back(group);
  }

  for (const auto& group : groups) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      // Tentatively place the whole chain, first member anywhere inside the
      // workspace, each next member at a small gap from the previous one.
      std::vector<ObjectState> members(group.size());
      bool ok = true;
      for (std::size_t m = 0; m < group.size(); ++m) {
        ObjectState& o = members[m];
        o.radius = rng.uniform(cfg.radius_min, cfg.radius_max);
        if (m == 0) {
          o.position.x = rng.uniform(-cfg.workspace_half_x + o.radius,
                                     cfg.workspace_half_x - o.radius);
          o.position.y = rng.uniform(-cfg.workspace_half_y + o.radius,
                                     cfg.workspace_half_y - o.radius);
        } else {
          const ObjectState& prev = members[m - 1];
          const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
          const double gap = rng.uniform(0.01, 0.03);
          o.position = prev.position +
                       Vec2{std::cos(angle), std::sin(angle)} * (prev.radius + o.radius + gap);
          if (std::abs(o.position.x) > cfg.workspace_half_x - o.radius ||
              std::abs(o.position.y) > cfg.workspace_half_y - o.radius) {
            ok = false;
            break;
          }
          for (std::size_t q = 0; q + 1 < m; ++q) {
            if ((members[q].position - o.position).norm() <
                members[q].radius + o.radius + 0.005) {
              ok = false;
              break;
            }
          }
          if (!ok) break;
        }
      }
      if (!ok) continue;
      bool clash = false;
      for (const auto& m : members) {
        if (overlaps_any(scene, m.position, m.radius + 0.005, group[0])) {
          clash = true;
          break;
        }
      }
      if (clash) continue;
      for (std::size_t m = 0; m < group.size(); ++m) scene.objects[group[m]] = members[m];
      placed = true;
    }
    require(placed, "sparse placement failed after 1000 rejection attempts");
  }

  for (const auto& group : groups) {
    for (std::size_t m = 0; m + 1 < group.size(); ++m) {
      const int a = group[m], b = group[m + 1];
      const Vec2 anchor = (scene.objects[a].position + scene.objects[b].position) * 0.5;
      const Vec2 axis = (scene.objects[b].position - scene.objects[a].position).normalized();
      scene.joints.push_back(
          make_joint(scene, a, b, sample_joint_kind(cfg.environment_mode, rng), anchor, axis));
    }
  }
  return scene;
}

SceneState generate_dense(const SceneGenConfig& cfg, Rng& rng) {
  SceneState scene;
  scene.objects.resize(cfg.n_objects + 1);

  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.n_objects))));
  const double spacing = 2.0 * cfg.radius_max + 0.01;
  std::vector<std::pair<int, int>> cells(cfg.n_objects);
  for (int i = 0; i < cfg.n_objects; ++i) {
    cells[i] = {i % cols, i / cols};
    ObjectState& o = scene.objects[i];
    o.radius = rng.uniform(cfg.radius_min, cfg.radius_max);
    o.position = {(cells[i].first - 0.5 * (cols - 1)) * spacing,
                  (cells[i].second - 0.5 * (cols - 1)) * spacing};
  }

  // Joints over grid-adjacent pairs, skipping edges that would close a cycle.
  UnionFind uf(cfg.n_objects);
  for (int i = 0; i < cfg.n_objects; ++i) {
    for (int j = i + 1; j < cfg.n_objects; ++j) {
      const int manhattan = std::abs(cells[i].first - cells[j].first) +
                            std::abs(cells[i].second - cells[j].second);
      if (manhattan != 1) continue;
      if (!rng.chance(cfg.joint_probability)) continue;
      if (!uf.unite(i, j)) continue;
      const Vec2 anchor = (scene.objects[i].position + scene.objects[j].position) * 0.5;
      const Vec2 axis = (scene.objects[j].position - scene.objects[i].position).normalized();
      scene.joints.push_back(
          make_joint(scene, i, j, sample_joint_kind(cfg.environment_mode, rng), anchor, axis));
    }
  }
  return scene;
}

}  // namespace

SceneState generate_scene(const SceneGenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  SceneState scene =
      cfg.layout == SceneLayout::Sparse ? generate_sparse(cfg, rng) : generate_dense(cfg, rng);

  // The pusher parks outside the workspace until a push is generated.
  ObjectState& pusher = scene.objects.back();
  pusher.radius = cfg.pusher_radius;
  pusher.controlled = true;
  pusher.position = {-cfg.workspace_half_x - 1.0, -cfg.workspace_half_y - 1.0};

  // The joint graph must stay a forest.
  UnionFind uf(scene.object_count());
  for (const auto& j : scene.joints)
    require(uf.unite(j.a, j.b), "generated joint graph contains a cycle");

  scene.validate();
  return scene;
}

std::vector<Vec2> generate_push(SceneState& scene, const PushConfig& cfg,
                                const SimConfig& sim_cfg, std::uint64_t seed) {
  Rng rng(seed);
  const int pusher = scene.pusher_index();
  require(pusher >= 0, "scene has no pusher");
  const double pusher_r = scene.objects[pusher].radius;

  struct Candidate {
    Vec2 dir, start;
    int score = 0;
  };
  Candidate best;
  best.score = -1;

  std::vector<int> free_objects;
  for (int i = 0; i < scene.object_count(); ++i)
    if (i != pusher) free_objects.push_back(i);
  require(!free_objects.empty(), "no objects to push");

  for (int c = 0; c < cfg.n_candidates; ++c) {
    const int target = free_objects[rng.pick(static_cast<int>(free_objects.size()))];
    const ObjectState& tgt = scene.objects[target];
    const double jitter_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double jitter_mag = rng.uniform(0.0, 0.5 * tgt.radius);
    const Vec2 aim = tgt.position + Vec2{std::cos(jitter_angle), std::sin(jitter_angle)} * jitter_mag;
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Vec2 dir{std::cos(phi), std::sin(phi)};

    // Entry parameter of each object the pusher would touch along this line.
    double first_entry = std::numeric_limits<double>::infinity();
    std::vector<double> entries;
    for (int i : free_objects) {
      const Vec2 e = scene.objects[i].position - aim;
      const double along = e.dot(dir);
      const double perp = std::abs(e.cross(dir));
      const double hit_radius = scene.objects[i].radius + pusher_r;
      if (perp >= hit_radius) continue;
      const double entry = along - std::sqrt(hit_radius * hit_radius - perp * perp);
      entries.push_back(entry);
      first_entry = std::min(first_entry, entry);
    }
    if (entries.empty()) continue;

    const double s_start = first_entry - 0.02;
    int score = 0;
    for (double s : entries)
      if (s <= s_start + cfg.length) ++score;
    if (score > best.score) {
      best.dir = dir;
      best.start = aim + dir * s_start;
      best.score = score;
    }
  }
  require(best.score >= 1, "no feasible push approach found");

  scene.objects[pusher].position = best.start;
  scene.objects[pusher].velocity = {0.0, 0.0};

  const int steps = static_cast<int>(std::llround(cfg.length / (cfg.speed * sim_cfg.dt)));
  require(steps >= 1, "push resolves to zero steps");
  return std::vector<Vec2>(static_cast<std::size_t>(steps), best.dir * cfg.speed);
}

}  // namespace pushrel
