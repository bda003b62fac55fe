#include "pushrel/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "pushrel/belief.hpp"
#include "pushrel/error.hpp"

namespace pushrel {

double trajectory_error_cm(const Trajectory& predicted, const Trajectory& ground_truth) {
  require(predicted.states.size() == ground_truth.states.size(),
          "trajectory_error: length mismatch (" + std::to_string(predicted.states.size()) +
              " vs " + std::to_string(ground_truth.states.size()) + ")");
  require(!predicted.states.empty(), "trajectory_error: empty trajectories");
  const int n = ground_truth.states[0].object_count();
  require(predicted.states[0].object_count() == n, "trajectory_error: object count mismatch");

  double sum = 0.0;
  long count = 0;
  for (std::size_t t = 1; t < predicted.states.size(); ++t) {
    for (int i = 0; i < n; ++i) {
      if (ground_truth.states[t].objects[i].controlled) continue;
      sum += (predicted.states[t].objects[i].position -
              ground_truth.states[t].objects[i].position)
                 .norm();
      ++count;
    }
  }
  return count == 0 ? 0.0 : 100.0 * sum / static_cast<double>(count);
}

Trajectory static_world_trajectory(const SceneState& start, const std::vector<Vec2>& controls,
                                   double dt) {
  Trajectory traj;
  traj.dt = dt;
  traj.controls = controls;
  traj.states.push_back(start);
  const int pusher = start.pusher_index();
  for (const Vec2& u : controls) {
    SceneState next = traj.states.back();
    for (int i = 0; i < next.object_count(); ++i) next.objects[i].velocity = {0.0, 0.0};
    if (pusher >= 0) {
      next.objects[pusher].velocity = u;
      next.objects[pusher].position += u * dt;
    }
    next.time += 1;
    traj.states.push_back(std::move(next));
  }
  return traj;
}

namespace {

struct Components {
  std::vector<int> root;

  explicit Components(int n) : root(n) {
    for (int i = 0; i < n; ++i) root[i] = i;
  }
  int find(int x) {
    while (root[x] != x) x = root[x] = root[root[x]];
    return x;
  }
  void unite(int a, int b) { root[find(a)] = find(b); }
  bool same(int a, int b) { return find(a) == find(b); }
};

// Rigid groups induced by Fixed joints only.
Components fixed_components(int n, const std::vector<JointType>& rel) {
  Components comp(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rel[pair_index(i, j, n)] == JointType::Fixed) comp.unite(i, j);
  return comp;
}

bool fixed_or_none(JointType t) { return t == JointType::NoJoint || t == JointType::Fixed; }

}  // namespace

AccuracyPoint relation_accuracy(const std::vector<JointType>& predicted,
                                const SceneState& scene) {
  const int n = scene.object_count();
  require(static_cast<int>(predicted.size()) == pair_count(n),
          "relation_accuracy: prediction must cover all pairs");
  const std::vector<JointType> truth = ground_truth_relations(scene);
  const int pusher = scene.pusher_index();

  Components gt_comp = fixed_components(n, truth);
  Components pr_comp = fixed_components(n, predicted);
  // A body's rigid group matches when its co-membership pattern is identical
  // under truth and prediction.
  auto group_matches = [&](int i) {
    for (int k = 0; k < n; ++k) {
      if (k == pusher) continue;
      if (gt_comp.same(i, k) != pr_comp.same(i, k)) return false;
    }
    return true;
  };

  long correct = 0, equiv_correct = 0, total = 0;
  for (int i = 0; i < n; ++i) {
    if (i == pusher) continue;
    for (int j = i + 1; j < n; ++j) {
      if (j == pusher) continue;
      const int q = pair_index(i, j, n);
      ++total;
      if (predicted[q] == truth[q]) {
        ++correct;
        ++equiv_correct;
        continue;
      }
      // Fixed/no-joint confusions that leave both bodies' rigid groups
      // unchanged produce identical motion and count as correct.
      if (fixed_or_none(predicted[q]) && fixed_or_none(truth[q]) && group_matches(i) &&
          group_matches(j)) {
        ++equiv_correct;
      }
    }
  }
  AccuracyPoint ap;
  if (total > 0) {
    ap.raw = static_cast<double>(correct) / static_cast<double>(total);
    ap.equivalence = static_cast<double>(equiv_correct) / static_cast<double>(total);
  }
  return ap;
}

std::vector<AccuracyPoint> relation_accuracy_curve(const std::vector<Tensor2>& dists,
                                                   const SceneState& scene) {
  std::vector<AccuracyPoint> curve;
  curve.reserve(dists.size());
  for (const Tensor2& d : dists)
    curve.push_back(relation_accuracy(classify_distribution(d), scene));
  return curve;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd ms;
  ms.n = static_cast<long>(values.size());
  if (ms.n == 0) return ms;
  double sum = 0.0;
  for (double v : values) sum += v;
  ms.mean = sum / static_cast<double>(ms.n);
  double sq = 0.0;
  for (double v : values) sq += (v - ms.mean) * (v - ms.mean);
  ms.stddev = std::sqrt(sq / static_cast<double>(ms.n));
  ms.stderr_mean = ms.stddev / std::sqrt(static_cast<double>(ms.n));
  return ms;
}

}  // namespace pushrel
