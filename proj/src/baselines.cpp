#include "pushrel/baselines.hpp"

#include "pushrel/error.hpp"

namespace pushrel {

const char* baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::PropNetGT: return "propnet_gt";
    case BaselineKind::PropNetF: return "propnet_f";
    case BaselineKind::PropNetN: return "propnet_n";
    case BaselineKind::BeliefOneStep: return "belief_1step";
    case BaselineKind::BeliefFull: return "belief_full";
  }
  return "?";
}

std::optional<BaselineKind> baseline_from_name(const std::string& name) {
  for (BaselineKind k : {BaselineKind::PropNetGT, BaselineKind::PropNetF,
                         BaselineKind::PropNetN, BaselineKind::BeliefOneStep,
                         BaselineKind::BeliefFull}) {
    if (name == baseline_name(k)) return k;
  }
  return std::nullopt;
}

bool baseline_needs_belief(BaselineKind k) {
  return k == BaselineKind::BeliefOneStep || k == BaselineKind::BeliefFull;
}

std::vector<JointType> assign_relations(const SceneState& scene, BaselineKind kind,
                                        const BeliefState* belief) {
  const int n = scene.object_count();
  switch (kind) {
    case BaselineKind::PropNetGT:
      return ground_truth_relations(scene);
    case BaselineKind::PropNetN:
      return std::vector<JointType>(pair_count(n), JointType::NoJoint);
    case BaselineKind::PropNetF: {
      std::vector<JointType> rel(pair_count(n), JointType::NoJoint);
      const int pusher = scene.pusher_index();
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          if (i == pusher || j == pusher) continue;
          const double gap = (scene.objects[i].position - scene.objects[j].position).norm() -
                             scene.objects[i].radius - scene.objects[j].radius;
          if (gap < kFixedHeuristicGap) rel[pair_index(i, j, n)] = JointType::Fixed;
        }
      }
      return rel;
    }
    case BaselineKind::BeliefOneStep:
    case BaselineKind::BeliefFull:
      require(belief != nullptr,
              std::string("baseline ") + baseline_name(kind) + " requires a belief state");
      require(belief->n_objects == n, "belief state object count mismatch");
      return classify_relations(*belief);
  }
  fail("unknown baseline");
}

}  // namespace pushrel
