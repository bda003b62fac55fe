#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "pushrel/predictor.hpp"
#include "pushrel/rng.hpp"
#include "pushrel/sim.hpp"
#include "support/gradcheck.hpp"

using namespace pushrel;
using pushrel::testing::check_param_gradients;

namespace {

// Positions on a 1/16 m lattice so translated differences stay bit-exact.
SceneState chain_scene() {
  SceneState scene;
  const double xs[] = {0.0, 0.25, 0.5};
  for (double x : xs) {
    ObjectState o;
    o.position = {x, 0.0};
    o.radius = 0.125;
    scene.objects.push_back(o);
  }
  ObjectState pusher;
  pusher.position = {-0.3125, 0.0};
  pusher.velocity = {0.0625, 0.0};
  pusher.radius = 0.0625;
  pusher.controlled = true;
  scene.objects.push_back(pusher);
  return scene;
}

std::vector<JointType> all_nojoint(int n) {
  return std::vector<JointType>(pair_count(n), JointType::NoJoint);
}

}  // namespace

TEST_CASE("encode: zero-weight params give all-zero codes") {
  PredictorNet net{StackSizes::tiny(5, 2)};
  // leave weights zero-initialized
  SceneState scene = chain_scene();
  auto attrs = hard_attrs(all_nojoint(4));
  GraphBatch batch = build_graph_batch({{&scene, attrs.data(), false}});
  PropagationState st = net.stack().encode(batch);
  for (double v : st.object_codes.data) CHECK(v == 0.0);
  for (double v : st.relation_codes.data) CHECK(v == 0.0);
  for (double v : st.propagated.data) CHECK(v == 0.0);
}

TEST_CASE("encode: a 9-object scene yields 10 object codes and 90 relation codes") {
  SceneGenConfig gcfg;
  gcfg.n_objects = 9;
  SceneState scene = generate_scene(gcfg, 5);
  auto attrs = hard_attrs(ground_truth_relations(scene));
  GraphBatch batch = build_graph_batch({{&scene, attrs.data(), false}});
  PredictorNet net{StackSizes::tiny(4, 1)};
  PropagationState st = net.stack().encode(batch);
  CHECK(st.object_codes.rows == 10);
  CHECK(st.relation_codes.rows == 90);
}

TEST_CASE("encode: codes are invariant to a global (5,5) translation") {
  PredictorNet net{StackSizes::tiny(6, 2)};
  net.init(123);
  SceneState scene = chain_scene();
  SceneState moved = scene;
  for (auto& o : moved.objects) o.position += Vec2{5.0, 5.0};

  auto attrs = hard_attrs(all_nojoint(4));
  GraphBatch b1 = build_graph_batch({{&scene, attrs.data(), false}});
  GraphBatch b2 = build_graph_batch({{&moved, attrs.data(), false}});
  PropagationState s1 = net.stack().run(b1);
  PropagationState s2 = net.stack().run(b2);
  CHECK(s1.object_codes.data == s2.object_codes.data);
  CHECK(s1.relation_codes.data == s2.relation_codes.data);
  CHECK(s1.propagated.data == s2.propagated.data);
}

TEST_CASE("predict_step: translation leaves predicted velocities bit-identical") {
  PredictorNet net{StackSizes::standard()};
  net.init(7);
  // give the head nonzero weights so predictions are nontrivial
  Rng rng(99);
  glorot_init(net.output_head().weight(0), 150, 2, rng);

  SceneState scene = chain_scene();
  SceneState moved = scene;
  for (auto& o : moved.objects) o.position += Vec2{5.0, 5.0};
  auto rel = all_nojoint(4);
  auto v1 = predict_step(scene, rel, {0.0625, 0.0}, net);
  auto v2 = predict_step(moved, rel, {0.0625, 0.0}, net);
  for (std::size_t i = 0; i < v1.size(); ++i) {
    CHECK(v1[i].x == v2[i].x);
    CHECK(v1[i].y == v2[i].y);
  }
}

TEST_CASE("predict_step: relabeling objects permutes predictions bit-exactly") {
  PredictorNet net{StackSizes::standard()};
  net.init(8);
  Rng rng(100);
  glorot_init(net.output_head().weight(0), 150, 2, rng);

  SceneState scene = chain_scene();
  scene.joints.push_back(make_joint(scene, 0, 1, JointType::Fixed, {0.125, 0.0}));
  // contact between pusher and object 0
  scene.objects[3].position = {-0.1875, 0.0};

  const int n = scene.object_count();
  const std::vector<int> perm{2, 0, 1, 3};
  SceneState relabeled;
  relabeled.objects.resize(n);
  for (int i = 0; i < n; ++i) relabeled.objects[perm[i]] = scene.objects[i];
  for (const auto& j : scene.joints) {
    JointSpec moved = j;
    moved.a = perm[j.a];
    moved.b = perm[j.b];
    relabeled.joints.push_back(moved);
  }

  auto rel1 = ground_truth_relations(scene);
  auto rel2 = ground_truth_relations(relabeled);
  auto v1 = predict_step(scene, rel1, {0.0625, 0.0}, net);
  auto v2 = predict_step(relabeled, rel2, {0.0625, 0.0}, net);
  for (int i = 0; i < n; ++i) {
    CHECK(v1[i].x == v2[perm[i]].x);
    CHECK(v1[i].y == v2[perm[i]].y);
  }
}

TEST_CASE("propagate: zero-weight propagators keep everything at zero") {
  PredictorNet net{StackSizes::tiny(5, 3)};
  SceneState scene = chain_scene();
  auto attrs = hard_attrs(all_nojoint(4));
  GraphBatch batch = build_graph_batch({{&scene, attrs.data(), false}});
  PropagationState st = net.stack().encode(batch);
  net.stack().propagate(st, batch);
  for (double v : st.propagated.data) CHECK(v == 0.0);
  for (double v : st.effects.data) CHECK(v == 0.0);
}

TEST_CASE("propagate: effects chain across two steps in a contact chain") {
  PredictorNet net{StackSizes::tiny(6, 2)};
  net.init(21);

  // chain: pusher -> 0 -> 1 -> 2 all in contact
  SceneState scene;
  for (int i = 0; i < 3; ++i) {
    ObjectState o;
    o.position = {0.201 * i, 0.0};
    o.radius = 0.1;
    scene.objects.push_back(o);
  }
  ObjectState pusher;
  pusher.position = {-0.131, 0.0};
  pusher.radius = 0.03;
  pusher.controlled = true;
  scene.objects.push_back(pusher);

  auto rel = all_nojoint(4);
  auto run = [&](double perturb) {
    SceneState s = scene;
    s.objects[0].velocity.x += perturb;
    auto attrs = hard_attrs(rel);
    GraphBatch batch = build_graph_batch({{&s, attrs.data(), true}});
    return net.stack().run(batch);
  };
  PropagationState base = run(0.0);
  PropagationState bumped = run(0.01);
  // object 2 is two hops from object 0; with L=2 its code must react
  double delta = 0.0;
  for (int k = 0; k < 6; ++k) delta += std::abs(bumped.propagated(2, k) - base.propagated(2, k));
  CHECK(delta > 0.0);
}

TEST_CASE("effect locality: gated-out far pairs transmit nothing") {
  PredictorNet net{StackSizes::standard()};
  net.init(31);
  Rng rng(101);
  glorot_init(net.output_head().weight(0), 150, 2, rng);

  // Two far-apart clusters; pusher touches only cluster A.
  SceneState scene;
  ObjectState a;
  a.position = {0.0, 0.0};
  a.radius = 0.1;
  scene.objects.push_back(a);
  ObjectState far;
  far.position = {2.0, 2.0};
  far.radius = 0.1;
  scene.objects.push_back(far);
  ObjectState pusher;
  pusher.position = {-0.131, 0.0};
  pusher.radius = 0.03;
  pusher.controlled = true;
  scene.objects.push_back(pusher);

  auto rel = all_nojoint(3);
  auto v1 = predict_step(scene, rel, {0.1, 0.0}, net);
  SceneState bumped = scene;
  bumped.objects[0].velocity = {0.3, 0.1};  // perturb the touched cluster
  auto v2 = predict_step(bumped, rel, {0.1, 0.0}, net);
  // far object's prediction is unchanged: no path through gated edges
  CHECK(v1[1].x == v2[1].x);
  CHECK(v1[1].y == v2[1].y);
  // touched object's prediction responds
  CHECK((v1[0].x != v2[0].x || v1[0].y != v2[0].y));
}

TEST_CASE("predict_step: untrained zero head predicts the normalization mean") {
  PredictorNet net{StackSizes::tiny(5, 2)};
  net.init(3);  // head is zero-initialized
  net.norm.mean = {0.01, -0.02};
  net.norm.stddev = {0.1, 0.1};
  SceneState scene = chain_scene();
  auto v = predict_step(scene, all_nojoint(4), {0.05, 0.0}, net);
  CHECK(v[0].x == doctest::Approx(0.01));
  CHECK(v[0].y == doctest::Approx(-0.02));
  // output shape: one velocity per free object, pusher slot untouched
  CHECK(v.size() == 4);
  CHECK(v[3].x == 0.0);
}

TEST_CASE("rollout: T=0 returns only the initial scene") {
  PredictorNet net{StackSizes::tiny(5, 2)};
  net.init(3);
  SceneState scene = chain_scene();
  Trajectory traj = rollout(scene, all_nojoint(4), {}, net, 0, 0.05);
  CHECK(traj.states.size() == 1);
}

TEST_CASE("rollout: non-finite prediction reports the step index") {
  PredictorNet net{StackSizes::tiny(5, 2)};
  net.init(3);
  net.norm.mean = {std::numeric_limits<double>::quiet_NaN(), 0.0};
  SceneState scene = chain_scene();
  std::vector<Vec2> controls(3, Vec2{0.05, 0.0});
  CHECK_THROWS_WITH_AS(rollout(scene, all_nojoint(4), controls, net, 3, 0.05),
                       doctest::Contains("step"), Error);
}

TEST_CASE("gradient check: single-step loss on a 3-object scene") {
  PredictorNet net{StackSizes::tiny(4, 2)};
  net.init(17);
  Rng rng(55);
  glorot_init(net.output_head().weight(0), 4, 2, rng);

  SceneState scene = chain_scene();
  scene.joints.push_back(make_joint(scene, 0, 1, JointType::Revolute, {0.125, 0.0}));
  scene.objects[3].position = {-0.19, 0.0};  // pusher in contact with object 0
  auto rel = ground_truth_relations(scene);
  auto attrs = hard_attrs(rel);

  Tensor2 target(4, 2);
  for (double& v : target.data) v = rng.uniform(-0.5, 0.5);

  auto loss = [&]() {
    GraphBatch batch = build_graph_batch({{&scene, attrs.data(), true}});
    Tensor2 out = net.forward(batch);
    double s = 0.0;
    for (int i = 0; i < out.rows; ++i) {
      if (batch.controlled[i]) continue;
      for (int k = 0; k < 2; ++k) {
        const double e = out(i, k) - target(i, k);
        s += 0.5 * e * e;
      }
    }
    return s;
  };

  GraphBatch batch = build_graph_batch({{&scene, attrs.data(), true}});
  StackCaches caches;
  MlpCache head_cache;
  Tensor2 out = net.forward(batch, &caches, &head_cache);
  Tensor2 grad(out.rows, out.cols);
  for (int i = 0; i < out.rows; ++i) {
    if (batch.controlled[i]) continue;
    for (int k = 0; k < 2; ++k) grad(i, k) = out(i, k) - target(i, k);
  }
  net.zero_grads();
  net.backward(batch, caches, head_cache, grad);

  std::vector<ParamRef> params;
  net.collect_params(params);
  auto res = check_param_gradients(params, loss, rng, 5);
  CHECK_MESSAGE(res.max_rel_err < 1e-5, "worst ", res.worst_param);
}

TEST_CASE("batched forward equals per-sample forward") {
  PredictorNet net{StackSizes::tiny(5, 2)};
  net.init(29);
  Rng rng(66);
  glorot_init(net.output_head().weight(0), 5, 2, rng);

  SceneState s1 = chain_scene();
  SceneState s2 = chain_scene();
  s2.objects[1].position = {0.3125, 0.0625};
  auto attrs1 = hard_attrs(all_nojoint(4));
  auto attrs2 = hard_attrs(all_nojoint(4));

  GraphBatch joint = build_graph_batch(
      {{&s1, attrs1.data(), true}, {&s2, attrs2.data(), true}});
  Tensor2 both = net.forward(joint);

  GraphBatch only1 = build_graph_batch({{&s1, attrs1.data(), true}});
  GraphBatch only2 = build_graph_batch({{&s2, attrs2.data(), true}});
  Tensor2 o1 = net.forward(only1);
  Tensor2 o2 = net.forward(only2);

  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 2; ++k) {
      CHECK(both(i, k) == o1(i, k));
      CHECK(both(4 + i, k) == o2(i, k));
    }
}
