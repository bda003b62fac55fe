#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "pushrel/config.hpp"
#include "pushrel/datagen.hpp"
#include "pushrel/training.hpp"

using namespace pushrel;

namespace {

// Small mixed sparse dataset for smoke-scale training runs; trajectories are
// trimmed to `steps` transitions.
Dataset smoke_dataset(int n_scenes, const std::string& split, std::uint64_t seed,
                      int n_objects = 4, int steps = 25) {
  GenJob job = gen_preset("tiny");
  job.gen.n_objects = n_objects;
  job.push.length = std::max(0.06, job.push.speed * job.sim.dt * steps);
  SplitSpec spec;
  spec.scenes = {{n_objects, n_scenes}};
  Dataset ds = generate_dataset(job, spec, 1, split, seed);
  for (auto& traj : ds.trajectories) {
    if (traj.step_count() > steps) {
      traj.states.resize(static_cast<std::size_t>(steps) + 1);
      traj.controls.resize(static_cast<std::size_t>(steps));
    }
  }
  return ds;
}

TrainConfig smoke_config() {
  TrainConfig tc = train_preset("tiny-physics");
  tc.max_epochs = 2;
  tc.seed = 5;
  return tc;
}

}  // namespace

TEST_CASE("train_physics: smoke run completes with finite decreasing loss") {
  Dataset train = smoke_dataset(10, "train", 1);
  Dataset val = smoke_dataset(3, "val", 2);
  PhysicsTrainResult result = train_physics(train, val, smoke_config());
  REQUIRE(result.report.rows.size() == 2);
  bool decreased = false;
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& row : result.report.rows) {
    CHECK(std::isfinite(row.train_loss));
    CHECK(std::isfinite(row.val_score));
    if (row.train_loss < prev) decreased = true;
    prev = row.train_loss;
  }
  CHECK(decreased);
}

TEST_CASE("train_physics: empty dataset is rejected") {
  Dataset empty;
  Dataset val = smoke_dataset(2, "val", 3);
  CHECK_THROWS_AS(train_physics(empty, val, smoke_config()), Error);
}

TEST_CASE("train_physics: identical seeds select identical checkpoints") {
  Dataset train = smoke_dataset(6, "train", 4, 3, 15);
  Dataset val = smoke_dataset(2, "val", 5, 3, 15);
  auto run = [&]() {
    PhysicsTrainResult r = train_physics(train, val, smoke_config());
    std::vector<ParamRef> params;
    r.net.collect_params(params);
    std::vector<double> flat;
    for (auto& p : params) flat.insert(flat.end(), p.value->data.begin(), p.value->data.end());
    return flat;
  };
  CHECK(run() == run());
}

TEST_CASE("training report: learning rate trace is non-increasing in x0.8 steps") {
  Dataset train = smoke_dataset(4, "train", 6, 3, 12);
  Dataset val = smoke_dataset(2, "val", 7, 3, 12);
  TrainConfig tc = smoke_config();
  tc.max_epochs = 8;
  tc.patience = 2;  // force decays on the plateau
  PhysicsTrainResult result = train_physics(train, val, tc);
  double prev = tc.lr;
  for (const auto& row : result.report.rows) {
    CHECK(row.lr <= prev + 1e-15);
    if (row.lr < prev) CHECK(row.lr == doctest::Approx(prev * 0.8));
    prev = row.lr;
  }
}

TEST_CASE("evaluate_validation: deterministic and zero for an exact predictor") {
  // Static scenes: nothing moves, and a zero-head net with zero mean
  // predicts exactly that.
  Dataset val = smoke_dataset(3, "val", 8, 3, 10);
  for (auto& traj : val.trajectories) {
    // replace ground truth with a no-motion trajectory of the same length
    for (std::size_t t = 1; t < traj.states.size(); ++t) {
      traj.states[t] = traj.states[0];
      traj.states[t].time = static_cast<int>(t);
    }
    for (auto& u : traj.controls) u = {0.0, 0.0};
  }
  PredictorNet net{StackSizes::tiny(4, 1)};
  net.init(9);
  net.norm.mean = {0.0, 0.0};
  net.norm.stddev = {1.0, 1.0};
  const double a = evaluate_validation(net, val);
  const double b = evaluate_validation(net, val);
  CHECK(a == b);
  CHECK(a == 0.0);
}

TEST_CASE("evaluate_validation: pooled mean position error matches hand computation") {
  // One free object, static truth, predictor drifts by (mean_x, 0) per step.
  Dataset val = smoke_dataset(1, "val", 10, 1, 3);
  Trajectory& traj = val.trajectories[0];
  for (std::size_t t = 1; t < traj.states.size(); ++t) {
    traj.states[t] = traj.states[0];
    traj.states[t].time = static_cast<int>(t);
  }
  for (auto& u : traj.controls) u = {0.0, 0.0};

  PredictorNet net{StackSizes::tiny(4, 1)};
  net.init(11);
  net.norm.mean = {0.02, 0.0};  // constant predicted velocity
  net.norm.stddev = {1.0, 1.0};

  // position error at step t is 0.02*dt*t; mean over t=1..3 with dt=0.05
  const double dt = traj.dt;
  const double expect = 0.02 * dt * (1 + 2 + 3) / 3.0;
  CHECK(evaluate_validation(net, val) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("train_belief: smoke run reports finite loss and accuracy") {
  Dataset train = smoke_dataset(6, "train", 12, 3, 20);
  Dataset val = smoke_dataset(2, "val", 13, 3, 20);
  TrainConfig tc = train_preset("tiny-belief");
  tc.sequence_length = 20;
  tc.loss_window_lo = 8;
  tc.loss_window_hi = 20;
  tc.seed = 14;
  BeliefTrainResult result = train_belief(train, val, tc, false);
  REQUIRE(!result.report.rows.empty());
  for (const auto& row : result.report.rows) {
    CHECK(std::isfinite(row.train_loss));
    CHECK(row.val_score >= 0.0);
    CHECK(row.val_score <= 1.0);
  }
  // initial loss sits near ln(4); after two epochs it must still be finite
  CHECK(result.report.rows[0].train_loss < 1.6);
}

TEST_CASE("train_belief: empty dataset is rejected") {
  Dataset empty;
  Dataset val = smoke_dataset(2, "val", 15, 3, 10);
  TrainConfig tc = train_preset("tiny-belief");
  CHECK_THROWS_AS(train_belief(empty, val, tc, false), Error);
}

TEST_CASE("config: unknown keys are rejected, known keys apply") {
  ConfigView cfg = ConfigView::parse_text("max_epochs = 7\nbogus_key = 1\n", "test");
  TrainConfig tc = train_preset("tiny-physics");
  apply_train_overrides(cfg, tc);
  CHECK(tc.max_epochs == 7);
  CHECK_THROWS_WITH_AS(cfg.finish(), doctest::Contains("bogus_key"), Error);
}

TEST_CASE("config: duplicate keys and malformed lines are rejected") {
  CHECK_THROWS_AS(ConfigView::parse_text("a = 1\na = 2\n", "test"), Error);
  CHECK_THROWS_AS(ConfigView::parse_text("just a line\n", "test"), Error);
}

TEST_CASE("presets: every named preset constructs") {
  for (const auto& name : gen_preset_names()) CHECK_NOTHROW(gen_preset(name));
  for (const auto& name : train_preset_names()) CHECK_NOTHROW(train_preset(name));
  for (const auto& name : eval_preset_names()) CHECK_NOTHROW(eval_preset(name));
  CHECK_THROWS_AS(gen_preset("nope"), Error);
}
