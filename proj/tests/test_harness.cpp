#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "pushrel/baselines.hpp"
#include "pushrel/config.hpp"
#include "pushrel/datagen.hpp"
#include "pushrel/experiment.hpp"
#include "pushrel/io.hpp"
#include "pushrel/metrics.hpp"
#include "pushrel/rng.hpp"

using namespace pushrel;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "pushrel_harness_test";
  std::filesystem::create_directories(dir);
  return dir;
}

SceneState gap_scene(double gap) {
  SceneState scene;
  ObjectState a;
  a.position = {0.0, 0.0};
  a.radius = 0.1;
  scene.objects.push_back(a);
  ObjectState b;
  b.position = {0.2 + gap, 0.0};
  b.radius = 0.1;
  scene.objects.push_back(b);
  ObjectState pusher;
  pusher.position = {-1.0, 0.0};
  pusher.radius = 0.03;
  pusher.controlled = true;
  scene.objects.push_back(pusher);
  return scene;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("assign_relations: propnet_n says NoJoint everywhere") {
  SceneState scene = gap_scene(0.05);
  auto rel = assign_relations(scene, BaselineKind::PropNetN);
  for (JointType t : rel) CHECK(t == JointType::NoJoint);
}

TEST_CASE("assign_relations: propnet_f uses the 2.5 cm surface gap") {
  auto rel_close = assign_relations(gap_scene(0.020), BaselineKind::PropNetF);
  CHECK(rel_close[pair_index(0, 1, 3)] == JointType::Fixed);
  auto rel_far = assign_relations(gap_scene(0.030), BaselineKind::PropNetF);
  CHECK(rel_far[pair_index(0, 1, 3)] == JointType::NoJoint);
}

TEST_CASE("assign_relations: ground truth echoes the joint list") {
  SceneState scene = gap_scene(0.02);
  scene.joints.push_back(make_joint(scene, 0, 1, JointType::Prismatic, {0.11, 0.0}, {1, 0}));
  auto rel = assign_relations(scene, BaselineKind::PropNetGT);
  CHECK(rel[pair_index(0, 1, 3)] == JointType::Prismatic);
}

TEST_CASE("assign_relations: belief baselines demand a belief state") {
  SceneState scene = gap_scene(0.02);
  CHECK_THROWS_WITH_AS(assign_relations(scene, BaselineKind::BeliefFull),
                       doctest::Contains("belief"), Error);
}

TEST_CASE("baseline names round-trip") {
  for (BaselineKind k : {BaselineKind::PropNetGT, BaselineKind::PropNetF,
                         BaselineKind::PropNetN, BaselineKind::BeliefOneStep,
                         BaselineKind::BeliefFull}) {
    auto parsed = baseline_from_name(baseline_name(k));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == k);
  }
  CHECK_FALSE(baseline_from_name("made_up").has_value());
}

TEST_CASE("trajectory_error: identical trajectories score zero") {
  SceneState scene = gap_scene(0.05);
  Trajectory t;
  t.states = {scene, scene, scene};
  CHECK(trajectory_error_cm(t, t) == 0.0);
}

TEST_CASE("trajectory_error: constant 1 cm offset on one of two objects is 0.5 cm") {
  SceneState scene = gap_scene(0.05);
  Trajectory truth;
  truth.states = {scene, scene, scene};
  Trajectory pred = truth;
  for (auto& st : pred.states) st.objects[0].position.y += 0.01;
  CHECK(trajectory_error_cm(pred, truth) == doctest::Approx(0.5));
}

TEST_CASE("trajectory_error: hand-computed 3-step 2-object fixture") {
  SceneState scene = gap_scene(0.05);
  Trajectory truth;
  truth.states = {scene, scene, scene, scene};
  Trajectory pred = truth;
  // object 0 drifts 1, 2, 3 cm in x; object 1 stays exact
  pred.states[1].objects[0].position.x += 0.01;
  pred.states[2].objects[0].position.x += 0.02;
  pred.states[3].objects[0].position.x += 0.03;
  // mean over 3 compared steps x 2 free objects = (1+2+3)/6 cm
  CHECK(trajectory_error_cm(pred, truth) == doctest::Approx(1.0));
}

TEST_CASE("trajectory_error: length mismatch is an error") {
  SceneState scene = gap_scene(0.05);
  Trajectory a, b;
  a.states = {scene, scene};
  b.states = {scene};
  CHECK_THROWS_AS(trajectory_error_cm(a, b), Error);
}

TEST_CASE("relation_accuracy: all-correct prediction scores 1.0") {
  SceneState scene = gap_scene(0.02);
  scene.joints.push_back(make_joint(scene, 0, 1, JointType::Fixed, {0.11, 0.0}));
  auto truth = ground_truth_relations(scene);
  AccuracyPoint ap = relation_accuracy(truth, scene);
  CHECK(ap.raw == 1.0);
  CHECK(ap.equivalence == 1.0);
}

TEST_CASE("relation_accuracy: uniform random classifier sits near chance") {
  SceneState scene;
  for (int i = 0; i < 12; ++i) {
    ObjectState o;
    o.position = {0.5 * i, 0.0};
    o.radius = 0.1;
    scene.objects.push_back(o);
  }
  ObjectState pusher;
  pusher.position = {0.0, 5.0};
  pusher.radius = 0.03;
  pusher.controlled = true;
  scene.objects.push_back(pusher);
  Rng rng(3);
  for (int i = 0; i + 1 < 12; i += 3) {
    scene.joints.push_back(make_joint(scene, i, i + 1, static_cast<JointType>(1 + rng.pick(3)),
                                      (scene.objects[i].position +
                                       scene.objects[i + 1].position) *
                                          0.5,
                                      {1, 0}));
  }
  double sum = 0.0;
  const int trials = 400;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<JointType> guess(pair_count(scene.object_count()));
    for (auto& g : guess) g = static_cast<JointType>(rng.pick(4));
    sum += relation_accuracy(guess, scene).raw;
  }
  CHECK(sum / trials == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("relation_accuracy: equivalence-aware never drops below raw") {
  Rng rng(4);
  SceneState scene = gap_scene(0.02);
  scene.joints.push_back(make_joint(scene, 0, 1, JointType::Fixed, {0.11, 0.0}));
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<JointType> guess(pair_count(3));
    for (auto& g : guess) g = static_cast<JointType>(rng.pick(4));
    AccuracyPoint ap = relation_accuracy(guess, scene);
    CHECK(ap.equivalence >= ap.raw);
  }
}

TEST_CASE("relation_accuracy: alternate spanning of a rigid group counts as correct") {
  // truth: chain 0-1, 1-2 fixed; prediction: 0-1, 0-2 fixed. Same rigid set.
  SceneState scene;
  for (int i = 0; i < 3; ++i) {
    ObjectState o;
    o.position = {0.25 * i, 0.0};
    o.radius = 0.1;
    scene.objects.push_back(o);
  }
  ObjectState pusher;
  pusher.position = {0, 3};
  pusher.radius = 0.03;
  pusher.controlled = true;
  scene.objects.push_back(pusher);
  scene.joints.push_back(make_joint(scene, 0, 1, JointType::Fixed, {0.125, 0.0}));
  scene.joints.push_back(make_joint(scene, 1, 2, JointType::Fixed, {0.375, 0.0}));

  const int n = 4;
  std::vector<JointType> guess(pair_count(n), JointType::NoJoint);
  guess[pair_index(0, 1, n)] = JointType::Fixed;
  guess[pair_index(0, 2, n)] = JointType::Fixed;  // different edge, same group

  AccuracyPoint ap = relation_accuracy(guess, scene);
  CHECK(ap.raw < 1.0);
  CHECK(ap.equivalence == 1.0);
}

TEST_CASE("static_world_trajectory: only the pusher moves") {
  SceneState scene = gap_scene(0.05);
  std::vector<Vec2> controls(4, Vec2{0.1, 0.0});
  Trajectory t = static_world_trajectory(scene, controls, 0.05);
  CHECK(t.states.size() == 5);
  CHECK(t.states.back().objects[0].position.x == scene.objects[0].position.x);
  CHECK(t.states.back().objects[2].position.x ==
        doctest::Approx(scene.objects[2].position.x + 0.1 * 0.05 * 4));
}

TEST_CASE("mean_std: matches hand computation") {
  MeanStd ms = mean_std({1.0, 2.0, 3.0, 4.0});
  CHECK(ms.mean == doctest::Approx(2.5));
  CHECK(ms.stddev == doctest::Approx(std::sqrt(1.25)));
  CHECK(ms.stderr_mean == doctest::Approx(std::sqrt(1.25) / 2.0));
  CHECK(ms.n == 4);
}

TEST_CASE("persistence: dataset round-trip is bit-exact") {
  GenJob job = gen_preset("tiny");
  SplitSpec spec;
  spec.scenes = {{4, 3}};
  Dataset ds = generate_dataset(job, spec, 1, "test", 77);

  const auto path = (temp_dir() / "roundtrip.bin").string();
  save_dataset(ds, path);
  Dataset loaded = load_dataset(path);

  REQUIRE(loaded.size() == ds.size());
  CHECK(loaded.split == ds.split);
  CHECK(loaded.seed == ds.seed);
  for (int ti = 0; ti < ds.size(); ++ti) {
    const Trajectory& a = ds.trajectories[ti];
    const Trajectory& b = loaded.trajectories[ti];
    REQUIRE(a.states.size() == b.states.size());
    REQUIRE(a.controls.size() == b.controls.size());
    for (std::size_t t = 0; t < a.states.size(); ++t) {
      for (int i = 0; i < a.states[t].object_count(); ++i) {
        CHECK(a.states[t].objects[i].position.x == b.states[t].objects[i].position.x);
        CHECK(a.states[t].objects[i].position.y == b.states[t].objects[i].position.y);
        CHECK(a.states[t].objects[i].velocity.x == b.states[t].objects[i].velocity.x);
        CHECK(a.states[t].objects[i].orientation == b.states[t].objects[i].orientation);
        CHECK(a.states[t].objects[i].radius == b.states[t].objects[i].radius);
        CHECK(a.states[t].objects[i].controlled == b.states[t].objects[i].controlled);
      }
      REQUIRE(a.states[t].joints.size() == b.states[t].joints.size());
      for (std::size_t j = 0; j < a.states[t].joints.size(); ++j) {
        CHECK(a.states[t].joints[j].kind == b.states[t].joints[j].kind);
        CHECK(a.states[t].joints[j].anchor.x == b.states[t].joints[j].anchor.x);
        CHECK(a.states[t].joints[j].local_a.x == b.states[t].joints[j].local_a.x);
        CHECK(a.states[t].joints[j].rest_angle == b.states[t].joints[j].rest_angle);
      }
    }
    for (std::size_t t = 0; t < a.controls.size(); ++t) {
      CHECK(a.controls[t].x == b.controls[t].x);
      CHECK(a.controls[t].y == b.controls[t].y);
    }
  }

  // identical bytes when saved again
  const auto path2 = (temp_dir() / "roundtrip2.bin").string();
  save_dataset(loaded, path2);
  CHECK(read_file(path) == read_file(path2));
}

TEST_CASE("persistence: checkpoint round-trip is bit-exact") {
  PredictorNet net{StackSizes::tiny(5, 2)};
  net.init(123);
  net.norm.mean = {0.001, -0.002};
  net.norm.stddev = {0.05, 0.06};
  const auto path = (temp_dir() / "physics.ckpt").string();
  save_predictor(net, path);
  PredictorNet loaded = load_predictor(path);

  std::vector<ParamRef> pa, pb;
  net.collect_params(pa);
  loaded.collect_params(pb);
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].value->data == pb[i].value->data);
  CHECK(loaded.norm.mean == net.norm.mean);
  CHECK(loaded.norm.stddev == net.norm.stddev);

  BeliefNet belief{StackSizes::tiny(5, 2), 6};
  belief.init(321);
  const auto bpath = (temp_dir() / "belief.ckpt").string();
  save_belief(belief, true, bpath);
  LoadedBelief lb = load_belief(bpath);
  CHECK(lb.one_step_variant);
  std::vector<ParamRef> ba, bb;
  belief.collect_params(ba);
  lb.net.collect_params(bb);
  for (std::size_t i = 0; i < ba.size(); ++i) CHECK(ba[i].value->data == bb[i].value->data);
}

TEST_CASE("persistence: version mismatches are rejected with structured errors") {
  PredictorNet net{StackSizes::tiny(4, 1)};
  net.init(1);
  const auto path = (temp_dir() / "verarr.ckpt").string();
  save_predictor(net, path);

  auto patch = [&](std::size_t offset, const std::string& out_path) {
    std::string bytes = read_file(path);
    bytes[offset] = static_cast<char>(0x7f);
    std::ofstream out(out_path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };
  const auto bad_format = (temp_dir() / "bad_format.ckpt").string();
  patch(8, bad_format);  // format version field
  CHECK_THROWS_WITH_AS(load_predictor(bad_format), doctest::Contains("format version"), Error);

  const auto bad_layout = (temp_dir() / "bad_layout.ckpt").string();
  patch(12, bad_layout);  // feature layout field
  CHECK_THROWS_WITH_AS(load_predictor(bad_layout), doctest::Contains("layout"), Error);

  GenJob job = gen_preset("tiny");
  SplitSpec spec;
  spec.scenes = {{3, 1}};
  Dataset ds = generate_dataset(job, spec, 1, "test", 5);
  const auto dpath = (temp_dir() / "ds.bin").string();
  save_dataset(ds, dpath);
  CHECK_THROWS_WITH_AS(load_predictor(dpath), doctest::Contains("magic"), Error);
}

TEST_CASE("describe_file reports dataset counts matching the config") {
  GenJob job = gen_preset("tiny");
  SplitSpec spec;
  spec.scenes = {{4, 2}};
  Dataset ds = generate_dataset(job, spec, 1, "test", 9);
  const auto path = (temp_dir() / "describe.bin").string();
  save_dataset(ds, path);
  const std::string desc = describe_file(path);
  CHECK(desc.find("trajectories: 2") != std::string::npos);
  CHECK(desc.find("objects (incl. pusher): 5") != std::string::npos);
  CHECK(desc.find("layout: sparse") != std::string::npos);
}

TEST_CASE("run_experiment: missing inputs are reported with paths") {
  ExperimentConfig ec;
  ec.dataset_path = "/nonexistent/data.bin";
  ec.physics_checkpoint = "/nonexistent/physics.ckpt";
  ec.eval = eval_preset("tiny");
  ec.eval.baselines = {BaselineKind::PropNetGT};
  ec.out_dir = (temp_dir() / "out").string();
  CHECK_THROWS_WITH_AS(run_experiment(ec), doctest::Contains("/nonexistent/data.bin"), Error);
}

TEST_CASE("run_experiment: smoke run emits deterministic tables with all baselines") {
  const auto dir = temp_dir() / "exp";
  std::filesystem::create_directories(dir);

  GenJob job = gen_preset("tiny");
  SplitSpec spec;
  spec.scenes = {{4, 3}};
  Dataset test = generate_dataset(job, spec, 1, "test", 31);
  const auto dpath = (dir / "test.bin").string();
  save_dataset(test, dpath);

  PredictorNet physics{StackSizes::tiny(5, 2)};
  physics.init(41);
  physics.norm.mean = {0.0, 0.0};
  physics.norm.stddev = {0.02, 0.02};
  const auto ppath = (dir / "physics.ckpt").string();
  save_predictor(physics, ppath);

  BeliefNet belief{StackSizes::tiny(5, 2), 6};
  belief.init(42);
  const auto bpath = (dir / "belief.ckpt").string();
  save_belief(belief, false, bpath);
  const auto b1path = (dir / "belief1.ckpt").string();
  save_belief(belief, true, b1path);

  ExperimentConfig ec;
  ec.dataset_path = dpath;
  ec.physics_checkpoint = ppath;
  ec.belief_checkpoint = bpath;
  ec.belief_1step_checkpoint = b1path;
  ec.eval = eval_preset("tiny");
  ec.out_dir = (dir / "out1").string();
  ec.tag = "tiny";

  ExperimentResult r1 = run_experiment(ec);
  for (int tp : ec.eval.timepoints) {
    const auto& bucket = r1.error_cm[BaselineKind::PropNetGT][tp];
    CHECK(bucket.size() == 3);
    for (double v : bucket) CHECK(std::isfinite(v));
  }
  CHECK(std::filesystem::exists(dir / "out1" / "tiny_results.csv"));
  CHECK(std::filesystem::exists(dir / "out1" / "tiny_summary.csv"));
  CHECK(std::filesystem::exists(dir / "out1" / "tiny_accuracy.csv"));
  CHECK(std::filesystem::exists(dir / "out1" / "tiny_error_vs_t.svg"));

  ec.out_dir = (dir / "out2").string();
  run_experiment(ec);
  CHECK(read_file(dir / "out1" / "tiny_results.csv") ==
        read_file(dir / "out2" / "tiny_results.csv"));
  CHECK(read_file(dir / "out1" / "tiny_accuracy.csv") ==
        read_file(dir / "out2" / "tiny_accuracy.csv"));
}
