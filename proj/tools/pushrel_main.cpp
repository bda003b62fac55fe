#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pushrel/baselines.hpp"
#include "pushrel/belief.hpp"
#include "pushrel/config.hpp"
#include "pushrel/datagen.hpp"
#include "pushrel/error.hpp"
#include "pushrel/experiment.hpp"
#include "pushrel/io.hpp"
#include "pushrel/metrics.hpp"
#include "pushrel/svg.hpp"
#include "pushrel/training.hpp"

namespace {

using namespace pushrel;

ConfigView load_config(const std::string& path) {
  if (path.empty()) return {};
  return ConfigView::parse_file(path);
}

int cmd_gen_data(const std::string& preset, const std::string& config_path,
                 std::uint64_t seed, const std::string& out_dir) {
  GenJob job = gen_preset(preset);
  ConfigView cfg = load_config(config_path);
  apply_gen_overrides(cfg, job);
  cfg.finish();

  std::filesystem::create_directories(out_dir);
  struct SplitOut {
    const SplitSpec* split;
    int pushes;
    const char* name;
    std::uint64_t salt;
  };
  const SplitOut splits[] = {
      {&job.train, job.train_pushes_per_scene, "train", 11},
      {&job.val, job.train_pushes_per_scene, "val", 22},
      {&job.test, job.test_pushes_per_scene, "test", 33},
  };
  for (const auto& s : splits) {
    if (s.split->total() == 0) continue;
    Dataset ds = generate_dataset(job, *s.split, s.pushes, s.name, seed + s.salt);
    const std::string path = out_dir + "/" + s.name + ".bin";
    save_dataset(ds, path);
    std::cout << path << ": " << ds.size() << " trajectories, "
              << ds.trajectories[0].step_count() << " steps each\n";
  }
  return 0;
}

int cmd_train_physics(const std::string& preset, const std::string& config_path,
                      std::uint64_t seed, const std::string& train_path,
                      const std::string& val_path, const std::string& out_path) {
  TrainConfig tc = train_preset(preset);
  ConfigView cfg = load_config(config_path);
  apply_train_overrides(cfg, tc);
  cfg.finish();
  tc.seed = seed;

  const Dataset train = load_dataset(train_path);
  const Dataset val = load_dataset(val_path);
  PhysicsTrainResult result = train_physics(train, val, tc);
  std::filesystem::create_directories(
      std::filesystem::path(out_path).parent_path().string().empty()
          ? "."
          : std::filesystem::path(out_path).parent_path().string());
  save_predictor(result.net, out_path);
  write_report_csv(result.report, out_path + ".report.csv");
  std::cout << "best epoch " << result.report.best_epoch << ", validation rollout error "
            << result.report.best_score * 100.0 << " cm\n";
  std::cout << "checkpoint: " << out_path << "\n";
  return 0;
}

int cmd_train_belief(const std::string& preset, const std::string& config_path,
                     std::uint64_t seed, const std::string& train_path,
                     const std::string& val_path, const std::string& variant,
                     const std::string& out_path) {
  TrainConfig tc = train_preset(preset);
  ConfigView cfg = load_config(config_path);
  apply_train_overrides(cfg, tc);
  cfg.finish();
  tc.seed = seed;
  require(variant == "full" || variant == "1step", "variant must be full or 1step");

  const Dataset train = load_dataset(train_path);
  const Dataset val = load_dataset(val_path);
  BeliefTrainResult result = train_belief(train, val, tc, variant == "1step");
  save_belief(result.net, result.one_step_variant, out_path);
  write_report_csv(result.report, out_path + ".report.csv");
  std::cout << "best epoch " << result.report.best_epoch << ", validation accuracy "
            << (1.0 - result.report.best_score) << "\n";
  std::cout << "checkpoint: " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& preset, const std::string& config_path,
             const std::string& data_path, const std::string& physics_path,
             const std::string& belief_path, const std::string& belief_1step_path,
             const std::string& baseline_filter, const std::string& out_dir,
             const std::string& tag) {
  ExperimentConfig ec;
  ec.eval = eval_preset(preset);
  ConfigView cfg = load_config(config_path);
  apply_eval_overrides(cfg, ec.eval);
  cfg.finish();
  if (!baseline_filter.empty()) {
    auto k = baseline_from_name(baseline_filter);
    require(k.has_value(), "unknown baseline '" + baseline_filter + "'");
    ec.eval.baselines = {*k};
  }
  ec.dataset_path = data_path;
  ec.physics_checkpoint = physics_path;
  ec.belief_checkpoint = belief_path;
  ec.belief_1step_checkpoint = belief_1step_path;
  ec.out_dir = out_dir;
  ec.tag = tag;

  ExperimentResult result = run_experiment(ec);
  for (const auto& [baseline, by_tp] : result.error_cm) {
    for (const auto& [tp, values] : by_tp) {
      if (values.empty()) continue;
      const MeanStd ms = mean_std(values);
      std::cout << baseline_name(baseline) << " @t=" << tp << ": " << ms.mean << " +- "
                << ms.stderr_mean << " cm (n=" << ms.n << ")\n";
    }
  }
  std::cout << "tables written to " << out_dir << "\n";
  return 0;
}

int cmd_rollout(const std::string& data_path, const std::string& physics_path,
                const std::string& belief_path, int trajectory, const std::string& baseline,
                int t_belief, int horizon, const std::string& out_path) {
  const Dataset data = load_dataset(data_path);
  require(trajectory >= 0 && trajectory < data.size(), "trajectory index out of range");
  const Trajectory& truth = data.trajectories[trajectory];
  const int T = truth.step_count();
  require(t_belief >= 0 && t_belief < T, "t must lie inside the trajectory");
  const PredictorNet physics = load_predictor(physics_path);

  auto kind = baseline_from_name(baseline);
  require(kind.has_value(), "unknown baseline '" + baseline + "'");

  std::vector<JointType> relations;
  if (baseline_needs_belief(*kind)) {
    require(!belief_path.empty(), "baseline " + baseline + " needs --belief");
    BeliefNet net = load_belief(belief_path).net;
    if (*kind == BaselineKind::BeliefFull) {
      const auto history = belief_history(truth, t_belief, net);
      relations = assign_relations(truth.states[t_belief], *kind, &history.back());
    } else if (t_belief >= 1) {
      BeliefState st = initial_belief(truth.states[0].object_count(), net.recurrent_hidden(),
                                      truth.states[t_belief - 1].time);
      st = belief_step(st, truth.states[t_belief - 1], truth.states[t_belief], truth.dt, net);
      relations = assign_relations(truth.states[t_belief], *kind, &st);
    } else {
      relations.assign(pair_count(truth.states[0].object_count()), JointType::NoJoint);
    }
  } else {
    relations = assign_relations(truth.states[t_belief], *kind);
  }

  const int steps = horizon > 0 ? std::min(horizon, T - t_belief) : T - t_belief;
  Trajectory truth_rest;
  truth_rest.dt = truth.dt;
  truth_rest.states.assign(truth.states.begin() + t_belief,
                           truth.states.begin() + t_belief + steps + 1);
  truth_rest.controls.assign(truth.controls.begin() + t_belief,
                             truth.controls.begin() + t_belief + steps);

  const Trajectory pred =
      rollout(truth.states[t_belief], relations, truth_rest.controls, physics, steps, truth.dt);
  write_trajectory_svg(out_path, truth_rest, pred);
  std::cout << "error: " << trajectory_error_cm(pred, truth_rest) << " cm\n";
  std::cout << "rendered " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learnable push dynamics with online relation inference"};
  app.require_subcommand(1);

  std::string preset, config_path, out, tag = "results";
  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("gen-data", "simulate scenes and write dataset files");
  gen->add_option("--preset", preset, "generation preset")->required();
  gen->add_option("--config", config_path, "key=value overrides");
  gen->add_option("--seed", seed, "random seed");
  gen->add_option("--out", out, "output directory")->required();

  std::string train_path, val_path, data_path, physics_path, belief_path, belief_1step_path;
  std::string variant = "full", baseline;
  int trajectory = 0, t_belief = 0, horizon = 0;

  auto* tp = app.add_subcommand("train-physics", "train the physics predictor");
  tp->add_option("--preset", preset, "training preset")->required();
  tp->add_option("--config", config_path, "key=value overrides");
  tp->add_option("--seed", seed, "random seed");
  tp->add_option("--train", train_path, "training dataset")->required();
  tp->add_option("--val", val_path, "validation dataset")->required();
  tp->add_option("--out", out, "checkpoint path")->required();

  auto* tb = app.add_subcommand("train-belief", "train the relation-inference network");
  tb->add_option("--preset", preset, "training preset")->required();
  tb->add_option("--config", config_path, "key=value overrides");
  tb->add_option("--seed", seed, "random seed");
  tb->add_option("--train", train_path, "training dataset")->required();
  tb->add_option("--val", val_path, "validation dataset")->required();
  tb->add_option("--variant", variant, "full or 1step");
  tb->add_option("--out", out, "checkpoint path")->required();

  auto* ev = app.add_subcommand("eval", "run the baseline comparison protocol");
  ev->add_option("--preset", preset, "evaluation preset")->required();
  ev->add_option("--config", config_path, "key=value overrides");
  ev->add_option("--seed", seed, "accepted for interface symmetry; evaluation is deterministic");
  ev->add_option("--data", data_path, "test dataset")->required();
  ev->add_option("--physics", physics_path, "physics checkpoint")->required();
  ev->add_option("--belief", belief_path, "belief checkpoint");
  ev->add_option("--belief-1step", belief_1step_path, "one-step belief checkpoint");
  ev->add_option("--baseline", baseline, "restrict to a single baseline");
  ev->add_option("--out", out, "results directory")->required();
  ev->add_option("--tag", tag, "table name prefix");

  auto* ro = app.add_subcommand("rollout", "render one real-vs-predicted trajectory");
  ro->add_option("--data", data_path, "dataset")->required();
  ro->add_option("--physics", physics_path, "physics checkpoint")->required();
  ro->add_option("--belief", belief_path, "belief checkpoint");
  ro->add_option("--trajectory", trajectory, "trajectory index");
  ro->add_option("--baseline", baseline, "relation source")->required();
  ro->add_option("--t", t_belief, "belief timepoint");
  ro->add_option("--horizon", horizon, "rollout steps (0 = to the end)");
  ro->add_option("--seed", seed, "accepted for interface symmetry");
  ro->add_option("--out", out, "output SVG path")->required();

  std::vector<std::string> inspect_paths;
  auto* in = app.add_subcommand("inspect", "describe dataset or checkpoint files");
  in->add_option("files", inspect_paths, "files to describe")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(preset, config_path, seed, out);
    if (tp->parsed())
      return cmd_train_physics(preset, config_path, seed, train_path, val_path, out);
    if (tb->parsed())
      return cmd_train_belief(preset, config_path, seed, train_path, val_path, variant, out);
    if (ev->parsed())
      return cmd_eval(preset, config_path, data_path, physics_path, belief_path,
                      belief_1step_path, baseline, out, tag);
    if (ro->parsed())
      return cmd_rollout(data_path, physics_path, belief_path, trajectory, baseline, t_belief,
                         horizon, out);
    if (in->parsed()) {
      for (const auto& p : inspect_paths) std::cout << p << ":\n" << describe_file(p);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
