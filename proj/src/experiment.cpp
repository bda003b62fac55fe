#include "pushrel/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "pushrel/error.hpp"
#include "pushrel/io.hpp"
#include "pushrel/parallel.hpp"
#include "pushrel/svg.hpp"

namespace pushrel {

namespace {

struct TrajectoryCells {
  // one error per (baseline, timepoint), keyed in the config's order
  std::vector<std::vector<double>> error;  // [baseline][tp]
  std::vector<std::uint8_t> valid;         // per tp
  std::vector<AccuracyPoint> accuracy;
};

Trajectory slice_trajectory(const Trajectory& traj, int from, int steps) {
  Trajectory out;
  out.dt = traj.dt;
  out.environment_mode = traj.environment_mode;
  out.states.assign(traj.states.begin() + from, traj.states.begin() + from + steps + 1);
  out.controls.assign(traj.controls.begin() + from, traj.controls.begin() + from + steps);
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  require(!cfg.eval.baselines.empty(), "no baselines requested");
  require(!cfg.eval.timepoints.empty(), "no timepoints requested");

  std::vector<std::string> missing;
  if (!std::filesystem::exists(cfg.dataset_path)) missing.push_back(cfg.dataset_path);
  if (!std::filesystem::exists(cfg.physics_checkpoint))
    missing.push_back(cfg.physics_checkpoint);
  const bool wants_full =
      std::count(cfg.eval.baselines.begin(), cfg.eval.baselines.end(), BaselineKind::BeliefFull);
  const bool wants_1step = std::count(cfg.eval.baselines.begin(), cfg.eval.baselines.end(),
                                      BaselineKind::BeliefOneStep);
  if (wants_full &&
      (cfg.belief_checkpoint.empty() || !std::filesystem::exists(cfg.belief_checkpoint)))
    missing.push_back(cfg.belief_checkpoint.empty() ? "<belief checkpoint>"
                                                    : cfg.belief_checkpoint);
  if (wants_1step && (cfg.belief_1step_checkpoint.empty() ||
                      !std::filesystem::exists(cfg.belief_1step_checkpoint)))
    missing.push_back(cfg.belief_1step_checkpoint.empty() ? "<belief_1step checkpoint>"
                                                          : cfg.belief_1step_checkpoint);
  if (!missing.empty()) {
    std::string msg = "missing inputs:";
    for (const auto& m : missing) msg += " " + m;
    fail(msg);
  }

  const Dataset data = load_dataset(cfg.dataset_path);
  require(data.size() > 0, "test dataset is empty");
  const PredictorNet physics = load_predictor(cfg.physics_checkpoint);
  BeliefNet belief_full, belief_1step;
  if (wants_full) belief_full = load_belief(cfg.belief_checkpoint).net;
  if (wants_1step) belief_1step = load_belief(cfg.belief_1step_checkpoint).net;

  const auto& baselines = cfg.eval.baselines;
  const auto& timepoints = cfg.eval.timepoints;
  const int max_tp = *std::max_element(timepoints.begin(), timepoints.end());

  std::vector<TrajectoryCells> cells(data.size());
  parallel_for(static_cast<std::size_t>(data.size()), [&](std::size_t ti) {
    const Trajectory& truth = data.trajectories[static_cast<int>(ti)];
    const int T = truth.step_count();
    TrajectoryCells& out = cells[ti];
    out.error.assign(baselines.size(), std::vector<double>(timepoints.size(), 0.0));
    out.valid.assign(timepoints.size(), 0);

    std::vector<BeliefState> history;
    if (wants_full) {
      history = belief_history(truth, std::min(max_tp, T), belief_full);
      for (const auto& st : history)
        out.accuracy.push_back(relation_accuracy(classify_relations(st), truth.states[0]));
    }

    for (std::size_t pi = 0; pi < timepoints.size(); ++pi) {
      const int t = timepoints[pi];
      if (t < 0 || t >= T) continue;  // no remainder to predict
      const int steps =
          cfg.eval.horizon > 0 ? std::min(cfg.eval.horizon, T - t) : T - t;
      const Trajectory truth_rest = slice_trajectory(truth, t, steps);
      out.valid[pi] = 1;

      for (std::size_t bi = 0; bi < baselines.size(); ++bi) {
        std::vector<JointType> relations;
        switch (baselines[bi]) {
          case BaselineKind::PropNetGT:
          case BaselineKind::PropNetF:
          case BaselineKind::PropNetN:
            relations = assign_relations(truth.states[t], baselines[bi]);
            break;
          case BaselineKind::BeliefFull: {
            const BeliefState& st = history[std::min<std::size_t>(t, history.size() - 1)];
            relations = assign_relations(truth.states[t], BaselineKind::BeliefFull, &st);
            break;
          }
          case BaselineKind::BeliefOneStep: {
            if (t >= 1) {
              BeliefState st = initial_belief(truth.states[0].object_count(),
                                              belief_1step.recurrent_hidden(),
                                              truth.states[t - 1].time);
              st = belief_step(st, truth.states[t - 1], truth.states[t], truth.dt,
                               belief_1step);
              relations = assign_relations(truth.states[t], BaselineKind::BeliefOneStep, &st);
            } else {
              relations.assign(pair_count(truth.states[0].object_count()), JointType::NoJoint);
            }
            break;
          }
        }
        const Trajectory pred = rollout(truth.states[t], relations, truth_rest.controls,
                                        physics, steps, truth.dt);
        out.error[bi][pi] = trajectory_error_cm(pred, truth_rest);
      }
    }
  });

  // Collect and write in canonical order.
  ExperimentResult result;
  result.timepoints = timepoints;
  for (std::size_t bi = 0; bi < baselines.size(); ++bi) {
    for (std::size_t pi = 0; pi < timepoints.size(); ++pi) {
      auto& bucket = result.error_cm[baselines[bi]][timepoints[pi]];
      for (int ti = 0; ti < data.size(); ++ti)
        if (cells[ti].valid[pi]) bucket.push_back(cells[ti].error[bi][pi]);
    }
  }
  for (int ti = 0; ti < data.size(); ++ti) result.accuracy_curves.push_back(cells[ti].accuracy);

  std::filesystem::create_directories(cfg.out_dir);
  const std::string base = cfg.out_dir + "/" + cfg.tag;

  {
    std::ofstream out(base + "_results.csv");
    require(out.good(), "cannot write " + base + "_results.csv");
    out << "trajectory_id,baseline,t_belief,error_cm\n";
    out << std::fixed << std::setprecision(6);
    for (int ti = 0; ti < data.size(); ++ti) {
      for (std::size_t bi = 0; bi < baselines.size(); ++bi) {
        for (std::size_t pi = 0; pi < timepoints.size(); ++pi) {
          if (!cells[ti].valid[pi]) continue;
          out << ti << "," << baseline_name(baselines[bi]) << "," << timepoints[pi] << ","
              << cells[ti].error[bi][pi] << "\n";
        }
      }
    }
  }

  {
    std::ofstream out(base + "_summary.csv");
    require(out.good(), "cannot write " + base + "_summary.csv");
    out << "baseline,t_belief,mean_error_cm,std_error_cm,stderr_cm,n\n";
    out << std::fixed << std::setprecision(6);
    for (std::size_t bi = 0; bi < baselines.size(); ++bi) {
      for (std::size_t pi = 0; pi < timepoints.size(); ++pi) {
        const auto& bucket = result.error_cm[baselines[bi]][timepoints[pi]];
        if (bucket.empty()) continue;
        const MeanStd ms = mean_std(bucket);
        out << baseline_name(baselines[bi]) << "," << timepoints[pi] << "," << ms.mean << ","
            << ms.stddev << "," << ms.stderr_mean << "," << ms.n << "\n";
      }
    }
  }

  if (wants_full) {
    std::ofstream out(base + "_accuracy.csv");
    require(out.good(), "cannot write " + base + "_accuracy.csv");
    out << "trajectory_id,t,raw_accuracy,equivalence_accuracy\n";
    out << std::fixed << std::setprecision(6);
    for (int ti = 0; ti < data.size(); ++ti) {
      for (std::size_t t = 0; t < cells[ti].accuracy.size(); ++t) {
        out << ti << "," << t << "," << cells[ti].accuracy[t].raw << ","
            << cells[ti].accuracy[t].equivalence << "\n";
      }
    }
  }

  // Mean error per baseline over belief timepoints.
  {
    std::vector<PlotSeries> series;
    for (std::size_t bi = 0; bi < baselines.size(); ++bi) {
      PlotSeries s;
      s.label = baseline_name(baselines[bi]);
      for (std::size_t pi = 0; pi < timepoints.size(); ++pi) {
        const auto& bucket = result.error_cm[baselines[bi]][timepoints[pi]];
        if (bucket.empty()) continue;
        s.x.push_back(timepoints[pi]);
        s.y.push_back(mean_std(bucket).mean);
      }
      series.push_back(std::move(s));
    }
    write_line_plot_svg(base + "_error_vs_t.svg", "remaining-trajectory error",
                        "belief timepoint (steps)", "error (cm)", series);
  }

  if (wants_full && !result.accuracy_curves.empty()) {
    std::size_t max_len = 0;
    for (const auto& c : result.accuracy_curves) max_len = std::max(max_len, c.size());
    PlotSeries raw, equiv;
    raw.label = "raw";
    equiv.label = "equivalence-aware";
    equiv.dashed = true;
    for (std::size_t t = 0; t < max_len; ++t) {
      double sr = 0.0, se = 0.0;
      int n = 0;
      for (const auto& c : result.accuracy_curves) {
        if (t >= c.size()) continue;
        sr += c[t].raw;
        se += c[t].equivalence;
        ++n;
      }
      if (n == 0) continue;
      raw.x.push_back(static_cast<double>(t));
      raw.y.push_back(sr / n);
      equiv.x.push_back(static_cast<double>(t));
      equiv.y.push_back(se / n);
    }
    write_line_plot_svg(base + "_accuracy_vs_t.svg", "relation accuracy over observations",
                        "observation step", "accuracy", {raw, equiv});
  }

  return result;
}

}  // namespace pushrel
