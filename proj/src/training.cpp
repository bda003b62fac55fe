#include "pushrel/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>

#include "pushrel/error.hpp"
#include "pushrel/metrics.hpp"
#include "pushrel/parallel.hpp"
#include "pushrel/rng.hpp"
#include "pushrel/sim.hpp"

namespace pushrel {

void TrainConfig::validate() const {
  require(batch_size >= 1 && belief_batch_size >= 1, "batch sizes must be >= 1");
  require(lr > 0.0, "lr must be positive");
  require(decay_factor > 0.0 && decay_factor < 1.0, "decay_factor must be in (0, 1)");
  require(patience >= 1, "patience must be >= 1");
  require(max_epochs >= 1, "max_epochs must be >= 1");
  require(physics_epoch_fraction > 0.0 && physics_epoch_fraction <= 1.0,
          "physics_epoch_fraction must be in (0, 1]");
  require(loss_window_lo >= 0 && loss_window_hi >= loss_window_lo &&
              loss_window_hi <= sequence_length,
          "loss window must lie within the sequence");
  require(validate_every >= 1, "validate_every must be >= 1");
}

void write_report_csv(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open " + path + " for writing");
  out << "epoch,train_loss,val_score,lr\n";
  out << std::setprecision(10);
  for (const auto& r : report.rows)
    out << r.epoch << "," << r.train_loss << "," << r.val_score << "," << r.lr << "\n";
  require(out.good(), "write failed for " + path);
}

double evaluate_validation(const PredictorNet& net, const Dataset& validation) {
  require(!validation.trajectories.empty(), "validation set is empty");
  std::vector<double> sums(validation.trajectories.size(), 0.0);
  std::vector<long> counts(validation.trajectories.size(), 0);
  parallel_for(validation.trajectories.size(), [&](std::size_t ti) {
    const Trajectory& truth = validation.trajectories[ti];
    const auto relations = ground_truth_relations(truth.states[0]);
    Trajectory pred = rollout(truth.states[0], relations, truth.controls, net,
                              truth.step_count(), truth.dt);
    double sum = 0.0;
    long count = 0;
    const int n = truth.states[0].object_count();
    for (std::size_t t = 1; t < truth.states.size(); ++t) {
      for (int i = 0; i < n; ++i) {
        if (truth.states[t].objects[i].controlled) continue;
        sum += (pred.states[t].objects[i].position - truth.states[t].objects[i].position)
                   .norm();
        ++count;
      }
    }
    sums[ti] = sum;
    counts[ti] = count;
  });
  double sum = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    sum += sums[i];
    count += counts[i];
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double evaluate_validation(const BeliefNet& net, const Dataset& validation, int sequence_length,
                           bool one_step) {
  require(!validation.trajectories.empty(), "validation set is empty");
  std::vector<const Trajectory*> all;
  for (const auto& traj : validation.trajectories) all.push_back(&traj);
  const auto dists = belief_eval_batch(net, all, sequence_length, one_step);
  double sum = 0.0;
  for (std::size_t ti = 0; ti < dists.size(); ++ti) {
    sum += relation_accuracy(classify_distribution(dists[ti]),
                             validation.trajectories[ti].states[0])
               .raw;
  }
  return 1.0 - sum / static_cast<double>(dists.size());
}

namespace {

struct SampleIndex {
  int traj;
  int t;
};

double gaussian(Rng& rng) {
  // Box-Muller; the log argument is kept away from zero.
  const double u = std::max(rng.uniform(), 1e-12);
  const double v = rng.uniform();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

// Velocity normalization statistics over every free-object target in the
// training set.
VelocityNorm compute_norm(const Dataset& train) {
  double sum[2] = {0.0, 0.0};
  double sq[2] = {0.0, 0.0};
  long count = 0;
  for (const auto& traj : train.trajectories) {
    for (std::size_t t = 1; t < traj.states.size(); ++t) {
      for (const auto& o : traj.states[t].objects) {
        if (o.controlled) continue;
        sum[0] += o.velocity.x;
        sum[1] += o.velocity.y;
        sq[0] += o.velocity.x * o.velocity.x;
        sq[1] += o.velocity.y * o.velocity.y;
        ++count;
      }
    }
  }
  VelocityNorm norm;
  require(count > 0, "training set has no free-object targets");
  for (int k = 0; k < 2; ++k) {
    norm.mean[k] = sum[k] / static_cast<double>(count);
    const double var = sq[k] / static_cast<double>(count) - norm.mean[k] * norm.mean[k];
    norm.stddev[k] = std::sqrt(std::max(var, 1e-16));
  }
  return norm;
}

}  // namespace

PhysicsTrainResult train_physics(const Dataset& train, const Dataset& validation,
                                 const TrainConfig& cfg) {
  cfg.validate();
  require(!train.trajectories.empty(), "train_physics: empty dataset");

  PredictorNet net{StackSizes::standard()};
  net.init(cfg.seed);
  net.norm = compute_norm(train);

  std::vector<ParamRef> params;
  net.collect_params(params);
  AdamOptimizer opt({cfg.lr});
  opt.attach(params);

  // Precomputed per-trajectory relation attributes (shared by all samples).
  std::vector<std::vector<std::array<double, 4>>> traj_attrs;
  for (const auto& traj : train.trajectories)
    traj_attrs.push_back(hard_attrs(ground_truth_relations(traj.states[0])));

  // Joint-connected components, so position noise moves a linked group
  // rigidly. Independent offsets would violate the anchors and the
  // re-simulated targets would be dominated by constraint corrections.
  std::vector<std::vector<int>> traj_groups;
  for (const auto& traj : train.trajectories) {
    const int n = traj.states[0].object_count();
    std::vector<int> root(n);
    for (int i = 0; i < n; ++i) root[i] = i;
    auto find = [&](int x) {
      while (root[x] != x) x = root[x] = root[root[x]];
      return x;
    };
    for (const auto& j : traj.states[0].joints) root[find(j.a)] = find(j.b);
    std::vector<int> group(n);
    for (int i = 0; i < n; ++i) group[i] = find(i);
    traj_groups.push_back(std::move(group));
  }

  std::vector<SampleIndex> samples;
  for (std::size_t ti = 0; ti < train.trajectories.size(); ++ti)
    for (int t = 0; t < train.trajectories[ti].step_count(); ++t)
      samples.push_back({static_cast<int>(ti), t});

  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  TrainReport report;
  std::vector<double> val_history;
  PredictorNet best = net;
  double best_score = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  double lr = cfg.lr;

  const std::size_t per_epoch = std::max<std::size_t>(
      1, static_cast<std::size_t>(static_cast<double>(samples.size()) *
                                  cfg.physics_epoch_fraction));

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(samples);
    double loss_sum = 0.0;
    long loss_batches = 0;

    for (std::size_t start = 0; start < per_epoch; start += cfg.batch_size) {
      const std::size_t end = std::min(per_epoch, start + cfg.batch_size);
      std::vector<SceneState> views(end - start);
      std::vector<BatchSample> batch_samples;
      std::vector<SceneState> targets(end - start);
      for (std::size_t s = start; s < end; ++s) {
        const SampleIndex& si = samples[s];
        const Trajectory& traj = train.trajectories[si.traj];
        views[s - start] = traj.states[si.t];
        SceneState& view = views[s - start];
        const int pusher = view.pusher_index();
        const std::vector<int>& group = traj_groups[si.traj];
        std::vector<Vec2> group_offset(view.object_count(), Vec2{0.0, 0.0});
        std::vector<std::uint8_t> drawn(view.object_count(), 0);
        for (int i = 0; i < view.object_count(); ++i) {
          if (i == pusher) continue;
          if (!drawn[group[i]]) {
            group_offset[group[i]] = {cfg.position_noise * gaussian(rng),
                                      cfg.position_noise * gaussian(rng)};
            drawn[group[i]] = 1;
          }
          view.objects[i].position += group_offset[group[i]];
          view.objects[i].velocity.x += cfg.velocity_noise * gaussian(rng);
          view.objects[i].velocity.y += cfg.velocity_noise * gaussian(rng);
        }
        try {
          targets[s - start] = step(view, traj.controls[si.t], train.sim);
        } catch (const Error&) {
          // a pathological perturbation; fall back to the clean transition
          view = traj.states[si.t];
          targets[s - start] = traj.states[si.t + 1];
        }
        view.objects[pusher].velocity = traj.controls[si.t];
        batch_samples.push_back({&view, traj_attrs[si.traj].data(), true});
      }
      GraphBatch batch = build_graph_batch(batch_samples);

      StackCaches caches;
      MlpCache head_cache;
      Tensor2 pred = net.forward(batch, &caches, &head_cache);

      // Normalized-space MSE over free objects.
      Tensor2 grad(pred.rows, pred.cols);
      double loss = 0.0;
      long cells = 0;
      for (std::size_t s = start; s < end; ++s) {
        const SceneState& next = targets[s - start];
        const int offset = batch.sample_offset[s - start];
        for (int i = 0; i < next.object_count(); ++i) {
          if (next.objects[i].controlled) continue;
          const double tx = (next.objects[i].velocity.x - net.norm.mean[0]) / net.norm.stddev[0];
          const double ty = (next.objects[i].velocity.y - net.norm.mean[1]) / net.norm.stddev[1];
          const double ex = pred(offset + i, 0) - tx;
          const double ey = pred(offset + i, 1) - ty;
          loss += ex * ex + ey * ey;
          grad(offset + i, 0) = ex;
          grad(offset + i, 1) = ey;
          cells += 2;
        }
      }
      if (cells == 0) continue;
      loss /= static_cast<double>(cells);
      for (double& g : grad.data) g *= 2.0 / static_cast<double>(cells);

      net.zero_grads();
      net.backward(batch, caches, head_cache, grad);
      opt.step(params);
      loss_sum += loss;
      ++loss_batches;
    }

    EpochRow row;
    row.epoch = epoch;
    row.train_loss = loss_batches > 0 ? loss_sum / static_cast<double>(loss_batches) : 0.0;
    row.lr = lr;

    if (epoch % cfg.validate_every == 0 || epoch == cfg.max_epochs) {
      const double score = evaluate_validation(net, validation);
      row.val_score = score;
      if (score < best_score) {
        best_score = score;
        best = net;
        best_epoch = epoch;
      }
      val_history.push_back(score);
      lr = decay_on_plateau(lr, val_history, cfg.patience, cfg.decay_factor);
      opt.set_learning_rate(lr);
    } else {
      row.val_score = val_history.empty() ? 0.0 : val_history.back();
    }
    report.rows.push_back(row);
  }

  report.best_epoch = best_epoch;
  report.best_score = best_score;
  return {std::move(best), std::move(report)};
}

BeliefTrainResult train_belief(const Dataset& train, const Dataset& validation,
                               const TrainConfig& cfg, bool one_step_variant) {
  cfg.validate();
  require(!train.trajectories.empty(), "train_belief: empty dataset");

  BeliefNet net{StackSizes::standard(), 100};
  net.init(cfg.seed + 1);

  std::vector<ParamRef> params;
  net.collect_params(params);
  AdamOptimizer opt({cfg.lr});
  opt.attach(params);

  Rng rng(cfg.seed ^ 0xc2b2ae3d27d4eb4full);
  TrainReport report;
  std::vector<double> val_history;
  BeliefNet best = net;
  double best_score = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  double lr = cfg.lr;
  const BeliefLossWindow window{cfg.loss_window_lo, cfg.loss_window_hi};

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    for (int b = 0; b < cfg.belief_batches_per_epoch; ++b) {
      std::vector<const Trajectory*> batch;
      for (int k = 0; k < cfg.belief_batch_size; ++k)
        batch.push_back(&train.trajectories[rng.pick(train.size())]);
      net.zero_grads();
      const BeliefBatchStats stats =
          belief_train_batch(net, batch, cfg.sequence_length, window, one_step_variant);
      opt.step(params);
      loss_sum += stats.loss;
    }

    EpochRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(cfg.belief_batches_per_epoch);
    row.lr = lr;

    if (epoch % cfg.validate_every == 0 || epoch == cfg.max_epochs) {
      const double score =
          evaluate_validation(net, validation, cfg.sequence_length, one_step_variant);
      row.val_score = score;
      if (score < best_score) {
        best_score = score;
        best = net;
        best_epoch = epoch;
      }
      val_history.push_back(score);
      lr = decay_on_plateau(lr, val_history, cfg.patience, cfg.decay_factor);
      opt.set_learning_rate(lr);
    } else {
      row.val_score = val_history.empty() ? 0.0 : val_history.back();
    }
    report.rows.push_back(row);
  }

  report.best_epoch = best_epoch;
  report.best_score = best_score;
  return {std::move(best), std::move(report), one_step_variant};
}

}  // namespace pushrel
