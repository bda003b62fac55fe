#include "pushrel/belief.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <cstring>
#include <utility>

#include "pushrel/error.hpp"

namespace pushrel {

namespace {

// Directed edge index inside an ungated full graph: receiver-major with
// ascending senders.
int directed_edge_index(int n, int recv, int send) {
  return recv * (n - 1) + (send < recv ? send : send - 1);
}

void softmax_rows(Tensor2& t) {
  for (int r = 0; r < t.rows; ++r) {
    double* row = t.row(r);
    double mx = row[0];
    for (int j = 1; j < t.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < t.cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (int j = 0; j < t.cols; ++j) row[j] /= sum;
  }
}

// Observed transition fed to the belief stack: positions at t, velocities
// finite-differenced from t-1.
SceneState observation_view(const SceneState& prev, const SceneState& cur, double dt) {
  SceneState view = cur;
  for (int i = 0; i < view.object_count(); ++i) {
    view.objects[i].velocity = (cur.objects[i].position - prev.objects[i].position) * (1.0 / dt);
  }
  return view;
}

struct StepInputs {
  // Owned view scenes plus per-pair soft attributes, kept alive for the batch.
  std::vector<SceneState> views;
  std::vector<std::vector<std::array<double, 4>>> attrs;
  std::vector<int> pair_offset;  // first stacked-pair row per sample
  int total_pairs = 0;
  GraphBatch batch;
};

struct StepCaches {
  StackCaches stack;
  LstmCache lstm;  // its input holds the directed-edge LSTM rows
  MlpCache cls;
};

struct StepResult {
  Tensor2 h_pair, c_pair, dist;
};

// One belief update over a stack of samples. h/c/dist are stacked pair rows.
StepResult belief_forward(const BeliefNet& net, StepInputs& in, const Tensor2& h_pair,
                          const Tensor2& c_pair, StepCaches* caches) {
  PropagationState st = net.stack().run(in.batch, caches ? &caches->stack : nullptr);

  const int d = net.stack().sizes().code_dim;
  const int total_pairs = in.total_pairs;
  Tensor2 x_dir(2 * total_pairs, d);
  Tensor2 h_dir(2 * total_pairs, net.recurrent_hidden());
  Tensor2 c_dir(2 * total_pairs, net.recurrent_hidden());
  for (std::size_t si = 0; si < in.views.size(); ++si) {
    const int n = in.views[si].object_count();
    const int eoff = in.batch.sample_edge_offset[si];
    const int poff = in.pair_offset[si];
    int q = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j, ++q) {
        const int row = poff + q;
        std::memcpy(x_dir.row(2 * row), st.effects.row(eoff + directed_edge_index(n, i, j)),
                    sizeof(double) * d);
        std::memcpy(x_dir.row(2 * row + 1),
                    st.effects.row(eoff + directed_edge_index(n, j, i)), sizeof(double) * d);
        std::memcpy(h_dir.row(2 * row), h_pair.row(row),
                    sizeof(double) * net.recurrent_hidden());
        std::memcpy(h_dir.row(2 * row + 1), h_pair.row(row),
                    sizeof(double) * net.recurrent_hidden());
        std::memcpy(c_dir.row(2 * row), c_pair.row(row),
                    sizeof(double) * net.recurrent_hidden());
        std::memcpy(c_dir.row(2 * row + 1), c_pair.row(row),
                    sizeof(double) * net.recurrent_hidden());
      }
    }
  }

  // TODO: the two directed rows of a pair share h, so the hidden-side matmul
  // could run on P rows instead of 2P and be duplicated afterwards.
  Lstm::Out out = net.cell().step(std::move(x_dir), std::move(h_dir), std::move(c_dir),
                                  caches ? &caches->lstm : nullptr);

  StepResult res;
  res.h_pair = Tensor2(total_pairs, net.recurrent_hidden());
  res.c_pair = Tensor2(total_pairs, net.recurrent_hidden());
  for (int row = 0; row < total_pairs; ++row) {
    double* h = res.h_pair.row(row);
    double* c = res.c_pair.row(row);
    const double* h0 = out.h.row(2 * row);
    const double* h1 = out.h.row(2 * row + 1);
    const double* c0 = out.c.row(2 * row);
    const double* c1 = out.c.row(2 * row + 1);
    for (int k = 0; k < net.recurrent_hidden(); ++k) {
      h[k] = 0.5 * (h0[k] + h1[k]);
      c[k] = 0.5 * (c0[k] + c1[k]);
    }
  }
  res.dist = net.classifier().forward(res.h_pair, caches ? &caches->cls : nullptr);
  softmax_rows(res.dist);
  return res;
}

StepInputs make_step_inputs(const std::vector<const SceneState*>& prevs,
                            const std::vector<const SceneState*>& curs,
                            const std::vector<const Tensor2*>& dists, double dt) {
  StepInputs in;
  std::vector<BatchSample> samples;
  in.views.reserve(prevs.size());
  in.attrs.resize(prevs.size());
  for (std::size_t si = 0; si < prevs.size(); ++si) {
    in.views.push_back(observation_view(*prevs[si], *curs[si], dt));
    const int n = in.views.back().object_count();
    const int pairs = pair_count(n);
    in.attrs[si].resize(pairs);
    for (int q = 0; q < pairs; ++q) {
      const double* row = dists[si]->row(q);
      in.attrs[si][q] = {row[0], row[1], row[2], row[3]};
    }
    in.pair_offset.push_back(in.total_pairs);
    in.total_pairs += pairs;
  }
  for (std::size_t si = 0; si < prevs.size(); ++si) {
    samples.push_back({&in.views[si], in.attrs[si].data(), /*gate=*/false});
  }
  in.batch = build_graph_batch(samples);
  return in;
}

}  // namespace

BeliefNet::BeliefNet(const StackSizes& sizes, int recurrent_hidden)
    : stack_("belief", sizes),
      cell_("belief/cell", {sizes.code_dim, recurrent_hidden}),
      classifier_("belief/classifier", {recurrent_hidden, {}, kNumJointTypes}) {}

void BeliefNet::init(std::uint64_t seed) {
  Rng rng(seed);
  stack_.init_glorot(rng);
  cell_.init_glorot(rng);
  // Zero classifier: the initial output is the uniform prior.
  classifier_.init_zero();
}

void BeliefNet::zero_grads() {
  stack_.zero_grads();
  cell_.zero_grads();
  classifier_.zero_grads();
}

void BeliefNet::collect_params(std::vector<ParamRef>& out) {
  stack_.collect_params(out);
  cell_.collect_params(out);
  classifier_.collect_params(out);
}

BeliefState initial_belief(int n_objects, int hidden_width, int time) {
  BeliefState st;
  st.n_objects = n_objects;
  const int pairs = pair_count(n_objects);
  st.hidden = Tensor2(pairs, hidden_width);
  st.cell = Tensor2(pairs, hidden_width);
  st.dist = Tensor2(pairs, kNumJointTypes);
  st.dist.fill(1.0 / kNumJointTypes);
  st.object_hidden = Tensor2(n_objects, hidden_width);
  st.time = time;
  return st;
}

BeliefState belief_step(const BeliefState& state, const SceneState& prev,
                        const SceneState& cur, double dt, const BeliefNet& net) {
  require(cur.time == prev.time + 1,
          "belief_step: observations must be one step apart, got " +
              std::to_string(prev.time) + " -> " + std::to_string(cur.time));
  require(state.time == prev.time, "belief_step: belief state is stale");
  require(state.n_objects == cur.object_count(), "belief_step: object count mismatch");

  // The recurrent width of `state` must match the network.
  require(state.hidden.cols == net.recurrent_hidden(), "belief_step: hidden width mismatch");

  StepInputs in = make_step_inputs({&prev}, {&cur}, {&state.dist}, dt);
  StepResult res = belief_forward(net, in, state.hidden, state.cell, nullptr);

  BeliefState out;
  out.n_objects = state.n_objects;
  out.hidden = std::move(res.h_pair);
  out.cell = std::move(res.c_pair);
  out.dist = std::move(res.dist);
  out.object_hidden = state.object_hidden;
  out.time = cur.time;
  return out;
}

Tensor2 one_step_belief(const SceneState& prev, const SceneState& cur, double dt,
                        const BeliefNet& net) {
  BeliefState fresh = initial_belief(cur.object_count(), net.recurrent_hidden(), prev.time);
  return belief_step(fresh, prev, cur, dt, net).dist;
}

std::vector<JointType> classify_distribution(const Tensor2& dist) {
  std::vector<JointType> out(dist.rows);
  for (int r = 0; r < dist.rows; ++r) {
    const double* row = dist.row(r);
    int best = 0;
    for (int k = 1; k < kNumJointTypes; ++k)
      if (row[k] > row[best]) best = k;
    out[r] = static_cast<JointType>(best);
  }
  return out;
}

std::vector<JointType> classify_relations(const BeliefState& state) {
  return classify_distribution(state.dist);
}

std::vector<BeliefState> belief_history(const Trajectory& traj, int upto_step,
                                        const BeliefNet& net) {
  require(!traj.states.empty(), "belief_history: empty trajectory");
  const int upto = std::min<int>(upto_step, traj.step_count());
  const int n = traj.states[0].object_count();
  std::vector<BeliefState> history;
  BeliefState st = initial_belief(n, net.recurrent_hidden(), traj.states[0].time);
  history.push_back(st);
  for (int t = 1; t <= upto; ++t) {
    st = belief_step(st, traj.states[t - 1], traj.states[t], traj.dt, net);
    history.push_back(st);
  }
  return history;
}

RegulatedRollout regulated_rollout(const std::vector<SceneState>& history, double dt,
                                   const std::vector<Vec2>& remaining_controls, int steps,
                                   const PredictorNet& predictor, const BeliefNet& belief) {
  require(!history.empty(), "regulated_rollout: history must contain the current state");
  const int n = history[0].object_count();
  BeliefState st = initial_belief(n, belief.recurrent_hidden(), history[0].time);
  for (std::size_t t = 1; t < history.size(); ++t)
    st = belief_step(st, history[t - 1], history[t], dt, belief);

  RegulatedRollout out;
  out.relations = classify_relations(st);
  out.predicted = rollout(history.back(), out.relations, remaining_controls, predictor,
                          steps, dt);
  return out;
}

namespace {

struct UnrollStep {
  Tensor2 h, c, dist;  // post-step stacked pair rows
};

struct TrajectoryLabels {
  std::vector<int> gt;  // per stacked pair row
};

}  // namespace

BeliefBatchStats belief_train_batch(BeliefNet& net,
                                    const std::vector<const Trajectory*>& batch, int seq_len,
                                    BeliefLossWindow window, bool one_step) {
  require(!batch.empty(), "belief_train_batch: empty batch");
  const int H = net.recurrent_hidden();
  const int D = net.stack().sizes().code_dim;

  // Stacked pair layout across trajectories.
  int total_pairs = 0;
  std::vector<int> pair_offset;
  std::vector<int> gt_labels;
  std::vector<int> traj_steps;
  for (const Trajectory* traj : batch) {
    const SceneState& s0 = traj->states[0];
    pair_offset.push_back(total_pairs);
    total_pairs += pair_count(s0.object_count());
    const auto rel = ground_truth_relations(s0);
    for (JointType jt : rel) gt_labels.push_back(static_cast<int>(jt));
    traj_steps.push_back(traj->step_count());
  }

  // Observation at step t of a trajectory, holding the last state when past
  // the end (masked from the loss).
  auto state_at = [&](const Trajectory& traj, int t) -> const SceneState& {
    const int last = static_cast<int>(traj.states.size()) - 1;
    return traj.states[std::min(t, last)];
  };

  const double dt = batch[0]->dt;

  // Steps past the loss window can never influence the loss.
  const int lo = std::max(1, window.lo);
  const int hi = std::min(seq_len, window.hi);
  const int t_max = hi;
  if (t_max < 1) return {};

  // Forward pass, storing per-step pair states and the assembled step inputs
  // (the backward sweep replays the same inputs).
  std::vector<UnrollStep> steps(static_cast<std::size_t>(t_max) + 1);
  std::vector<StepInputs> inputs(static_cast<std::size_t>(t_max) + 1);
  steps[0].h = Tensor2(total_pairs, H);
  steps[0].c = Tensor2(total_pairs, H);
  steps[0].dist = Tensor2(total_pairs, kNumJointTypes);
  steps[0].dist.fill(1.0 / kNumJointTypes);

  // One-step variant: no recurrent state and prior attributes every step, so
  // each observation is scored in isolation.
  Tensor2 prior(total_pairs, kNumJointTypes);
  prior.fill(1.0 / kNumJointTypes);

  auto step_inputs_at = [&](int t) {
    std::vector<const Tensor2*> dists;
    std::vector<Tensor2> dist_slices;
    std::vector<SceneState> prev_fix(batch.size()), cur_fix(batch.size());
    std::vector<const SceneState*> prev_ptr, cur_ptr;
    dist_slices.reserve(batch.size());
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
      prev_fix[bi] = state_at(*batch[bi], t - 1);
      cur_fix[bi] = state_at(*batch[bi], t);
      const int pairs = pair_count(batch[bi]->states[0].object_count());
      Tensor2 slice(pairs, kNumJointTypes);
      const Tensor2& src = one_step ? prior : steps[t - 1].dist;
      std::memcpy(slice.data.data(), src.row(pair_offset[bi]),
                  sizeof(double) * slice.data.size());
      dist_slices.push_back(std::move(slice));
    }
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
      prev_ptr.push_back(&prev_fix[bi]);
      cur_ptr.push_back(&cur_fix[bi]);
      dists.push_back(&dist_slices[bi]);
    }
    StepInputs in = make_step_inputs(prev_ptr, cur_ptr, dists, dt);
    return in;
  };

  for (int t = 1; t <= t_max; ++t) {
    // One-step training scores each window observation in isolation.
    if (one_step && t < lo) continue;
    Tensor2 h_in(total_pairs, H), c_in(total_pairs, H);
    if (!one_step) {
      h_in = steps[t - 1].h;
      c_in = steps[t - 1].c;
    }
    inputs[t] = step_inputs_at(t);
    StepResult res = belief_forward(net, inputs[t], h_in, c_in, nullptr);
    steps[t].h = std::move(res.h_pair);
    steps[t].c = std::move(res.c_pair);
    steps[t].dist = std::move(res.dist);
  }

  // Count loss cells first so gradient scaling is uniform.
  long counted = 0;
  double loss_sum = 0.0;
  for (int t = lo; t <= hi; ++t) {
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
      if (t > traj_steps[bi]) continue;  // padded, masked
      const int pairs = pair_count(batch[bi]->states[0].object_count());
      for (int q = 0; q < pairs; ++q) {
        const int row = pair_offset[bi] + q;
        loss_sum += -std::log(std::max(steps[t].dist(row, gt_labels[row]), 1e-300));
        ++counted;
      }
    }
  }
  BeliefBatchStats stats;
  stats.counted = counted;
  stats.loss = counted > 0 ? loss_sum / static_cast<double>(counted) : 0.0;
  if (counted == 0) return stats;

  // Backward through time with per-step recomputation. Gradients flow through
  // the recurrent state and, for the full variant, through the fed-back
  // distributions that become the next step's edge attributes.
  Tensor2 dh(total_pairs, H), dc(total_pairs, H);
  Tensor2 ddist(total_pairs, kNumJointTypes);  // w.r.t. dist at step t
  for (int t = t_max; t >= 1; --t) {
    if (one_step && t < lo) break;
    Tensor2 h_in(total_pairs, H), c_in(total_pairs, H);
    if (!one_step) {
      h_in = steps[t - 1].h;
      c_in = steps[t - 1].c;
    }
    StepInputs& in = inputs[t];
    StepCaches caches;
    StepResult res = belief_forward(net, in, h_in, c_in, &caches);

    // Gradient w.r.t. the classifier logits: cross-entropy inside the loss
    // window plus the softmax-transposed feedback carry.
    Tensor2 dlogits(total_pairs, kNumJointTypes);
    bool any_logit_grad = false;
    if (t >= lo && t <= hi) {
      any_logit_grad = true;
      for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        if (t > traj_steps[bi]) continue;
        const int pairs = pair_count(batch[bi]->states[0].object_count());
        for (int q = 0; q < pairs; ++q) {
          const int row = pair_offset[bi] + q;
          for (int k = 0; k < kNumJointTypes; ++k) {
            const double y = (k == gt_labels[row]) ? 1.0 : 0.0;
            dlogits(row, k) = (res.dist(row, k) - y) / static_cast<double>(counted);
          }
        }
      }
    }
    if (!one_step) {
      for (int row = 0; row < total_pairs; ++row) {
        double dot = 0.0;
        for (int k = 0; k < kNumJointTypes; ++k) dot += ddist(row, k) * res.dist(row, k);
        for (int k = 0; k < kNumJointTypes; ++k) {
          const double g = res.dist(row, k) * (ddist(row, k) - dot);
          if (g != 0.0) any_logit_grad = true;
          dlogits(row, k) += g;
        }
      }
    }

    Tensor2 dh_pair = dh;
    Tensor2 dc_pair = dc;
    if (any_logit_grad) {
      Tensor2 dh_cls = net.classifier().backward(caches.cls, dlogits);
      for (std::size_t i = 0; i < dh_pair.data.size(); ++i) dh_pair.data[i] += dh_cls.data[i];
    }

    // Through the direction average into the cell.
    Tensor2 dh_dir(2 * total_pairs, H), dc_dir(2 * total_pairs, H);
    for (int row = 0; row < total_pairs; ++row) {
      for (int k = 0; k < H; ++k) {
        dh_dir(2 * row, k) = dh_dir(2 * row + 1, k) = 0.5 * dh_pair(row, k);
        dc_dir(2 * row, k) = dc_dir(2 * row + 1, k) = 0.5 * dc_pair(row, k);
      }
    }
    Lstm::InGrads lstm_grads = net.cell().backward(caches.lstm, dh_dir, dc_dir);

    // Carry into the previous step's pair state.
    if (!one_step && t > 1) {
      for (int row = 0; row < total_pairs; ++row) {
        for (int k = 0; k < H; ++k) {
          dh(row, k) = lstm_grads.h(2 * row, k) + lstm_grads.h(2 * row + 1, k);
          dc(row, k) = lstm_grads.c(2 * row, k) + lstm_grads.c(2 * row + 1, k);
        }
      }
    } else {
      dh.zero();
      dc.zero();
    }

    // Effect gradients back through the stack.
    Tensor2 d_effects(in.batch.n_edges, D);
    for (std::size_t si = 0; si < in.views.size(); ++si) {
      const int n = in.views[si].object_count();
      const int eoff = in.batch.sample_edge_offset[si];
      const int poff = in.pair_offset[si];
      int q = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j, ++q) {
          const int row = poff + q;
          double* fwd = d_effects.row(eoff + directed_edge_index(n, i, j));
          double* bwd = d_effects.row(eoff + directed_edge_index(n, j, i));
          for (int k = 0; k < D; ++k) {
            fwd[k] += lstm_grads.input(2 * row, k);
            bwd[k] += lstm_grads.input(2 * row + 1, k);
          }
        }
      }
    }
    Tensor2 d_propagated(in.batch.n_objects, D);
    PropagationStack::InputGrads igrads =
        net.stack().backward(in.batch, caches.stack, d_effects, d_propagated);

    // Collect the gradient flowing into step t-1's distributions through the
    // edge attribute columns (features 4..7 of both directed edges). Step 1
    // reads the constant prior, so its carry is dropped.
    ddist.zero();
    if (!one_step && t > 1) {
      for (std::size_t si = 0; si < in.views.size(); ++si) {
        const int n = in.views[si].object_count();
        const int eoff = in.batch.sample_edge_offset[si];
        const int poff = in.pair_offset[si];
        int q = 0;
        for (int i = 0; i < n; ++i) {
          for (int j = i + 1; j < n; ++j, ++q) {
            const int row = poff + q;
            const double* fwd = igrads.edge_features.row(eoff + directed_edge_index(n, i, j));
            const double* bwd = igrads.edge_features.row(eoff + directed_edge_index(n, j, i));
            for (int k = 0; k < kNumJointTypes; ++k)
              ddist(row, k) += fwd[4 + k] + bwd[4 + k];
          }
        }
      }
    }
  }

  return stats;
}

std::vector<Tensor2> belief_eval_batch(const BeliefNet& net,
                                       const std::vector<const Trajectory*>& batch,
                                       int seq_len, bool one_step) {
  std::vector<Tensor2> finals(batch.size());
  const int H = net.recurrent_hidden();

  // Stack trajectories of equal effective length into one unroll.
  std::map<int, std::vector<std::size_t>> by_len;
  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const int upto = std::min(seq_len, batch[bi]->step_count());
    if (upto < 1) {
      finals[bi] = initial_belief(batch[bi]->states[0].object_count(), H).dist;
      continue;
    }
    by_len[upto].push_back(bi);
  }

  for (const auto& [upto, members] : by_len) {
    int total_pairs = 0;
    std::vector<int> pair_offset;
    for (std::size_t bi : members) {
      pair_offset.push_back(total_pairs);
      total_pairs += pair_count(batch[bi]->states[0].object_count());
    }
    const double dt = batch[members[0]]->dt;

    Tensor2 h(total_pairs, H), c(total_pairs, H);
    Tensor2 dist(total_pairs, kNumJointTypes);
    dist.fill(1.0 / kNumJointTypes);

    const int t_from = one_step ? upto : 1;
    for (int t = t_from; t <= upto; ++t) {
      std::vector<const SceneState*> prevs, curs;
      std::vector<const Tensor2*> dists;
      std::vector<Tensor2> slices;
      slices.reserve(members.size());
      for (std::size_t m = 0; m < members.size(); ++m) {
        const Trajectory& traj = *batch[members[m]];
        prevs.push_back(&traj.states[t - 1]);
        curs.push_back(&traj.states[t]);
        const int pairs = pair_count(traj.states[0].object_count());
        Tensor2 slice(pairs, kNumJointTypes);
        std::memcpy(slice.data.data(), dist.row(pair_offset[m]),
                    sizeof(double) * slice.data.size());
        slices.push_back(std::move(slice));
      }
      for (auto& s : slices) dists.push_back(&s);
      StepInputs in = make_step_inputs(prevs, curs, dists, dt);
      StepResult res = belief_forward(net, in, h, c, nullptr);
      h = std::move(res.h_pair);
      c = std::move(res.c_pair);
      dist = std::move(res.dist);
    }
    for (std::size_t m = 0; m < members.size(); ++m) {
      const int pairs = pair_count(batch[members[m]]->states[0].object_count());
      Tensor2 out(pairs, kNumJointTypes);
      std::memcpy(out.data.data(), dist.row(pair_offset[m]), sizeof(double) * out.data.size());
      finals[members[m]] = std::move(out);
    }
  }
  return finals;
}

}  // namespace pushrel
