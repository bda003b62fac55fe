#include "pushrel/predictor.hpp"

#include <algorithm>
#include <cstring>
#include <utility>

#include "pushrel/error.hpp"

namespace pushrel {

StackSizes StackSizes::tiny(int code_dim, int prop_steps) {
  StackSizes s;
  s.code_dim = code_dim;
  s.object_encoder_hidden = {code_dim};
  s.relation_encoder_hidden = {code_dim};
  s.relation_propagator_hidden = {code_dim};
  s.object_propagator_hidden = {code_dim};
  s.prop_steps = prop_steps;
  return s;
}

std::vector<std::array<double, 4>> hard_attrs(const std::vector<JointType>& relations) {
  std::vector<std::array<double, 4>> attrs(relations.size());
  for (std::size_t i = 0; i < relations.size(); ++i) attrs[i] = one_hot(relations[i]);
  return attrs;
}

GraphBatch build_graph_batch(const std::vector<BatchSample>& samples) {
  GraphBatch batch;
  int total_objects = 0;
  for (const auto& s : samples) total_objects += s.scene->object_count();
  batch.n_objects = total_objects;
  batch.object_feats = Tensor2(total_objects, kObjectFeatureWidth);
  batch.object_sample.resize(total_objects);
  batch.controlled.resize(total_objects);
  batch.incoming.resize(total_objects);

  int obj_row = 0;
  struct PendingEdge {
    int recv, send;
    const std::array<double, 4>* attr;
    bool contact;
    const SceneState* scene;
    int local_recv, local_send;
  };
  std::vector<PendingEdge> pending;

  for (std::size_t si = 0; si < samples.size(); ++si) {
    const SceneState& scene = *samples[si].scene;
    const int n = scene.object_count();
    require(samples[si].pair_attrs != nullptr, "batch sample missing pair attributes");
    batch.sample_offset.push_back(obj_row);
    batch.sample_edge_offset.push_back(static_cast<int>(pending.size()));
    for (int i = 0; i < n; ++i) {
      object_features(scene.objects[i], batch.object_feats.row(obj_row + i));
      batch.object_sample[obj_row + i] = static_cast<int>(si);
      batch.controlled[obj_row + i] = scene.objects[i].controlled ? 1 : 0;
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const std::array<double, 4>& attr = samples[si].pair_attrs[pair_index(i, j, n)];
        const bool contact = in_contact(scene.objects[i], scene.objects[j]);
        if (samples[si].gate) {
          // Active iff touching or carrying any joint attribute mass.
          const bool jointed = attr[0] < 1.0;
          if (!contact && !jointed) continue;
        }
        pending.push_back(
            {obj_row + i, obj_row + j, &attr, contact, &scene, i, j});
      }
    }
    obj_row += n;
  }

  batch.n_edges = static_cast<int>(pending.size());
  batch.edge_feats = Tensor2(batch.n_edges, kEdgeFeatureWidth);
  batch.edge_recv.resize(pending.size());
  batch.edge_send.resize(pending.size());
  for (std::size_t k = 0; k < pending.size(); ++k) {
    const PendingEdge& pe = pending[k];
    RelationEdge edge;
    edge.receiver = pe.local_recv;
    edge.sender = pe.local_send;
    edge.type_attr = *pe.attr;
    edge.contact = pe.contact;
    edge_features(edge, *pe.scene, batch.edge_feats.row(static_cast<int>(k)));
    batch.edge_recv[k] = pe.recv;
    batch.edge_send[k] = pe.send;
    batch.incoming[pe.recv].push_back(static_cast<int>(k));
  }
  return batch;
}

PropagationStack::PropagationStack(const std::string& name, const StackSizes& sizes)
    : sizes_(sizes) {
  const int d = sizes.code_dim;
  object_encoder_ = Mlp(name + "/object_encoder",
                        {kObjectFeatureWidth, sizes.object_encoder_hidden, d});
  relation_encoder_ = Mlp(name + "/relation_encoder",
                          {kEdgeFeatureWidth, sizes.relation_encoder_hidden, d});
  relation_propagator_ = Mlp(name + "/relation_propagator",
                             {3 * d, sizes.relation_propagator_hidden, d});
  object_propagator_ = Mlp(name + "/object_propagator",
                           {3 * d, sizes.object_propagator_hidden, d});
}

void PropagationStack::init_glorot(Rng& rng) {
  object_encoder_.init_glorot(rng);
  relation_encoder_.init_glorot(rng);
  relation_propagator_.init_glorot(rng);
  object_propagator_.init_glorot(rng);
}

namespace {

// out = [a | b_rows gathered | c_rows gathered]
Tensor2 concat_codes(const Tensor2& base, const Tensor2& rows, const std::vector<int>& idx_a,
                     const std::vector<int>& idx_b) {
  const int d = base.cols;
  Tensor2 out(base.rows, 3 * d);
  for (int r = 0; r < base.rows; ++r) {
    double* dst = out.row(r);
    std::memcpy(dst, base.row(r), sizeof(double) * d);
    std::memcpy(dst + d, rows.row(idx_a[r]), sizeof(double) * d);
    std::memcpy(dst + 2 * d, rows.row(idx_b[r]), sizeof(double) * d);
  }
  return out;
}

// Sums each receiver's incoming effect rows, ordering summands by content so
// the result is independent of object labelling.
Tensor2 aggregate_effects(const Tensor2& effects, const GraphBatch& batch) {
  const int d = effects.cols;
  Tensor2 agg(batch.n_objects, d);
  std::vector<int> order;
  for (int o = 0; o < batch.n_objects; ++o) {
    const auto& in = batch.incoming[o];
    if (in.empty()) continue;
    order.assign(in.begin(), in.end());
    std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
      const double* a = effects.row(lhs);
      const double* b = effects.row(rhs);
      for (int k = 0; k < d; ++k) {
        if (a[k] != b[k]) return a[k] < b[k];
      }
      return false;
    });
    double* dst = agg.row(o);
    for (int e : order) {
      const double* src = effects.row(e);
      for (int k = 0; k < d; ++k) dst[k] += src[k];
    }
  }
  return agg;
}

}  // namespace

PropagationState PropagationStack::encode(const GraphBatch& batch, StackCaches* caches) const {
  PropagationState st;
  st.object_codes = object_encoder_.forward(batch.object_feats,
                                            caches ? &caches->object_encoder : nullptr);
  st.relation_codes = relation_encoder_.forward(batch.edge_feats,
                                                caches ? &caches->relation_encoder : nullptr);
  st.effects = Tensor2(batch.n_edges, sizes_.code_dim);
  st.propagated = Tensor2(batch.n_objects, sizes_.code_dim);
  st.step = 0;
  return st;
}

void PropagationStack::propagate(PropagationState& st, const GraphBatch& batch,
                                 StackCaches* caches) const {
  Tensor2 rel_in = concat_codes(st.relation_codes, st.propagated, batch.edge_recv,
                                batch.edge_send);
  MlpCache* rc = nullptr;
  MlpCache* oc = nullptr;
  if (caches) {
    caches->relation_propagator.emplace_back();
    caches->object_propagator.emplace_back();
    rc = &caches->relation_propagator.back();
    oc = &caches->object_propagator.back();
  }
  st.effects = relation_propagator_.forward(std::move(rel_in), rc);
  Tensor2 agg = aggregate_effects(st.effects, batch);

  const int d = sizes_.code_dim;
  Tensor2 obj_in(batch.n_objects, 3 * d);
  for (int r = 0; r < batch.n_objects; ++r) {
    double* dst = obj_in.row(r);
    std::memcpy(dst, st.object_codes.row(r), sizeof(double) * d);
    std::memcpy(dst + d, st.propagated.row(r), sizeof(double) * d);
    std::memcpy(dst + 2 * d, agg.row(r), sizeof(double) * d);
  }
  st.propagated = object_propagator_.forward(std::move(obj_in), oc);
  ++st.step;
}

PropagationState PropagationStack::run(const GraphBatch& batch, StackCaches* caches) const {
  PropagationState st = encode(batch, caches);
  for (int l = 0; l < sizes_.prop_steps; ++l) propagate(st, batch, caches);
  return st;
}

PropagationStack::InputGrads PropagationStack::backward(const GraphBatch& batch,
                                                        const StackCaches& caches,
                                                        const Tensor2& effects_grad,
                                                        const Tensor2& propagated_grad) {
  const int d = sizes_.code_dim;
  const int L = sizes_.prop_steps;
  require(static_cast<int>(caches.relation_propagator.size()) == L,
          "stack backward without matching caches");

  Tensor2 d_obj_codes(batch.n_objects, d);
  Tensor2 d_rel_codes(batch.n_edges, d);
  Tensor2 d_p = propagated_grad;          // gradient w.r.t. p^l
  Tensor2 d_e_extra = effects_grad;       // gradient fed directly into e^L

  for (int l = L - 1; l >= 0; --l) {
    // p^l = f_O([c_o | p^{l-1} | agg])
    Tensor2 d_obj_in = object_propagator_.backward(caches.object_propagator[l], d_p);
    Tensor2 d_p_prev(batch.n_objects, d);
    Tensor2 d_agg(batch.n_objects, d);
    for (int r = 0; r < batch.n_objects; ++r) {
      const double* src = d_obj_in.row(r);
      double* oc = d_obj_codes.row(r);
      double* pp = d_p_prev.row(r);
      double* ag = d_agg.row(r);
      for (int k = 0; k < d; ++k) {
        oc[k] += src[k];
        pp[k] = src[d + k];
        ag[k] = src[2 * d + k];
      }
    }
    // e^l rows receive their receiver's aggregate gradient.
    Tensor2 d_e(batch.n_edges, d);
    for (int e = 0; e < batch.n_edges; ++e) {
      const double* src = d_agg.row(batch.edge_recv[e]);
      double* dst = d_e.row(e);
      for (int k = 0; k < d; ++k) dst[k] = src[k];
    }
    if (l == L - 1) {
      for (std::size_t k = 0; k < d_e.data.size(); ++k) d_e.data[k] += d_e_extra.data[k];
    }
    // e^l = f_R([c_r | p^{l-1}_recv | p^{l-1}_send])
    Tensor2 d_rel_in = relation_propagator_.backward(caches.relation_propagator[l], d_e);
    for (int e = 0; e < batch.n_edges; ++e) {
      const double* src = d_rel_in.row(e);
      double* rc = d_rel_codes.row(e);
      double* pr = d_p_prev.row(batch.edge_recv[e]);
      double* ps = d_p_prev.row(batch.edge_send[e]);
      for (int k = 0; k < d; ++k) {
        rc[k] += src[k];
        pr[k] += src[d + k];
        ps[k] += src[2 * d + k];
      }
    }
    d_p = std::move(d_p_prev);
  }
  // p^0 is a constant zero tensor; d_p is dropped here.
  InputGrads in;
  in.object_features = object_encoder_.backward(caches.object_encoder, d_obj_codes);
  in.edge_features = relation_encoder_.backward(caches.relation_encoder, d_rel_codes);
  return in;
}

void PropagationStack::zero_grads() {
  object_encoder_.zero_grads();
  relation_encoder_.zero_grads();
  relation_propagator_.zero_grads();
  object_propagator_.zero_grads();
}

void PropagationStack::collect_params(std::vector<ParamRef>& out) {
  object_encoder_.collect_params(out);
  relation_encoder_.collect_params(out);
  relation_propagator_.collect_params(out);
  object_propagator_.collect_params(out);
}

PredictorNet::PredictorNet(const StackSizes& sizes)
    : stack_("predictor", sizes), output_head_("predictor/output_head", {sizes.code_dim, {}, 2}) {}

void PredictorNet::init(std::uint64_t seed) {
  Rng rng(seed);
  stack_.init_glorot(rng);
  // Zero head: an untrained model predicts the normalized-target mean.
  output_head_.init_zero();
}

Tensor2 PredictorNet::forward(const GraphBatch& batch, StackCaches* caches,
                              MlpCache* head_cache) const {
  PropagationState st = stack_.run(batch, caches);
  return output_head_.forward(st.propagated, head_cache);
}

void PredictorNet::backward(const GraphBatch& batch, const StackCaches& caches,
                            const MlpCache& head_cache, const Tensor2& out_grad) {
  Tensor2 d_p = output_head_.backward(head_cache, out_grad);
  Tensor2 no_effects_grad(batch.n_edges, stack_.sizes().code_dim);
  stack_.backward(batch, caches, no_effects_grad, d_p);
}

void PredictorNet::zero_grads() {
  stack_.zero_grads();
  output_head_.zero_grads();
}

void PredictorNet::collect_params(std::vector<ParamRef>& out) {
  stack_.collect_params(out);
  output_head_.collect_params(out);
}

std::vector<Vec2> predict_step(const SceneState& scene,
                               const std::vector<JointType>& relations, Vec2 pusher_velocity,
                               const PredictorNet& net) {
  SceneState view = scene;
  const int pusher = view.pusher_index();
  require(pusher >= 0, "predict_step: scene has no pusher");
  view.objects[pusher].velocity = pusher_velocity;

  const auto attrs = hard_attrs(relations);
  require(static_cast<int>(attrs.size()) == pair_count(view.object_count()),
          "predict_step: relation assignment must cover all pairs");
  GraphBatch batch = build_graph_batch({{&view, attrs.data(), true}});
  Tensor2 out = net.forward(batch);

  std::vector<Vec2> velocities(view.object_count());
  for (int i = 0; i < view.object_count(); ++i) {
    if (batch.controlled[i]) continue;
    velocities[i] = {out(i, 0) * net.norm.stddev[0] + net.norm.mean[0],
                     out(i, 1) * net.norm.stddev[1] + net.norm.mean[1]};
  }
  return velocities;
}

Trajectory rollout(const SceneState& scene, const std::vector<JointType>& relations,
                   const std::vector<Vec2>& controls, const PredictorNet& net, int steps,
                   double dt) {
  require(steps <= static_cast<int>(controls.size()), "rollout: not enough controls");
  Trajectory traj;
  traj.dt = dt;
  traj.states.push_back(scene);
  traj.controls.assign(controls.begin(), controls.begin() + steps);

  const int pusher = scene.pusher_index();
  for (int t = 0; t < steps; ++t) {
    const SceneState& cur = traj.states.back();
    std::vector<Vec2> vel = predict_step(cur, relations, controls[t], net);
    SceneState next = cur;
    for (int i = 0; i < next.object_count(); ++i) {
      if (i == pusher) {
        next.objects[i].velocity = controls[t];
      } else {
        if (!std::isfinite(vel[i].x) || !std::isfinite(vel[i].y))
          fail("non-finite prediction at rollout step " + std::to_string(t));
        next.objects[i].velocity = vel[i];
      }
      next.objects[i].position += next.objects[i].velocity * dt;
    }
    next.time = cur.time + 1;
    traj.states.push_back(std::move(next));
  }
  return traj;
}

}  // namespace pushrel
