#include "pushrel/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pushrel/error.hpp"
#include "pushrel/parallel.hpp"

namespace pushrel {

void MlpSpec::validate(const std::string& name) const {
  require(input_dim >= 1, name + ": input_dim must be >= 1");
  require(output_dim >= 1, name + ": output_dim must be >= 1");
  for (int h : hidden_dims) require(h >= 1, name + ": hidden dims must be >= 1");
}

void glorot_init(Tensor2& t, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
}

Mlp::Mlp(std::string name, MlpSpec spec) : name_(std::move(name)), spec_(std::move(spec)) {
  spec_.validate(name_);
  std::vector<int> dims;
  dims.push_back(spec_.input_dim);
  for (int h : spec_.hidden_dims) dims.push_back(h);
  dims.push_back(spec_.output_dim);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    weights_.emplace_back(dims[l], dims[l + 1]);
    biases_.emplace_back(1, dims[l + 1]);
    weight_grads_.emplace_back(dims[l], dims[l + 1]);
    bias_grads_.emplace_back(1, dims[l + 1]);
  }
}

void Mlp::init_glorot(Rng& rng) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    glorot_init(weights_[l], weights_[l].rows, weights_[l].cols, rng);
    biases_[l].zero();
  }
}

void Mlp::init_zero() {
  for (auto& w : weights_) w.zero();
  for (auto& b : biases_) b.zero();
}

Tensor2 Mlp::forward(Tensor2 input, MlpCache* cache) const {
  require(input.cols == spec_.input_dim,
          name_ + ": input has " + std::to_string(input.cols) + " cols, expected " +
              std::to_string(spec_.input_dim));
  const Tensor2* cur;
  Tensor2 local;
  if (cache) {
    cache->input = std::move(input);
    cache->post.clear();
    cur = &cache->input;
  } else {
    local = std::move(input);
    cur = &local;
  }
  const int n = n_layers();
  for (int l = 0; l < n; ++l) {
    Tensor2 next(cur->rows, weights_[l].cols);
    matmul_acc(*cur, weights_[l], next);
    add_bias_rows(next, biases_[l]);
    const bool last = (l == n - 1);
    const Activation act = last ? spec_.output_activation : spec_.hidden_activation;
    if (act == Activation::ReLU) relu_inplace(next);
    if (cache) {
      cache->post.push_back(std::move(next));
      cur = &cache->post.back();
    } else {
      local = std::move(next);
      cur = &local;
    }
  }
  return *cur;
}

Tensor2 Mlp::backward(const MlpCache& cache, const Tensor2& output_grad) {
  const int n = n_layers();
  require(static_cast<int>(cache.post.size()) == n, name_ + ": backward without matching cache");
  require(output_grad.same_shape(cache.post.back()), name_ + ": output grad shape mismatch");
  Tensor2 grad = output_grad;
  for (int l = n - 1; l >= 0; --l) {
    const Activation act =
        (l == n - 1) ? spec_.output_activation : spec_.hidden_activation;
    if (act == Activation::ReLU) relu_backward_inplace(cache.post[l], grad);
    const Tensor2& layer_in = (l == 0) ? cache.input : cache.post[l - 1];
    matmul_at_acc(layer_in, grad, weight_grads_[l]);
    sum_rows_acc(grad, bias_grads_[l]);
    Tensor2 prev_grad(grad.rows, weights_[l].rows);
    matmul_bt_acc(grad, weights_[l], prev_grad);
    grad = std::move(prev_grad);
  }
  return grad;
}

void Mlp::zero_grads() {
  for (auto& g : weight_grads_) g.zero();
  for (auto& g : bias_grads_) g.zero();
}

void Mlp::collect_params(std::vector<ParamRef>& out) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back({name_ + "/w" + std::to_string(l), &weights_[l], &weight_grads_[l]});
    out.push_back({name_ + "/b" + std::to_string(l), &biases_[l], &bias_grads_[l]});
  }
}

void Mlp::collect_params_const(std::vector<const Tensor2*>& out) const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Lstm::Lstm(std::string name, RecurrentCellSpec spec) : name_(std::move(name)), spec_(spec) {
  require(spec_.input_dim >= 1 && spec_.hidden_dim >= 1, name_ + ": dims must be >= 1");
  const int h4 = 4 * spec_.hidden_dim;
  w_input_ = Tensor2(spec_.input_dim, h4);
  w_hidden_ = Tensor2(spec_.hidden_dim, h4);
  bias_ = Tensor2(1, h4);
  w_input_grad_ = Tensor2(spec_.input_dim, h4);
  w_hidden_grad_ = Tensor2(spec_.hidden_dim, h4);
  bias_grad_ = Tensor2(1, h4);
}

void Lstm::init_glorot(Rng& rng) {
  glorot_init(w_input_, spec_.input_dim, spec_.hidden_dim, rng);
  glorot_init(w_hidden_, spec_.hidden_dim, spec_.hidden_dim, rng);
  bias_.zero();
}

Lstm::Out Lstm::step(Tensor2 input, Tensor2 h, Tensor2 c, LstmCache* cache) const {
  const int H = spec_.hidden_dim;
  require(input.cols == spec_.input_dim, name_ + ": input width mismatch");
  require(h.cols == H && c.cols == H && h.rows == input.rows && c.rows == input.rows,
          name_ + ": state shape mismatch");
  Tensor2 gates(input.rows, 4 * H);
  matmul_acc(input, w_input_, gates);
  matmul_acc(h, w_hidden_, gates);
  add_bias_rows(gates, bias_);

  Out out;
  out.h = Tensor2(input.rows, H);
  out.c = Tensor2(input.rows, H);
  Tensor2 tanh_c(input.rows, H);
  parallel_ranges(static_cast<std::size_t>(input.rows), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      double* g = gates.row(static_cast<int>(r));
      const double* cp = c.row(static_cast<int>(r));
      double* cn = out.c.row(static_cast<int>(r));
      double* hn = out.h.row(static_cast<int>(r));
      double* tc = tanh_c.row(static_cast<int>(r));
      for (int j = 0; j < H; ++j) {
        const double gi = sigmoid(g[j]);
        const double gf = sigmoid(g[H + j]);
        const double gg = std::tanh(g[2 * H + j]);
        const double go = sigmoid(g[3 * H + j]);
        g[j] = gi;
        g[H + j] = gf;
        g[2 * H + j] = gg;
        g[3 * H + j] = go;
        cn[j] = gf * cp[j] + gi * gg;
        tc[j] = std::tanh(cn[j]);
        hn[j] = go * tc[j];
      }
    }
  });
  if (cache) {
    cache->input = std::move(input);
    cache->h_prev = std::move(h);
    cache->c_prev = std::move(c);
    cache->gates = std::move(gates);
    cache->c_new = out.c;
    cache->tanh_c = std::move(tanh_c);
  }
  return out;
}

Lstm::InGrads Lstm::backward(const LstmCache& cache, const Tensor2& h_grad,
                             const Tensor2& c_grad) {
  const int H = spec_.hidden_dim;
  const int rows = cache.input.rows;
  Tensor2 gate_grads(rows, 4 * H);
  InGrads in;
  in.c = Tensor2(rows, H);
  parallel_ranges(static_cast<std::size_t>(rows), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      const double* g = cache.gates.row(static_cast<int>(r));
      const double* tc = cache.tanh_c.row(static_cast<int>(r));
      const double* cp = cache.c_prev.row(static_cast<int>(r));
      const double* dh = h_grad.row(static_cast<int>(r));
      const double* dc_in = c_grad.row(static_cast<int>(r));
      double* dg = gate_grads.row(static_cast<int>(r));
      double* dcp = in.c.row(static_cast<int>(r));
      for (int j = 0; j < H; ++j) {
        const double gi = g[j], gf = g[H + j], gg = g[2 * H + j], go = g[3 * H + j];
        const double dc = dc_in[j] + dh[j] * go * (1.0 - tc[j] * tc[j]);
        dg[j] = dc * gg * gi * (1.0 - gi);                // input gate
        dg[H + j] = dc * cp[j] * gf * (1.0 - gf);         // forget gate
        dg[2 * H + j] = dc * gi * (1.0 - gg * gg);        // candidate
        dg[3 * H + j] = dh[j] * tc[j] * go * (1.0 - go);  // output gate
        dcp[j] = dc * gf;
      }
    }
  });
  matmul_at_acc(cache.input, gate_grads, w_input_grad_);
  matmul_at_acc(cache.h_prev, gate_grads, w_hidden_grad_);
  sum_rows_acc(gate_grads, bias_grad_);
  in.input = Tensor2(rows, spec_.input_dim);
  matmul_bt_acc(gate_grads, w_input_, in.input);
  in.h = Tensor2(rows, H);
  matmul_bt_acc(gate_grads, w_hidden_, in.h);
  return in;
}

void Lstm::zero_grads() {
  w_input_grad_.zero();
  w_hidden_grad_.zero();
  bias_grad_.zero();
}

void Lstm::collect_params(std::vector<ParamRef>& out) {
  out.push_back({name_ + "/w_input", &w_input_, &w_input_grad_});
  out.push_back({name_ + "/w_hidden", &w_hidden_, &w_hidden_grad_});
  out.push_back({name_ + "/bias", &bias_, &bias_grad_});
}

void AdamOptimizer::attach(const std::vector<ParamRef>& params) {
  m_.clear();
  v_.clear();
  for (const auto& p : params) {
    m_.emplace_back(p.value->rows, p.value->cols);
    v_.emplace_back(p.value->rows, p.value->cols);
  }
  step_count_ = 0;
}

void AdamOptimizer::step(const std::vector<ParamRef>& params) {
  require(params.size() == m_.size(), "optimizer not attached to this parameter set");
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor2& value = *params[p].value;
    const Tensor2& grad = *params[p].grad;
    require(grad.same_shape(value), "gradient shape mismatch for " + params[p].name);
    if (!grad.all_finite()) fail("non-finite gradient for " + params[p].name);
    Tensor2& m = m_[p];
    Tensor2& v = v_[p];
    for (std::size_t i = 0; i < value.data.size(); ++i) {
      const double g = grad.data[i];
      m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g;
      v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      value.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    value.check_finite("parameter " + params[p].name + " after update");
  }
}

double decay_on_plateau(double lr, const std::vector<double>& history, int patience,
                        double factor) {
  require(patience >= 1, "patience must be >= 1");
  require(factor > 0.0 && factor < 1.0, "factor must be in (0, 1)");
  const int n = static_cast<int>(history.size());
  if (n < patience) return lr;
  // Decay iff none of the last `patience` entries improved on the running
  // minimum of everything before them.
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n - patience; ++i) best = std::min(best, history[i]);
  for (int i = n - patience; i < n; ++i) {
    if (history[i] < best) return lr;
    best = std::min(best, history[i]);
  }
  return lr * factor;
}

}  // namespace pushrel
