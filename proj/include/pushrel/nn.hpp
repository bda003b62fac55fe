#pragma once

#include <string>
#include <vector>

#include "pushrel/rng.hpp"
#include "pushrel/tensor.hpp"

namespace pushrel {

enum class Activation { Identity, ReLU };

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;
  Activation hidden_activation = Activation::ReLU;
  Activation output_activation = Activation::Identity;

  void validate(const std::string& name) const;
};

// Named view into a parameter tensor and its gradient accumulator. The flat
// list of these is what the optimizer, serializer and gradient checker see.
struct ParamRef {
  std::string name;
  Tensor2* value = nullptr;
  Tensor2* grad = nullptr;
};

// Fills t uniformly in +/- sqrt(6 / (fan_in + fan_out)).
void glorot_init(Tensor2& t, int fan_in, int fan_out, Rng& rng);

struct MlpCache {
  Tensor2 input;
  std::vector<Tensor2> post;  // post-activation output of every layer
};

// Fully connected network. Parameters only; activations live in caller-owned
// caches so one set of weights can serve many concurrent forward passes.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string name, MlpSpec spec);

  void init_glorot(Rng& rng);
  void init_zero();

  // input: rows x input_dim. Returns rows x output_dim. When a cache is
  // supplied the input is moved into it, so pass rvalues on hot paths.
  Tensor2 forward(Tensor2 input, MlpCache* cache = nullptr) const;

  // Accumulates parameter gradients from a cached forward pass and returns
  // the gradient w.r.t. the input.
  Tensor2 backward(const MlpCache& cache, const Tensor2& output_grad);

  void zero_grads();
  void collect_params(std::vector<ParamRef>& out);
  void collect_params_const(std::vector<const Tensor2*>& out) const;

  const MlpSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }
  int n_layers() const { return static_cast<int>(weights_.size()); }

  Tensor2& weight(int layer) { return weights_[layer]; }
  Tensor2& bias(int layer) { return biases_[layer]; }
  const Tensor2& weight(int layer) const { return weights_[layer]; }

 private:
  std::string name_;
  MlpSpec spec_;
  std::vector<Tensor2> weights_;  // in x out per layer
  std::vector<Tensor2> biases_;   // 1 x out per layer
  std::vector<Tensor2> weight_grads_;
  std::vector<Tensor2> bias_grads_;
};

struct RecurrentCellSpec {
  int input_dim = 0;
  int hidden_dim = 0;
};

struct LstmCache {
  Tensor2 input, h_prev, c_prev;
  Tensor2 gates;  // rows x 4H, post-nonlinearity, order [i f g o]
  Tensor2 c_new, tanh_c;
};

// Standard LSTM cell over batched rows.
class Lstm {
 public:
  Lstm() = default;
  Lstm(std::string name, RecurrentCellSpec spec);

  void init_glorot(Rng& rng);

  struct Out {
    Tensor2 h, c;
  };

  // input: rows x input_dim; h, c: rows x hidden_dim. With a cache the
  // arguments are moved into it after use.
  Out step(Tensor2 input, Tensor2 h, Tensor2 c, LstmCache* cache = nullptr) const;

  struct InGrads {
    Tensor2 input, h, c;
  };

  InGrads backward(const LstmCache& cache, const Tensor2& h_grad, const Tensor2& c_grad);

  void zero_grads();
  void collect_params(std::vector<ParamRef>& out);

  const RecurrentCellSpec& spec() const { return spec_; }

 private:
  std::string name_;
  RecurrentCellSpec spec_;
  Tensor2 w_input_;   // input_dim x 4H
  Tensor2 w_hidden_;  // H x 4H
  Tensor2 bias_;      // 1 x 4H
  Tensor2 w_input_grad_, w_hidden_grad_, bias_grad_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed set of parameter tensors. Moment slots are bound to the
// parameter list at attach time and keyed by position.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

  void attach(const std::vector<ParamRef>& params);
  // Applies one update from the gradients in params. Throws on non-finite
  // gradients, naming the parameter.
  void step(const std::vector<ParamRef>& params);

  long step_count() const { return step_count_; }
  double learning_rate() const { return cfg_.lr; }
  void set_learning_rate(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  long step_count_ = 0;
  std::vector<Tensor2> m_, v_;
};

// Returns lr * factor iff none of the last `patience` entries of history set
// a strict new running minimum; otherwise returns lr unchanged.
double decay_on_plateau(double lr, const std::vector<double>& history, int patience,
                        double factor);

}  // namespace pushrel
