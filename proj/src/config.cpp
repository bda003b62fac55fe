#include "pushrel/config.hpp"

#include <fstream>
#include <sstream>

#include "pushrel/error.hpp"

namespace pushrel {

ConfigView ConfigView::parse_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

ConfigView ConfigView::parse_text(const std::string& text, const std::string& origin) {
  ConfigView cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos,
            origin + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), origin + ":" + std::to_string(lineno) + ": empty key");
    require(cfg.values_.emplace(key, value).second,
            origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
  }
  return cfg;
}

std::string ConfigView::get_string(const std::string& key, const std::string& fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double ConfigView::get_double(const std::string& key, double fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    require(pos == it->second.size(), "");
    return v;
  } catch (...) {
    fail(origin_ + ": key " + key + " is not a number: " + it->second);
  }
}

int ConfigView::get_int(const std::string& key, int fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const int v = std::stoi(it->second, &pos);
    require(pos == it->second.size(), "");
    return v;
  } catch (...) {
    fail(origin_ + ": key " + key + " is not an integer: " + it->second);
  }
}

void ConfigView::finish() const {
  for (const auto& [key, value] : values_) {
    if (!consumed_.count(key))
      fail(origin_ + ": unknown config key '" + key + "'");
  }
}

namespace {

GenJob desk_sparse(EnvironmentMode mode) {
  GenJob job;
  job.gen.n_objects = 9;
  job.gen.layout = SceneLayout::Sparse;
  job.gen.environment_mode = mode;
  // Dense enough joints that most pushes engage a linked group.
  job.gen.joint_probability = 0.65;
  job.push.speed = 0.048;  // 0.30 m in 125 steps at dt 0.05
  job.push.length = 0.30;
  job.train.scenes = {{9, 100}};
  job.val.scenes = {{9, 20}};
  job.test.scenes = {{9, 30}};
  return job;
}

}  // namespace

GenJob gen_preset(const std::string& name) {
  if (name == "sparse-desk") return desk_sparse(EnvironmentMode::Mixed);
  if (name == "sparse-desk-fixed") return desk_sparse(EnvironmentMode::FixedOnly);
  if (name == "dense-desk") {
    GenJob job;
    job.gen.n_objects = 8;
    job.gen.layout = SceneLayout::Dense;
    job.gen.environment_mode = EnvironmentMode::Mixed;
    job.gen.joint_probability = 0.65;
    job.push.speed = 0.048;
    job.push.length = 0.12;  // 50 steps
    job.test.scenes = {{8, 30}};
    return job;
  }
  if (name == "tiny") {
    GenJob job;
    job.gen.n_objects = 4;
    job.gen.layout = SceneLayout::Sparse;
    job.gen.environment_mode = EnvironmentMode::Mixed;
    job.push.speed = 0.048;
    job.push.length = 0.06;  // 25 steps
    job.train.scenes = {{4, 6}};
    job.val.scenes = {{4, 3}};
    job.test.scenes = {{4, 4}};
    return job;
  }
  if (name == "sparse-full") {
    GenJob job;
    job.gen.n_objects = 9;
    job.gen.layout = SceneLayout::Sparse;
    job.gen.environment_mode = EnvironmentMode::Mixed;
    job.push.speed = 0.03;  // 0.30 m in 200 steps
    job.push.length = 0.30;
    job.train.scenes = {{9, 900}};
    job.val.scenes = {{9, 100}};
    job.test.scenes = {{9, 50}, {6, 25}, {12, 25}};
    job.test_pushes_per_scene = 4;
    return job;
  }
  if (name == "dense-full") {
    GenJob job;
    job.gen.n_objects = 8;
    job.gen.layout = SceneLayout::Dense;
    job.gen.environment_mode = EnvironmentMode::Mixed;
    job.push.speed = 0.03;
    job.push.length = 0.075;  // 50 steps
    job.test.scenes = {{6, 50}, {8, 50}, {9, 50}};
    job.test_pushes_per_scene = 4;
    return job;
  }
  fail("unknown gen preset '" + name + "'");
}

std::vector<std::string> gen_preset_names() {
  return {"sparse-desk", "sparse-desk-fixed", "dense-desk", "tiny", "sparse-full",
          "dense-full"};
}

TrainConfig train_preset(const std::string& name) {
  TrainConfig tc;  // defaults are the full-scale protocol
  if (name == "full") return tc;
  if (name == "desk-physics") {
    tc.max_epochs = 50;
    tc.validate_every = 1;
    return tc;
  }
  if (name == "desk-belief") {
    // Adam step count is the scarce resource on a small CPU budget;
    // single-trajectory batches maximize steps per second.
    tc.max_epochs = 50;
    tc.belief_batches_per_epoch = 8;
    tc.belief_batch_size = 1;
    tc.validate_every = 10;
    return tc;
  }
  if (name == "tiny-physics") {
    tc.max_epochs = 2;
    tc.batch_size = 16;
    return tc;
  }
  if (name == "tiny-belief") {
    tc.max_epochs = 2;
    tc.belief_batches_per_epoch = 2;
    tc.belief_batch_size = 2;
    tc.sequence_length = 25;
    tc.loss_window_lo = 10;
    tc.loss_window_hi = 25;
    return tc;
  }
  fail("unknown train preset '" + name + "'");
}

std::vector<std::string> train_preset_names() {
  return {"full", "desk-physics", "desk-belief", "tiny-physics", "tiny-belief"};
}

EvalJob eval_preset(const std::string& name) {
  EvalJob job;
  if (name == "sparse-desk") {
    job.timepoints = {0, 25, 50, 75, 100};
    job.horizon = 0;
    return job;
  }
  if (name == "dense-desk") {
    job.timepoints = {0, 25};
    job.horizon = 50;
    return job;
  }
  if (name == "sparse-full") {
    job.timepoints = {0, 25, 50, 75, 100};
    job.horizon = 0;
    return job;
  }
  if (name == "dense-full") {
    job.timepoints = {0, 10, 20, 30, 40};
    job.horizon = 50;
    return job;
  }
  if (name == "tiny") {
    job.timepoints = {0, 10};
    job.horizon = 0;
    return job;
  }
  fail("unknown eval preset '" + name + "'");
}

std::vector<std::string> eval_preset_names() {
  return {"sparse-desk", "dense-desk", "sparse-full", "dense-full", "tiny"};
}

void apply_gen_overrides(ConfigView& cfg, GenJob& job) {
  job.gen.n_objects = cfg.get_int("n_objects", job.gen.n_objects);
  job.gen.radius_min = cfg.get_double("radius_min", job.gen.radius_min);
  job.gen.radius_max = cfg.get_double("radius_max", job.gen.radius_max);
  const std::string layout =
      cfg.get_string("layout", job.gen.layout == SceneLayout::Sparse ? "sparse" : "dense");
  if (layout == "sparse")
    job.gen.layout = SceneLayout::Sparse;
  else if (layout == "dense")
    job.gen.layout = SceneLayout::Dense;
  else
    fail("layout must be sparse or dense, got " + layout);
  const std::string mode = cfg.get_string(
      "environment_mode",
      job.gen.environment_mode == EnvironmentMode::FixedOnly ? "fixed" : "mixed");
  if (mode == "fixed")
    job.gen.environment_mode = EnvironmentMode::FixedOnly;
  else if (mode == "mixed")
    job.gen.environment_mode = EnvironmentMode::Mixed;
  else
    fail("environment_mode must be fixed or mixed, got " + mode);
  job.gen.joint_probability = cfg.get_double("joint_probability", job.gen.joint_probability);
  job.gen.workspace_half_x = cfg.get_double("workspace_half_x", job.gen.workspace_half_x);
  job.gen.workspace_half_y = cfg.get_double("workspace_half_y", job.gen.workspace_half_y);
  job.gen.pusher_radius = cfg.get_double("pusher_radius", job.gen.pusher_radius);

  job.sim.dt = cfg.get_double("dt", job.sim.dt);
  job.sim.solver_iterations = cfg.get_int("solver_iterations", job.sim.solver_iterations);
  job.sim.baumgarte_beta = cfg.get_double("baumgarte_beta", job.sim.baumgarte_beta);
  job.sim.table_friction_decel =
      cfg.get_double("table_friction_decel", job.sim.table_friction_decel);
  job.sim.angular_friction_decel =
      cfg.get_double("angular_friction_decel", job.sim.angular_friction_decel);
  job.sim.restitution = cfg.get_double("restitution", job.sim.restitution);

  job.push.speed = cfg.get_double("push_speed", job.push.speed);
  job.push.length = cfg.get_double("push_length", job.push.length);
  job.push.n_candidates = cfg.get_int("push_candidates", job.push.n_candidates);

  const int train_n = cfg.get_int("n_train", -1);
  if (train_n >= 0) job.train.scenes = {{job.gen.n_objects, train_n}};
  const int val_n = cfg.get_int("n_val", -1);
  if (val_n >= 0) job.val.scenes = {{job.gen.n_objects, val_n}};
  const int test_n = cfg.get_int("n_test", -1);
  if (test_n >= 0) job.test.scenes = {{job.gen.n_objects, test_n}};
  job.train_pushes_per_scene =
      cfg.get_int("train_pushes_per_scene", job.train_pushes_per_scene);
  job.test_pushes_per_scene = cfg.get_int("test_pushes_per_scene", job.test_pushes_per_scene);
}

void apply_train_overrides(ConfigView& cfg, TrainConfig& tc) {
  tc.batch_size = cfg.get_int("batch_size", tc.batch_size);
  tc.lr = cfg.get_double("lr", tc.lr);
  tc.decay_factor = cfg.get_double("decay_factor", tc.decay_factor);
  tc.patience = cfg.get_int("patience", tc.patience);
  tc.max_epochs = cfg.get_int("max_epochs", tc.max_epochs);
  tc.physics_epoch_fraction =
      cfg.get_double("physics_epoch_fraction", tc.physics_epoch_fraction);
  tc.belief_batches_per_epoch =
      cfg.get_int("belief_batches_per_epoch", tc.belief_batches_per_epoch);
  tc.belief_batch_size = cfg.get_int("belief_batch_size", tc.belief_batch_size);
  tc.sequence_length = cfg.get_int("sequence_length", tc.sequence_length);
  tc.loss_window_lo = cfg.get_int("loss_window_lo", tc.loss_window_lo);
  tc.loss_window_hi = cfg.get_int("loss_window_hi", tc.loss_window_hi);
  tc.validate_every = cfg.get_int("validate_every", tc.validate_every);
  tc.position_noise = cfg.get_double("position_noise", tc.position_noise);
  tc.velocity_noise = cfg.get_double("velocity_noise", tc.velocity_noise);
}

void apply_eval_overrides(ConfigView& cfg, EvalJob& job) {
  const std::string tp = cfg.get_string("timepoints", "");
  if (!tp.empty()) {
    job.timepoints.clear();
    std::istringstream in(tp);
    std::string tok;
    while (std::getline(in, tok, ','))
      job.timepoints.push_back(std::stoi(tok));
  }
  job.horizon = cfg.get_int("horizon", job.horizon);
  const std::string bl = cfg.get_string("baselines", "");
  if (!bl.empty()) {
    job.baselines.clear();
    std::istringstream in(bl);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      auto k = baseline_from_name(tok);
      require(k.has_value(), "unknown baseline '" + tok + "'");
      job.baselines.push_back(*k);
    }
  }
}

}  // namespace pushrel
