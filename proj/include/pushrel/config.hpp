#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pushrel/baselines.hpp"
#include "pushrel/sim.hpp"
#include "pushrel/training.hpp"

namespace pushrel {

// Flat key=value text config. '#' starts a comment. Every key must be
// consumed by the command that reads the file; unknown keys are rejected.
class ConfigView {
 public:
  ConfigView() = default;
  static ConfigView parse_file(const std::string& path);
  static ConfigView parse_text(const std::string& text, const std::string& origin);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  int get_int(const std::string& key, int fallback);

  // Throws if any key was never consumed.
  void finish() const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

// Scene counts per object count: (n_objects, n_scenes).
struct SplitSpec {
  std::vector<std::pair<int, int>> scenes;
  int total() const {
    int t = 0;
    for (auto& [n, c] : scenes) t += c;
    return t;
  }
};

struct GenJob {
  SceneGenConfig gen;
  SimConfig sim;
  PushConfig push;
  SplitSpec train, val, test;
  int train_pushes_per_scene = 1;
  int test_pushes_per_scene = 1;
};

struct EvalJob {
  std::vector<int> timepoints{0, 25, 50, 75, 100};
  int horizon = 0;  // rollout steps from each timepoint; 0 means to the end
  std::vector<BaselineKind> baselines{BaselineKind::PropNetGT, BaselineKind::PropNetF,
                                      BaselineKind::PropNetN, BaselineKind::BeliefOneStep,
                                      BaselineKind::BeliefFull};
};

// Named presets for data generation, training and evaluation. Desk presets
// fit a small CPU budget; full presets run the complete protocol.
GenJob gen_preset(const std::string& name);
TrainConfig train_preset(const std::string& name);
EvalJob eval_preset(const std::string& name);
std::vector<std::string> gen_preset_names();
std::vector<std::string> train_preset_names();
std::vector<std::string> eval_preset_names();

// Overlay config-file keys onto a preset.
void apply_gen_overrides(ConfigView& cfg, GenJob& job);
void apply_train_overrides(ConfigView& cfg, TrainConfig& tc);
void apply_eval_overrides(ConfigView& cfg, EvalJob& job);

}  // namespace pushrel
