#include "pushrel/datagen.hpp"

#include "pushrel/error.hpp"
#include "pushrel/parallel.hpp"

namespace pushrel {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  a ^= b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2);
  return a;
}

}  // namespace

Dataset generate_dataset(const GenJob& job, const SplitSpec& split, int pushes_per_scene,
                         const std::string& split_name, std::uint64_t seed) {
  Dataset ds;
  ds.gen = job.gen;
  ds.sim = job.sim;
  ds.push = job.push;
  ds.seed = seed;
  ds.split = split_name;

  struct SceneJob {
    int n_objects;
    std::uint64_t seed;
  };
  std::vector<SceneJob> scene_jobs;
  int scene_index = 0;
  for (const auto& [n_objects, count] : split.scenes) {
    for (int c = 0; c < count; ++c, ++scene_index) {
      scene_jobs.push_back({n_objects, mix(seed, static_cast<std::uint64_t>(scene_index))});
    }
  }

  ds.trajectories.resize(scene_jobs.size() * static_cast<std::size_t>(pushes_per_scene));
  parallel_for(scene_jobs.size(), [&](std::size_t si) {
    SceneGenConfig gen = job.gen;
    gen.n_objects = scene_jobs[si].n_objects;
    for (int push = 0; push < pushes_per_scene; ++push) {
      const std::uint64_t push_seed = mix(scene_jobs[si].seed, 1000 + push);
      Trajectory traj;
      bool done = false;
      for (std::uint64_t attempt = 0; attempt < 16 && !done; ++attempt) {
        try {
          SceneState scene =
              generate_scene(gen, mix(scene_jobs[si].seed, attempt * 7919));
          const auto controls = generate_push(scene, job.push, job.sim, mix(push_seed, attempt));
          traj = rollout_ground_truth(scene, controls, job.sim);
          traj.environment_mode = gen.environment_mode;
          done = true;
        } catch (const Error&) {
          // placement or solver failure; retry with a perturbed seed
        }
      }
      require(done, "failed to generate a stable scene after 16 attempts");
      ds.trajectories[si * pushes_per_scene + push] = std::move(traj);
    }
  });
  return ds;
}

}  // namespace pushrel
