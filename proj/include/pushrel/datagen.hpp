#pragma once

#include <cstdint>
#include <string>

#include "pushrel/config.hpp"
#include "pushrel/io.hpp"

namespace pushrel {

// Simulates one split of a generation job. Scene seeds derive from the split
// seed and scene index, so datasets are reproducible and order-independent;
// the handful of scenes that fail to place retry with a perturbed seed.
Dataset generate_dataset(const GenJob& job, const SplitSpec& split, int pushes_per_scene,
                         const std::string& split_name, std::uint64_t seed);

}  // namespace pushrel
