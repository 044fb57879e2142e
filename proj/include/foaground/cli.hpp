#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "foaground/dataset_gen.hpp"
#include "foaground/neural_iv.hpp"

namespace foaground {

// Entry point of the foaground binary. Returns the process exit code:
// 0 success, 1 failed --assert, 2 usage error, 3 any other error.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

// Training clips from a dataset split: task A samples for the single regime,
// task B samples band-limited to their target band for the overlap regime.
// crop_s > 0 keeps only the first crop_s seconds of every clip.
std::vector<TrainExample> load_training_examples(const std::filesystem::path& split_dir, bool overlap, double crop_s,
                                                 std::size_t max_samples = 0, int threads = 1);

}  // namespace foaground
