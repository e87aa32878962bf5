#pragma once

#include <filesystem>

#include "gckd/config.hpp"
#include "gckd/evaluator.hpp"

namespace gckd {

// Experiment drivers behind the CLI verbs. All outputs embed the config
// fingerprint; ablate refuses to aggregate reports whose fingerprint differs.

void run_gen(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

void run_train(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& run_dir);

MetricsReport run_eval(const ExperimentConfig& cfg,
                       const std::filesystem::path& data_dir,
                       const std::filesystem::path& run_dir);

void run_ablate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

bool run_gradcheck(const ExperimentConfig& cfg);

}  // namespace gckd
