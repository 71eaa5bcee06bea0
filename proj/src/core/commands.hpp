#pragma once

#include <string>

#include "core/analysis.hpp"
#include "core/config.hpp"
#include "core/runio.hpp"

namespace lswap {

// Command layer shared by the shared-library API and the CLI. Every command
// writes a manifest and the effective configuration next to its outputs, so
// any run can be reproduced from its own directory.

void cmd_train(const RunConfig& config, const std::string& out_dir, const ProgressFn& progress = {});

void cmd_sweep(const RunConfig& config, const std::string& out_dir, size_t jobs = 1);
void cmd_spaces(const RunConfig& config, const std::string& out_dir, size_t jobs = 1);

// these read a finished training run (config.effective.ini + checkpoint.bin)
void cmd_layerwise(const std::string& run_dir, const std::string& out_dir);

struct DiffusionReport {
    DiffusionFit intermediate;
    DiffusionFit late;
};
DiffusionReport cmd_diffusion(const std::string& run_dir, const std::string& out_dir);

void cmd_pca(const RunConfig& config, const std::string& out_dir);

double cmd_invert(const RunConfig& config, const std::string& image_path, const std::string& out_dir);

EvalMetrics cmd_swap(const std::string& run_dir, const std::string& source_image,
                     const std::string& target_image, const std::string& out_dir);

void cmd_gen(const RunConfig& config, uint64_t latent_seed, const std::string& out_dir,
             const std::string& stem);

// loads the world + mixer of a finished run
RunConfig run_dir_config(const std::string& run_dir);

}  // namespace lswap
