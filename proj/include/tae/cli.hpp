#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tae/trainer.hpp"

namespace tae::cli {

// Runs one subcommand (train | induce | eval | stats). `args` excludes the
// program name. Exit codes: 0 success, 1 data/validation error, 2 usage
// error.
int run(const std::vector<std::string>& args);
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

// Loss table: "epoch,phase,mean_loss" header then one row per epoch, losses
// in fixed notation with 12 decimals.
std::string emit_loss_plot_data(const std::vector<EpochRecord>& history);

std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace tae::cli
