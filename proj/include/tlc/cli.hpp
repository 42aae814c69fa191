// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "tlc/config.hpp"

namespace tlc::cli {

// Pipeline subcommands; each validates its config, takes an exclusive lock on
// the output directory, writes artifacts atomically and drops a manifest with
// the config hash and file checksums. All are reproducible per (config, seed).
void cmd_simulate(const config::RunConfig& cfg);
void cmd_make_pairs(const config::RunConfig& cfg);
void cmd_train(const config::RunConfig& cfg);
void cmd_calibrate(const config::RunConfig& cfg);
void cmd_project(const config::RunConfig& cfg);
void cmd_smd(const config::RunConfig& cfg);
void cmd_opes(const config::RunConfig& cfg);
void cmd_fes(const config::RunConfig& cfg);
void cmd_report(const config::RunConfig& cfg, const std::vector<std::string>& run_dirs);

// Pair-dataset file: magic "TLCPRS1", u32 version, u32 dim, u64 n_pairs,
// u64 tau_steps, then per pair x_t then x_tau as f64.
void write_pairs(const std::string& path, const dynamics::PairDataset& pairs, int dim);
dynamics::PairDataset read_pairs(const std::string& path, int* dim = nullptr);

std::uint64_t stage_seed(std::uint64_t base, std::uint64_t stage, std::uint64_t index = 0);

}  // namespace tlc::cli
