#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace nelson::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestVersion = 1;

const std::vector<std::string>& command_names();

struct CommandResult {
    std::vector<std::string> outputs;  // file names relative to the output directory
    int exit_code = 0;                 // 1 when a built-in check fails
};

// Runs one experiment and writes its CSVs and plot script into out_dir.
CommandResult run_command(const std::string& name, const RunConfig& config, const std::filesystem::path& out_dir);

struct RunRequest {
    std::string command;
    Json config;  // a configuration file or a previously written manifest
    std::filesystem::path out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

struct RunSummary {
    CommandResult result;
    Json manifest;
};

// Applies overrides, runs the command and writes manifest.json next to the outputs.
RunSummary execute(const RunRequest& request);

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace nelson::cli
