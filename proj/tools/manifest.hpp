#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cogdiag::cli {

struct ManifestInput {
    std::string role;
    std::filesystem::path path;
};

/// SHA-256 of a file's bytes, lowercase hex.
std::string sha256_hex(const std::filesystem::path& path);

/// Creates `<parent>/<command>-seed<seed>`; refuses to reuse an existing
/// directory unless force is set.
std::filesystem::path make_run_directory(const std::filesystem::path& parent,
                                         const std::string& command, std::uint64_t seed,
                                         bool force);

/// Writes manifest.json next to the other outputs. Everything except the
/// "timing" field is a pure function of command, config and input bytes.
void write_manifest(const std::filesystem::path& run_dir, const std::string& command,
                    std::uint64_t seed, const nlohmann::json& resolved_config,
                    const nlohmann::json& config_sources, const std::vector<ManifestInput>& inputs,
                    const std::vector<std::string>& outputs, double duration_seconds);

/// Writes a string to run_dir/name with LF endings.
void write_output(const std::filesystem::path& run_dir, const std::string& name,
                  const std::string& content);

}  // namespace cogdiag::cli
