#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace thermid {

/// Toolkit version string recorded in manifests.
const char* toolkit_version() noexcept;

/// Lower-case hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& data);

/// Record of one artifact-producing command: what ran, with which inputs,
/// seeds and configuration, what it wrote, and how long each stage took.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::map<std::string, std::uint64_t> seeds;
    std::string config_snapshot; ///< empty when no config file was given
    std::map<std::string, std::string> parameters;
    std::vector<std::pair<std::string, std::string>> inputs;  ///< path, sha256
    std::vector<std::pair<std::string, std::string>> outputs; ///< path, sha256
    std::vector<std::pair<std::string, double>> timings_s;

    void add_input(const std::filesystem::path& p);
    void add_output(const std::filesystem::path& p);

    std::string to_json() const;
    void write(const std::filesystem::path& path) const;
};

/// Re-hashes every input and output listed in a manifest file. Returns the
/// paths whose current hash differs (or that are missing).
std::vector<std::string> verify_manifest(const std::filesystem::path& manifest);

} // namespace thermid
