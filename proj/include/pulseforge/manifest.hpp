#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pulseforge {

inline constexpr const char* kToolName = "pulseforge";
inline constexpr const char* kToolVersion = "0.1.0";

struct FileDigest {
    std::string path;    // relative to the artifact directory
    std::string digest;  // fnv1a-64, hex
    std::uint64_t bytes = 0;
};

// One per artifact directory: enough to re-run the command and check that
// nothing on disk drifted.
struct RunManifest {
    std::string command;
    std::string config_snapshot;
    std::uint64_t base_seed = 0;
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;
    std::string tool_version = kToolVersion;
    std::string timestamp;  // ISO 8601 UTC
    double wall_seconds = 0.0;
};

std::string fnv1a_hex(const std::string& path);
FileDigest digest_file(const std::string& path, const std::string& relative_name);

std::string iso_timestamp_now();

// Writes <dir>/manifest.json.
void save_manifest(const std::string& dir, const RunManifest& manifest);
RunManifest load_manifest(const std::string& path);

// Verifies that every recorded output digest still matches the file.
void verify_manifest(const std::string& dir);

// Recursively collects manifests under root; rows come back sorted by path.
std::vector<std::pair<std::string, RunManifest>> scan_manifests(const std::string& root);

void write_report_csv(const std::string& path,
                      const std::vector<std::pair<std::string, RunManifest>>& rows);
void write_report_markdown(const std::string& path,
                           const std::vector<std::pair<std::string, RunManifest>>& rows);

}  // namespace pulseforge
