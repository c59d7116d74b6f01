#include "pulseforge/manifest.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pulseforge/errors.hpp"
#include "pulseforge/io.hpp"

namespace pulseforge {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fnv1a_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("manifest: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[8192];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

FileDigest digest_file(const std::string& path, const std::string& relative_name) {
    FileDigest d;
    d.path = relative_name;
    d.digest = fnv1a_hex(path);
    d.bytes = static_cast<std::uint64_t>(fs::file_size(path));
    return d;
}

std::string iso_timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

json digests_to_json(const std::vector<FileDigest>& digests) {
    json arr = json::array();
    for (const auto& d : digests)
        arr.push_back({{"path", d.path}, {"digest", d.digest}, {"bytes", d.bytes}});
    return arr;
}

std::vector<FileDigest> digests_from_json(const json& arr) {
    std::vector<FileDigest> out;
    for (const auto& d : arr)
        out.push_back(FileDigest{d.at("path").get<std::string>(),
                                 d.at("digest").get<std::string>(),
                                 d.at("bytes").get<std::uint64_t>()});
    return out;
}

}  // namespace

void save_manifest(const std::string& dir, const RunManifest& manifest) {
    const json j = {{"command", manifest.command},
                    {"config", manifest.config_snapshot},
                    {"base_seed", manifest.base_seed},
                    {"inputs", digests_to_json(manifest.inputs)},
                    {"outputs", digests_to_json(manifest.outputs)},
                    {"tool_version", manifest.tool_version},
                    {"timestamp", manifest.timestamp},
                    {"wall_seconds", manifest.wall_seconds}};
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw ValidationError("manifest: cannot write manifest in " + dir);
    out << j.dump(2) << '\n';
}

RunManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("manifest: cannot open " + path);
    json j;
    try {
        in >> j;
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.config_snapshot = j.at("config").get<std::string>();
        m.base_seed = j.at("base_seed").get<std::uint64_t>();
        m.inputs = digests_from_json(j.at("inputs"));
        m.outputs = digests_from_json(j.at("outputs"));
        m.tool_version = j.at("tool_version").get<std::string>();
        m.timestamp = j.at("timestamp").get<std::string>();
        m.wall_seconds = j.at("wall_seconds").get<double>();
        return m;
    } catch (const json::exception& e) {
        throw ValidationError("manifest: bad manifest " + path + ": " + e.what());
    }
}

void verify_manifest(const std::string& dir) {
    const RunManifest m = load_manifest((fs::path(dir) / "manifest.json").string());
    for (const auto& d : m.outputs) {
        const std::string full = (fs::path(dir) / d.path).string();
        if (!fs::exists(full)) throw ValidationError("manifest: missing output " + d.path);
        if (fnv1a_hex(full) != d.digest)
            throw ValidationError("manifest: digest mismatch for " + d.path);
    }
}

std::vector<std::pair<std::string, RunManifest>> scan_manifests(const std::string& root) {
    std::vector<std::pair<std::string, RunManifest>> rows;
    if (!fs::exists(root)) throw ValidationError("manifest: no such directory " + root);
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().filename() == "manifest.json")
            rows.emplace_back(entry.path().string(), load_manifest(entry.path().string()));
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return rows;
}

void write_report_csv(const std::string& path,
                      const std::vector<std::pair<std::string, RunManifest>>& rows) {
    std::ofstream out(path);
    if (!out) throw ValidationError("manifest: cannot write " + path);
    out << "manifest,command,base_seed,tool_version,timestamp,wall_seconds,n_outputs\n";
    for (const auto& [file, m] : rows) {
        out << file << ",\"" << m.command << "\"," << m.base_seed << ',' << m.tool_version << ','
            << m.timestamp << ',' << format_g17(m.wall_seconds) << ',' << m.outputs.size() << '\n';
    }
}

void write_report_markdown(const std::string& path,
                           const std::vector<std::pair<std::string, RunManifest>>& rows) {
    std::ofstream out(path);
    if (!out) throw ValidationError("manifest: cannot write " + path);
    out << "# Run report\n\n";
    out << "| manifest | command | seed | version | timestamp | wall (s) |\n";
    out << "|---|---|---|---|---|---|\n";
    for (const auto& [file, m] : rows)
        out << "| " << file << " | `" << m.command << "` | " << m.base_seed << " | "
            << m.tool_version << " | " << m.timestamp << " | " << m.wall_seconds << " |\n";
    out << "\nOutputs:\n\n";
    for (const auto& [file, m] : rows) {
        out << "- " << file << '\n';
        for (const auto& d : m.outputs)
            out << "  - `" << d.path << "` (" << d.bytes << " bytes, fnv1a " << d.digest << ")\n";
    }
}

}  // namespace pulseforge
