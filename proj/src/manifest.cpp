#include "qshield/manifest.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "qshield/errors.hpp"

namespace qshield {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string config_hash_hex(const std::string& canonical_json) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_json)));
    return buf;
}

std::string utc_timestamp_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error(io_errc::bad_format, "cannot write " + tmp.string());
        out << contents;
        out.flush();
        if (!out) throw io_error(io_errc::bad_format, "short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

void write_manifest(const RunManifest& manifest, const std::string& dir) {
    fs::create_directories(dir);
    json j;
    j["tool_version"] = manifest.tool_version;
    j["subcommand"] = manifest.subcommand;
    j["config_hash"] = manifest.config_hash;
    j["master_seed"] = manifest.master_seed;
    j["created_utc"] = manifest.created_utc;
    j["outputs"] = manifest.outputs;
    write_file_atomic((fs::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
}

} // namespace qshield
