#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qshield {

/// Provenance record written atomically next to every CLI artifact; an
/// output is reproducible from its manifest (tool version + config + seed).
struct RunManifest {
    std::string tool_version;
    std::string subcommand;
    std::string config_hash; // fnv1a64 hex of the canonicalized config JSON
    std::uint64_t master_seed = 0;
    std::string created_utc; // ISO 8601
    std::vector<std::string> outputs;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::string config_hash_hex(const std::string& canonical_json);
std::string utc_timestamp_now();

/// Serializes to <dir>/manifest.json via write-temp-then-rename.
void write_manifest(const RunManifest& manifest, const std::string& dir);

/// Atomic file write helper used for all artifacts.
void write_file_atomic(const std::string& path, const std::string& contents);

} // namespace qshield
