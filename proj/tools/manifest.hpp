#pragma once

#include <sohpie/pipeline.hpp>

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace sohpie::cli {

std::string fnv1a_file_checksum(const std::string& path);

// Run provenance written as manifest.json into every output directory:
// config echo, seed, version, input checksums, per-stage wall-clock, threads.
struct RunManifest {
    std::string command;
    std::string version;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    nlohmann::ordered_json config;
    std::vector<std::pair<std::string, std::string>> inputs; // path, checksum
    std::vector<StageTiming> stages;
    std::vector<std::string> outputs;

    void add_input(const std::string& path);
    void write(const std::string& out_dir) const;
};

} // namespace sohpie::cli
