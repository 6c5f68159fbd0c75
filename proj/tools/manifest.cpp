#include "manifest.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace sohpie::cli {

std::string fnv1a_file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for checksum: " + path);
    std::uint64_t hash = 1469598103934665603ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ull;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
    return std::string("fnv1a:") + hex;
}

void RunManifest::add_input(const std::string& path) {
    inputs.emplace_back(path, fnv1a_file_checksum(path));
}

void RunManifest::write(const std::string& out_dir) const {
    nlohmann::ordered_json doc;
    doc["command"] = command;
    doc["version"] = version;
    doc["seed"] = seed;
    doc["threads"] = threads;
    doc["config"] = config;
    auto& in = doc["inputs"] = nlohmann::ordered_json::array();
    for (const auto& [path, checksum] : inputs)
        in.push_back({{"path", path}, {"checksum", checksum}});
    auto& st = doc["stages"] = nlohmann::ordered_json::array();
    for (const auto& stage : stages)
        st.push_back({{"stage", stage.stage}, {"seconds", stage.seconds}});
    doc["outputs"] = outputs;

    const std::string path = out_dir + "/manifest.json";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << doc.dump(2) << '\n';
}

} // namespace sohpie::cli
