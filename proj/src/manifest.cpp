// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#include "skinpol/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace skinpol::io {

std::uint64_t fnv1a64(const void *data, std::size_t len) {
    const auto *p = static_cast<const unsigned char *>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

std::string to_hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return "fnv1a64:" + os.str();
}

std::string read_all(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for hashing: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string hash_file(const std::string &path) {
    const std::string bytes = read_all(path);
    return to_hex(fnv1a64(bytes.data(), bytes.size()));
}

std::string hash_string(const std::string &s) { return to_hex(fnv1a64(s.data(), s.size())); }

void RunManifest::add_file(const std::string &dir, const std::string &rel_path) {
    files.push_back({rel_path, hash_file(dir + "/" + rel_path)});
}

void RunManifest::write(const std::string &path) const {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["command"] = command;
    j["config"] = config_echo;
    j["seed"] = seed;
    j["workers"] = workers;
    j["elapsed_seconds"] = elapsed_seconds;
    j["chromophore_hash"] = chromophore_hash;
    nlohmann::json jfiles = nlohmann::json::array();
    for (const auto &f : files) jfiles.push_back({{"path", f.path}, {"checksum", f.checksum}});
    j["files"] = jfiles;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

RunManifest RunManifest::load_verified(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    nlohmann::json j;
    in >> j;
    reject_unknown_keys(j,
                        {"schema_version", "command", "config", "seed", "workers",
                         "elapsed_seconds", "chromophore_hash", "files"},
                        "manifest");

    RunManifest m;
    m.schema_version = j.at("schema_version").get<int>();
    m.command = j.at("command").get<std::string>();
    m.config_echo = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.workers = j.value("workers", 1);
    m.elapsed_seconds = j.value("elapsed_seconds", 0.0);
    m.chromophore_hash = j.value("chromophore_hash", std::string());

    const std::string dir = std::filesystem::path(path).parent_path().string();
    for (const auto &f : j.at("files")) {
        ManifestFile mf{f.at("path").get<std::string>(), f.at("checksum").get<std::string>()};
        const std::string full = dir.empty() ? mf.path : dir + "/" + mf.path;
        if (!std::filesystem::exists(full))
            throw std::runtime_error("manifest: missing file " + full);
        if (hash_file(full) != mf.checksum)
            throw std::runtime_error("manifest: checksum mismatch for " + full);
        m.files.push_back(mf);
    }
    return m;
}

void reject_unknown_keys(const nlohmann::json &obj, const std::vector<std::string> &allowed,
                         const std::string &context) {
    if (!obj.is_object()) throw std::runtime_error(context + ": expected a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw std::runtime_error(context + ": unknown key \"" + it.key() + "\"");
    }
}

}  // namespace skinpol::io
