// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace skinpol::io {

// FNV-1a 64-bit content hash, hex-encoded. Used for manifest integrity
// and the chromophore data-file fingerprint.
std::uint64_t fnv1a64(const void *data, std::size_t len);
std::string hash_file(const std::string &path);
std::string hash_string(const std::string &s);

struct ManifestFile {
    std::string path;  // relative to the manifest directory
    std::string checksum;
};

struct RunManifest {
    int schema_version = 1;
    std::string command;
    nlohmann::json config_echo;
    std::uint64_t seed = 0;
    int workers = 1;
    double elapsed_seconds = 0.0;
    std::string chromophore_hash;
    std::vector<ManifestFile> files;

    void add_file(const std::string &dir, const std::string &rel_path);
    void write(const std::string &path) const;
    // Loads and verifies every referenced file's checksum; throws on any
    // missing file or mismatch.
    static RunManifest load_verified(const std::string &path);
};

// Strict JSON object check: every key must be in `allowed`; unknown keys
// are errors, not warnings.
void reject_unknown_keys(const nlohmann::json &obj, const std::vector<std::string> &allowed,
                         const std::string &context);

}  // namespace skinpol::io
