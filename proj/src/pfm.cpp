// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#include "skinpol/pfm.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace skinpol::io {

void write_pfm(const std::string &path, const Texture &tex) {
    if (tex.width <= 0 || tex.height <= 0)
        throw std::invalid_argument("write_pfm: empty texture");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pfm: cannot open " + path);
    out << "Pf\n" << tex.width << " " << tex.height << "\n-1.0\n";
    std::vector<float> row(tex.width);
    for (int y = tex.height - 1; y >= 0; --y) {
        for (int x = 0; x < tex.width; ++x)
            row[x] = static_cast<float>(tex.at(x, y));
        out.write(reinterpret_cast<const char *>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("write_pfm: write failed for " + path);
}

Texture read_pfm(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pfm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "Pf") throw std::runtime_error("read_pfm: not a grayscale PFM: " + path);
    int w = 0, h = 0;
    double scale = 0.0;
    in >> w >> h >> scale;
    if (w <= 0 || h <= 0) throw std::runtime_error("read_pfm: bad dimensions in " + path);
    if (scale >= 0.0) throw std::runtime_error("read_pfm: big-endian PFM unsupported: " + path);
    in.get();  // single whitespace after the header

    Texture tex(w, h);
    std::vector<float> row(w);
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char *>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw std::runtime_error("read_pfm: truncated payload in " + path);
        for (int x = 0; x < w; ++x) tex.at(x, y) = row[x];
    }
    return tex;
}

}  // namespace skinpol::io
