// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "skinpol/texture.hpp"

namespace skinpol::io {

// Grayscale PFM ("Pf"), float32 little-endian (negative scale header),
// rows stored bottom-to-top per the format convention. Round trips are
// bit-exact for float32 payloads.
void write_pfm(const std::string &path, const Texture &tex);
Texture read_pfm(const std::string &path);

}  // namespace skinpol::io
