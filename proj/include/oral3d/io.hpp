#pragma once

#include <cstdint>
#include <string>
#include <filesystem>
#include <span>
#include <vector>

#include "oral3d/arch.hpp"
#include "oral3d/synthesis.hpp"
#include "oral3d/volume.hpp"

namespace oral3d::io {

namespace fs = std::filesystem;

// Volume files are a pair: <stem>.json header and <stem>.raw little-endian
// f32 payload in x-fastest order. Any of "<stem>", "<stem>.json",
// "<stem>.raw" or "<stem>.vol" names the same pair.
fs::path volume_stem(const fs::path& p);

void write_volume(const fs::path& p, const Volume3& v);
Volume3 read_volume(const fs::path& p);

// Flattened volumes add depth_step to the header.
void write_flat(const fs::path& p, const FVolume& f);
FVolume read_flat(const fs::path& p);

// Binary 16-bit PGM, (-1, 1) mapped linearly onto [0, 65535].
void write_pgm(const fs::path& p, const Image2& img);
Image2 read_pgm(const fs::path& p);

void write_curve(const fs::path& p, const ArchCurve& c);
ArchCurve read_curve(const fs::path& p);

// Little-endian f32 helpers shared with the model codec.
void append_f32le(std::vector<std::uint8_t>& out, std::span<const float> values);
std::vector<float> parse_f32le(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_bytes(const fs::path& p);
void write_bytes(const fs::path& p, std::span<const std::uint8_t> bytes);
void write_text(const fs::path& p, const std::string& text);
std::string read_text(const fs::path& p);

}  // namespace oral3d::io
