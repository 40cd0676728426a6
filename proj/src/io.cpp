#include "oral3d/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "oral3d/error.hpp"

namespace oral3d::io {

using nlohmann::json;

namespace {

json read_json(const fs::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, p.string() + ": " + e.what());
  }
}

template <class T>
T field(const json& j, const char* key, const fs::path& p) {
  if (!j.contains(key)) throw Error(ErrorCode::Io, p.string() + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, p.string() + ": bad value for '" + key + "': " + e.what());
  }
}

json volume_header(const Volume3& v) {
  return {{"dims", {v.nx(), v.ny(), v.nz()}},
          {"spacing", v.spacing()},
          {"dtype", "f32le"},
          {"range", {-1, 1}}};
}

Volume3 read_pair(const fs::path& stem, json& header) {
  const fs::path hp = fs::path(stem).concat(".json");
  header = read_json(hp);
  const auto dims = field<std::vector<int>>(header, "dims", hp);
  if (dims.size() != 3 || dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
    throw Error(ErrorCode::Io, hp.string() + ": dims must be three positive extents");
  }
  if (field<std::string>(header, "dtype", hp) != "f32le") throw Error(ErrorCode::Io, hp.string() + ": dtype must be f32le");
  const double spacing = header.contains("spacing") ? field<double>(header, "spacing", hp) : 1.0;
  const Dims3 d{dims[0], dims[1], dims[2]};
  const fs::path rp = fs::path(stem).concat(".raw");
  auto values = parse_f32le(read_bytes(rp));
  if (values.size() != d.count()) {
    throw Error(ErrorCode::Io, rp.string() + ": expected " + std::to_string(d.count()) + " values, found " +
                                   std::to_string(values.size()));
  }
  return Volume3(d, std::move(values), spacing);
}

void write_pair(const fs::path& stem, const Volume3& v, const json& header) {
  std::vector<std::uint8_t> bytes;
  append_f32le(bytes, v.values());
  write_bytes(fs::path(stem).concat(".raw"), bytes);
  write_text(fs::path(stem).concat(".json"), header.dump(2) + "\n");
}

}  // namespace

fs::path volume_stem(const fs::path& p) {
  const auto ext = p.extension();
  if (ext == ".json" || ext == ".raw" || ext == ".vol") return fs::path(p).replace_extension();
  return p;
}

void append_f32le(std::vector<std::uint8_t>& out, std::span<const float> values) {
  out.reserve(out.size() + values.size() * 4);
  for (float f : values) {
    const auto u = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
  }
}

std::vector<float> parse_f32le(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0) throw Error(ErrorCode::Io, "f32 payload length is not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    out[i] = std::bit_cast<float>(u);
  }
  return out;
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, std::span<const std::uint8_t> bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + p.string());
}

void write_text(const fs::path& p, const std::string& text) {
  write_bytes(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& p) {
  const auto bytes = read_bytes(p);
  return std::string(bytes.begin(), bytes.end());
}

void write_volume(const fs::path& p, const Volume3& v) { write_pair(volume_stem(p), v, volume_header(v)); }

Volume3 read_volume(const fs::path& p) {
  json header;
  return read_pair(volume_stem(p), header);
}

void write_flat(const fs::path& p, const FVolume& f) {
  json header = volume_header(f.grid());
  header["depth_step"] = f.depth_step();
  write_pair(volume_stem(p), f.grid(), header);
}

FVolume read_flat(const fs::path& p) {
  json header;
  const fs::path stem = volume_stem(p);
  Volume3 v = read_pair(stem, header);
  const double step = field<double>(header, "depth_step", fs::path(stem).concat(".json"));
  return FVolume(std::move(v), step);
}

void write_pgm(const fs::path& p, const Image2& img) {
  std::string head = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n65535\n";
  std::vector<std::uint8_t> bytes(head.begin(), head.end());
  for (float v : img.values()) {
    const double t = std::clamp((static_cast<double>(v) + 1.0) * 0.5, 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    bytes.push_back(static_cast<std::uint8_t>(q >> 8));
    bytes.push_back(static_cast<std::uint8_t>(q & 0xff));
  }
  write_bytes(p, bytes);
}

Image2 read_pgm(const fs::path& p) {
  const auto bytes = read_bytes(p);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P5") throw Error(ErrorCode::Io, p.string() + ": not a binary PGM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw Error(ErrorCode::Io, p.string() + ": malformed PGM header");
  }
  ++pos;  // single whitespace before the raster
  if (w < 1 || h < 1 || maxval != 65535) throw Error(ErrorCode::Io, p.string() + ": expected a 16-bit PGM");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() < pos + 2 * n) throw Error(ErrorCode::Io, p.string() + ": truncated raster");
  Image2 img(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned q = (static_cast<unsigned>(bytes[pos + 2 * i]) << 8) | bytes[pos + 2 * i + 1];
    img.values()[i] = static_cast<float>(q / 65535.0 * 2.0 - 1.0);
  }
  return img;
}

void write_curve(const fs::path& p, const ArchCurve& c) {
  const json j = {{"degree", c.degree}, {"coeffs", c.coeffs}, {"x_min", c.x_min}, {"x_max", c.x_max}};
  write_text(p, j.dump(2) + "\n");
}

ArchCurve read_curve(const fs::path& p) {
  const json j = read_json(p);
  ArchCurve c;
  c.degree = field<int>(j, "degree", p);
  c.coeffs = field<std::vector<double>>(j, "coeffs", p);
  c.x_min = field<double>(j, "x_min", p);
  c.x_max = field<double>(j, "x_max", p);
  if (c.degree < 1 || static_cast<int>(c.coeffs.size()) != c.degree + 1 || !(c.x_min < c.x_max)) {
    throw Error(ErrorCode::Io, p.string() + ": curve needs degree + 1 coefficients and x_min < x_max");
  }
  return c;
}

}  // namespace oral3d::io
