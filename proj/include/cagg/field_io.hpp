#pragma once

// "CAGG-FIELD v1" dumps: one ASCII header line
//   CAGG-FIELD v1 <nx> <ny> <h> <ox> <oy>\n
// followed by nx*ny little-endian IEEE-754 float64 values in row-major order.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "cagg/error.hpp"
#include "cagg/grid.hpp"

namespace cagg {

inline constexpr const char* kFieldMagic = "CAGG-FIELD v1";

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
    return r;
  }
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string field_header(const GridSpec& g) {
  return std::string(kFieldMagic) + " " + std::to_string(g.nx) + " " + std::to_string(g.ny) + " " +
         detail::format_double(g.h) + " " + detail::format_double(g.ox) + " " + detail::format_double(g.oy) + "\n";
}

inline void write_field(std::ostream& os, const ScalarField& f) {
  os << field_header(f.grid());
  for (double v : f.values()) {
    std::uint64_t bits = detail::to_little_endian(std::bit_cast<std::uint64_t>(v));
    os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!os) throw std::runtime_error("write_field: stream write failed");
}

inline void write_field(const std::string& path, const ScalarField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_field: cannot open " + path);
  write_field(os, f);
}

inline ScalarField read_field(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw config_error("read_field: missing header");
  std::istringstream hs(line);
  std::string magic, version;
  GridSpec g;
  hs >> magic >> version >> g.nx >> g.ny >> g.h >> g.ox >> g.oy;
  if (!hs || magic + " " + version != kFieldMagic) throw config_error("read_field: bad header '" + line + "'");
  g.validate();
  std::vector<double> values(g.size());
  for (auto& v : values) {
    std::uint64_t bits = 0;
    if (!is.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw config_error("read_field: truncated payload");
    v = std::bit_cast<double>(detail::to_little_endian(bits));
  }
  return ScalarField(g, std::move(values));
}

inline ScalarField read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_field: cannot open " + path);
  return read_field(is);
}

}  // namespace cagg
