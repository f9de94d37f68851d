#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>

#include "tightknot/geometry.hpp"

namespace tightknot {

struct ParseError : std::runtime_error {
  int line = 0;
  ParseError(const std::string& msg, int line_no)
      : std::runtime_error(msg + " (line " + std::to_string(line_no) + ")"),
        line(line_no) {}
};

/// Shortest decimal representation that round-trips the double exactly.
inline std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// Polyline file format:
//   # optional comments
//   TIGHTKNOT 1
//   <vertex count>
//   x y z        (one vertex per line)

inline void write_polygon(std::ostream& os, const Polygon& p) {
  os << "TIGHTKNOT 1\n" << p.size() << "\n";
  for (std::size_t i = 0; i < p.size(); ++i)
    os << format_double(p[i].x()) << ' ' << format_double(p[i].y()) << ' '
       << format_double(p[i].z()) << '\n';
}

inline void write_polygon(const std::string& path, const Polygon& p) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_polygon(os, p);
}

inline Polygon read_polygon(std::istream& is) {
  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line[0] == '#') continue;
      return true;
    }
    return false;
  };

  if (!next_line()) throw ParseError("missing TIGHTKNOT header", line_no);
  {
    std::istringstream ss(line);
    std::string magic;
    int version = 0;
    ss >> magic >> version;
    if (magic != "TIGHTKNOT" || version != 1)
      throw ParseError("bad header, expected 'TIGHTKNOT 1'", line_no);
  }
  if (!next_line()) throw ParseError("missing vertex count", line_no);
  long count = 0;
  {
    std::istringstream ss(line);
    ss >> count;
    if (ss.fail() || count < 3)
      throw ParseError("bad vertex count '" + line + "'", line_no);
  }
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k) {
    if (!next_line())
      throw ParseError("expected " + std::to_string(count) + " vertices, got " +
                           std::to_string(k),
                       line_no);
    std::istringstream ss(line);
    double x, y, z;
    ss >> x >> y >> z;
    if (ss.fail()) throw ParseError("bad vertex line '" + line + "'", line_no);
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
      throw ParseError("non-finite coordinate", line_no);
    pts.emplace_back(x, y, z);
  }
  Polygon p(std::move(pts));
  validate_polygon(p);
  return p;
}

inline Polygon read_polygon(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_polygon(is);
}

}  // namespace tightknot
