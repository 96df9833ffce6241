#ifndef FINSLERHJ_IO_HPP_
#define FINSLERHJ_IO_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "finslerhj/grid.hpp"
#include "finslerhj/types.hpp"

namespace finslerhj {

//! One header line "# nx=.. ny=.. bounds=x1min,x2min,x1max,x2max", then ny
//! rows of nx comma-separated values (row j = fixed x2), %.17g, nan/inf
//! spelled out.
inline std::string FieldToCsv(ScalarField const& f, Box<2> const& bounds) {
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "# nx=%zu ny=%zu bounds=", f.nx(), f.ny());
  out += buf;
  for (int q = 0; q < 4; ++q) {
    double const v = q < 2 ? bounds.lo[q] : bounds.hi[q - 2];
    std::snprintf(buf, sizeof buf, q ? ",%.17g" : "%.17g", v);
    out += buf;
  }
  out += '\n';
  for (std::size_t j = 0; j < f.ny(); ++j) {
    for (std::size_t i = 0; i < f.nx(); ++i) {
      double const v = f(i, j);
      if (i) out += ',';
      if (std::isnan(v)) {
        out += "nan";
      } else if (std::isinf(v)) {
        out += v > 0 ? "inf" : "-inf";
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

struct CsvField {
  ScalarField field;
  Box<2> bounds;
};

inline CsvField FieldFromCsv(std::string const& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header) || header.rfind("# ", 0) != 0) {
    throw InputError("field CSV must start with a '# nx= ny= bounds=' header");
  }
  std::size_t nx = 0, ny = 0;
  double b[4] = {0, 0, 0, 0};
  if (std::sscanf(header.c_str(), "# nx=%zu ny=%zu bounds=%lf,%lf,%lf,%lf", &nx, &ny,
                  &b[0], &b[1], &b[2], &b[3]) != 6 ||
      nx < 2 || ny < 2) {
    throw InputError("malformed field CSV header: " + header);
  }
  std::vector<double> values;
  values.reserve(nx * ny);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        double const v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        values.push_back(v);
      } catch (std::exception const&) {
        throw InputError("bad CSV value '" + cell + "'");
      }
      ++cols;
    }
    if (cols != nx) throw InputError("CSV row has the wrong number of columns");
    ++rows;
  }
  if (rows != ny) throw InputError("CSV has the wrong number of rows");
  return {ScalarField(nx, ny, std::move(values)), Box<2>{{b[0], b[1]}, {b[2], b[3]}}};
}

inline std::string ReadFile(std::filesystem::path const& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void WriteFile(std::filesystem::path const& p, std::string const& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << content;
  if (!out) throw Error("write failed for " + p.string());
}

//! 64-bit FNV-1a, hex encoded.
inline std::string Fnv1a(std::string const& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace finslerhj

#endif  // FINSLERHJ_IO_HPP_
