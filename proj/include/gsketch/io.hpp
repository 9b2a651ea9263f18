#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsketch/sketch.hpp"

namespace gsketch {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Dataset {
  Mat A;
  Vec b;
};

// One row per line: d feature values then the label, comma separated.
// Blank lines and lines starting with '#' are skipped.
inline Dataset read_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (vals.size() < 2) throw ParseError("line " + std::to_string(lineno) + ": need at least one feature and a label");
    if (!rows.empty() && vals.size() != rows.front().size())
      throw ParseError("line " + std::to_string(lineno) + ": inconsistent column count");
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError("empty input");
  Dataset D;
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows.front().size()) - 1;
  D.A.resize(n, d);
  D.b.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) D.A(i, k) = rows[i][k];
    D.b[i] = rows[i][d];
  }
  return D;
}

inline constexpr char kStreamMagic[4] = {'G', 'S', 'K', 'T'};
inline constexpr uint32_t kStreamVersion = 1;

// Header (magic, u32 version, u64 n, u32 d) then n records of d+1
// little-endian doubles.
inline void write_bin(std::ostream& os, const Mat& A, const Vec& b) {
  os.write(kStreamMagic, 4);
  bin::put<uint32_t>(os, kStreamVersion);
  bin::put<uint64_t>(os, static_cast<uint64_t>(A.rows()));
  bin::put<uint32_t>(os, static_cast<uint32_t>(A.cols()));
  for (int i = 0; i < A.rows(); ++i) {
    for (int k = 0; k < A.cols(); ++k) bin::put<double>(os, A(i, k));
    bin::put<double>(os, b[i]);
  }
}

inline Dataset read_bin(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is) throw ParseError("empty input");
  if (std::memcmp(magic, kStreamMagic, 4) != 0) throw ParseError("bad magic");
  try {
    if (bin::get<uint32_t>(is) != kStreamVersion) throw ParseError("unsupported version");
    uint64_t n = bin::get<uint64_t>(is);
    uint32_t d = bin::get<uint32_t>(is);
    if (n == 0 || d == 0) throw ParseError("empty input");
    if (n > (uint64_t{1} << 32) || d > 4096) throw ParseError("header out of range");
    Dataset D;
    D.A.resize(static_cast<Eigen::Index>(n), d);
    D.b.resize(static_cast<Eigen::Index>(n));
    for (uint64_t i = 0; i < n; ++i) {
      for (uint32_t k = 0; k < d; ++k) D.A(i, k) = bin::get<double>(is);
      D.b[i] = bin::get<double>(is);
    }
    return D;
  } catch (const ParseError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw ParseError(e.what());
  }
}

inline Dataset read_dataset(const std::string& path, const std::string& format) {
  std::ifstream f(path, format == "bin" ? std::ios::binary : std::ios::in);
  if (!f) throw ParseError("cannot open " + path);
  if (format == "bin") return read_bin(f);
  if (format == "csv") return read_csv(f);
  throw ParseError("unknown format " + format);
}

}  // namespace gsketch
