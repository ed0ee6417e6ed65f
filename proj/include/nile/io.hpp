#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "nile/common.hpp"

namespace nile::io {

// Insertion-ordered JSON keeps documented field orders stable on disk.
using json = nlohmann::ordered_json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

inline std::string file_hash_hex(const std::string& path) {
  std::uint64_t h = fnv1a64(read_file(path));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

inline std::string hash_hex(std::string_view content) {
  std::uint64_t h = fnv1a64(content);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

// Matrices serialize as decimal text; the shortest round-trip encoding is
// endianness-free and restores the exact double bits.
inline json matrix_to_json(const Matrix& m) {
  json j;
  j["rows"] = m.rows;
  j["cols"] = m.cols;
  j["data"] = m.v;
  return j;
}

inline Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.v = j.at("data").get<std::vector<double>>();
  if (m.v.size() != m.rows * m.cols)
    throw DataError("matrix data size mismatch");
  return m;
}

}  // namespace nile::io
