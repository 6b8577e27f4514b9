#pragma once

// File formats.
//
// Dataset header: text file of key=value lines ('#' starts a comment)
//   n_time=200
//   n_voxel=1024
//   layout=32x32x1
//   encoding=text|binary
//   data=values.txt
//   voxel_ids=ids.txt        (optional, default 0..V-1)
//   mask.<name>=mask.txt     (optional, any number)
// Relative paths resolve against the header's directory. Text data has one
// row per time point holding V values; binary data is little-endian float64
// in the same row-major order. Masks hold one 0/1 value per line.

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "glmh/model.hpp"

namespace glmh {

namespace fs = std::filesystem;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& line) {
  const auto pos = line.find('#');
  return trim(pos == std::string::npos ? line : line.substr(0, pos));
}

inline bool parse_double(const std::string& tok, double& out) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  if (ec == std::errc() && ptr == e) return true;
  // from_chars rejects "inf"/"nan" spellings on some libraries; fall back.
  char* end = nullptr;
  out = std::strtod(tok.c_str(), &end);
  return end == tok.c_str() + tok.size() && !tok.empty();
}

inline std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return in;
}

inline std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Whitespace-delimited numeric matrix, one row per non-empty line. Every row
// must have the same number of finite values. expected_rows < 0 accepts any
// count.
inline MatrixXd read_matrix_text(const fs::path& path, Index expected_rows = -1, Index expected_cols = -1) {
  auto in = detail::open_in(path);
  std::vector<double> vals;
  Index rows = 0, cols = -1;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = detail::strip_comment(line);
    if (body.empty()) continue;
    std::istringstream ss(body);
    std::string tok;
    Index n = 0;
    while (ss >> tok) {
      double v = 0.0;
      if (!detail::parse_double(tok, v)) {
        throw InputError(path.string() + ":" + std::to_string(lineno) + ": cannot parse '" + tok + "'");
      }
      if (!std::isfinite(v)) {
        throw InputError(path.string() + ":" + std::to_string(lineno) + ": non-finite value '" + tok + "'");
      }
      vals.push_back(v);
      ++n;
    }
    if (cols < 0) cols = n;
    if (n != cols) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols) +
                       " values, found " + std::to_string(n));
    }
    ++rows;
  }
  if (cols < 0) cols = 0;
  if (expected_rows >= 0 && rows != expected_rows) {
    throw InputError(path.string() + ": expected " + std::to_string(expected_rows) + " rows, found " +
                     std::to_string(rows));
  }
  if (expected_cols >= 0 && rows > 0 && cols != expected_cols) {
    throw InputError(path.string() + ": expected " + std::to_string(expected_cols) + " columns, found " +
                     std::to_string(cols));
  }
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = vals[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

inline void write_matrix_text(const fs::path& path, const MatrixXd& m, const std::string& header = {}) {
  auto out = detail::open_out(path);
  if (!header.empty()) out << "# " << header << '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << detail::format_double(m(r, c));
    }
    out << '\n';
  }
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffU) << (8 * (7 - i));
    return r;
  }
}

}  // namespace detail

// Row-major little-endian float64.
inline void write_matrix_binary(const fs::path& path, const MatrixXd& m) {
  auto out = detail::open_out(path, std::ios::binary);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      std::uint64_t bits = 0;
      const double v = m(r, c);
      std::memcpy(&bits, &v, 8);
      bits = detail::to_little_endian(bits);
      out.write(reinterpret_cast<const char*>(&bits), 8);
    }
  }
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

inline MatrixXd read_matrix_binary(const fs::path& path, Index rows, Index cols) {
  auto in = detail::open_in(path, std::ios::binary);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::uintmax_t>(in.tellg());
  in.seekg(0);
  const auto row_bytes = static_cast<std::uintmax_t>(cols) * 8U;
  if (bytes != static_cast<std::uintmax_t>(rows) * row_bytes) {
    const std::string found = row_bytes == 0 ? "0" : std::to_string(bytes / row_bytes);
    throw InputError(path.string() + ": expected " + std::to_string(rows) + " rows of " + std::to_string(cols) +
                     " float64 values, found " + found + " rows (" + std::to_string(bytes) + " bytes)");
  }
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      std::uint64_t bits = 0;
      in.read(reinterpret_cast<char*>(&bits), 8);
      bits = detail::to_little_endian(bits);
      double v = 0.0;
      std::memcpy(&v, &bits, 8);
      if (!std::isfinite(v)) {
        throw InputError(path.string() + ": non-finite value at row " + std::to_string(r + 1) + ", column " +
                         std::to_string(c + 1));
      }
      m(r, c) = v;
    }
  }
  return m;
}

// Whitespace-separated non-negative integers, '#' comments allowed.
inline std::vector<Index> read_index_list(const fs::path& path) {
  auto in = detail::open_in(path);
  std::vector<Index> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(detail::strip_comment(line));
    std::string tok;
    while (ss >> tok) {
      long long v = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0) {
        throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected a non-negative index, got '" +
                         tok + "'");
      }
      out.push_back(static_cast<Index>(v));
    }
  }
  return out;
}

inline void write_index_list(const fs::path& path, const std::vector<Index>& idx) {
  auto out = detail::open_out(path);
  for (Index i : idx) out << i << '\n';
}

// One 0/1 value per line.
inline std::vector<std::uint8_t> read_mask(const fs::path& path, Index expected_length = -1) {
  auto in = detail::open_in(path);
  std::vector<std::uint8_t> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = detail::strip_comment(line);
    if (body.empty()) continue;
    if (body != "0" && body != "1") {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": mask values must be 0 or 1, got '" + body +
                       "'");
    }
    out.push_back(body == "1" ? 1 : 0);
  }
  if (expected_length >= 0 && static_cast<Index>(out.size()) != expected_length) {
    throw InputError(path.string() + ": expected " + std::to_string(expected_length) + " mask entries, found " +
                     std::to_string(out.size()));
  }
  return out;
}

inline void write_mask(const fs::path& path, const std::vector<std::uint8_t>& mask) {
  auto out = detail::open_out(path);
  for (auto m : mask) out << (m ? '1' : '0') << '\n';
}

// key=value file. Duplicate keys and malformed lines are errors.
inline std::map<std::string, std::string> read_key_values(const fs::path& path) {
  auto in = detail::open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = detail::strip_comment(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected key=value, got '" + body + "'");
    }
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    if (key.empty()) throw InputError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

enum class Encoding { text, binary };

namespace detail {

inline long parse_count(const std::map<std::string, std::string>& kv, const std::string& key, const fs::path& path) {
  auto it = kv.find(key);
  if (it == kv.end()) throw InputError(path.string() + ": missing key '" + key + "'");
  long v = 0;
  auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc() || ptr != it->second.data() + it->second.size() || v < 1) {
    throw InputError(path.string() + ": '" + key + "' must be a positive integer, got '" + it->second + "'");
  }
  return v;
}

inline std::array<int, 3> parse_layout(const std::string& s, const fs::path& path) {
  std::array<int, 3> out{1, 1, 1};
  std::istringstream ss(s);
  std::string part;
  int i = 0;
  while (std::getline(ss, part, 'x')) {
    if (i >= 3) throw InputError(path.string() + ": layout has more than 3 dimensions");
    int v = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size() || v < 1) {
      throw InputError(path.string() + ": malformed layout '" + s + "'");
    }
    out[static_cast<std::size_t>(i++)] = v;
  }
  if (i == 0) throw InputError(path.string() + ": malformed layout '" + s + "'");
  return out;
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() ? q : base / q;
}

}  // namespace detail

inline Dataset load_dataset(const fs::path& header) {
  const auto kv = read_key_values(header);
  const fs::path base = header.parent_path();
  static const std::vector<std::string> known{"n_time", "n_voxel", "layout", "encoding", "data", "voxel_ids"};
  for (const auto& [k, v] : kv) {
    if (k.rfind("mask.", 0) == 0) continue;
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw InputError(header.string() + ": unknown key '" + k + "'");
    }
  }
  const long T = detail::parse_count(kv, "n_time", header);
  const long V = detail::parse_count(kv, "n_voxel", header);
  auto data_it = kv.find("data");
  if (data_it == kv.end()) throw InputError(header.string() + ": missing key 'data'");

  Encoding enc = Encoding::text;
  if (auto it = kv.find("encoding"); it != kv.end()) {
    if (it->second == "binary") {
      enc = Encoding::binary;
    } else if (it->second != "text") {
      throw InputError(header.string() + ": encoding must be 'text' or 'binary', got '" + it->second + "'");
    }
  }

  Dataset ds;
  const fs::path data_path = detail::resolve(base, data_it->second);
  ds.values = enc == Encoding::binary ? read_matrix_binary(data_path, T, V) : read_matrix_text(data_path, T, V);
  if (auto it = kv.find("layout"); it != kv.end()) {
    ds.layout = detail::parse_layout(it->second, header);
    if (static_cast<long>(ds.layout[0]) * ds.layout[1] * ds.layout[2] != V) {
      throw InputError(header.string() + ": layout " + it->second + " does not hold " + std::to_string(V) +
                       " voxels");
    }
  } else {
    ds.layout = {static_cast<int>(V), 1, 1};
  }
  if (auto it = kv.find("voxel_ids"); it != kv.end()) {
    for (Index id : read_index_list(detail::resolve(base, it->second))) {
      ds.voxel_ids.push_back(static_cast<std::uint64_t>(id));
    }
    if (static_cast<long>(ds.voxel_ids.size()) != V) {
      throw InputError(header.string() + ": voxel_ids has " + std::to_string(ds.voxel_ids.size()) +
                       " entries, expected " + std::to_string(V));
    }
  } else {
    for (long v = 0; v < V; ++v) ds.voxel_ids.push_back(static_cast<std::uint64_t>(v));
  }
  for (const auto& [k, v] : kv) {
    if (k.rfind("mask.", 0) != 0) continue;
    const std::string name = k.substr(5);
    if (name.empty()) throw InputError(header.string() + ": mask key without a name");
    ds.masks[name] = read_mask(detail::resolve(base, v), V);
  }
  ds.validate();
  return ds;
}

// Writes <stem>.txt (header), <stem>.data.{txt,bin}, <stem>.ids.txt and one
// <stem>.mask.<name>.txt per mask next to `header`.
inline void save_dataset(const fs::path& header, const Dataset& ds, Encoding enc = Encoding::text) {
  ds.validate();
  const fs::path base = header.parent_path();
  const std::string stem = header.stem().string();
  const std::string data_name = stem + (enc == Encoding::binary ? ".data.bin" : ".data.txt");
  const std::string ids_name = stem + ".ids.txt";
  if (enc == Encoding::binary) {
    write_matrix_binary(base / data_name, ds.values);
  } else {
    write_matrix_text(base / data_name, ds.values);
  }
  {
    auto out = detail::open_out(base / ids_name);
    for (auto id : ds.voxel_ids) out << id << '\n';
  }
  auto out = detail::open_out(header);
  out << "n_time=" << ds.n_time() << '\n';
  out << "n_voxel=" << ds.n_voxel() << '\n';
  out << "layout=" << ds.layout[0] << 'x' << ds.layout[1] << 'x' << ds.layout[2] << '\n';
  out << "encoding=" << (enc == Encoding::binary ? "binary" : "text") << '\n';
  out << "data=" << data_name << '\n';
  out << "voxel_ids=" << ids_name << '\n';
  for (const auto& [name, mask] : ds.masks) {
    const std::string mask_name = stem + ".mask." + name + ".txt";
    write_mask(base / mask_name, mask);
    out << "mask." << name << '=' << mask_name << '\n';
  }
  if (!out) throw InputError("failed writing '" + header.string() + "'");
}

}  // namespace glmh
