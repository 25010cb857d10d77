#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "porotr/error.hpp"
#include "porotr/fields.hpp"
#include "porotr/forward.hpp"

namespace porotr {

// Binary layout (all little-endian):
//   "PBT1"  u32 kind  u32 dim  u32 shape[dim]  f64 origin[dim]  f64 h
//   f64 dt  i64 nt  u32 ordering_version  u64 count  u32 ncomp
//   per component: u32 name length, name bytes
//   f64 values[count * ncomp]
// kind 1 is a boundary trace (count = nodes, values per step), kind 2 a
// field file (count = lattice size, component-major). Every file gets a text
// sidecar "<path>.txt" with the same metadata.

enum class FileKind : std::uint32_t { trace = 1, fields = 2 };

struct FileHeader {
  FileKind kind = FileKind::fields;
  int dim = 2;
  std::vector<int> shape;
  std::vector<double> origin;
  double h = 0.0;
  double dt = 0.0;
  std::int64_t nt = 0;
  int ordering_version = kNodeOrderingVersion;
  std::uint64_t count = 0;
  std::vector<std::string> names;
};

namespace detail {

template <class T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  template <class T>
  void put(T v) {
    v = to_le(v);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void bytes(const std::string& s) { buf_ += s; }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) throw IoError(path_ + ": truncated file");
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_le(v);
  }
  std::string bytes(std::size_t n) {
    if (pos_ + n > data_.size()) throw IoError(path_ + ": truncated file");
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string data_, path_;
  std::size_t pos_ = 0;
};

inline std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) throw IoError("read failed for " + p.string());
  return ss.str();
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Writes `content` to a fresh temporary file next to `path` (exclusive
/// create), then renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  std::FILE* f = std::fopen(tmp.c_str(), "wbx");
  if (!f) throw IoError("cannot create " + tmp.string());
  const bool ok = std::fwrite(content.data(), 1, content.size(), f) == content.size();
  if (std::fclose(f) != 0 || !ok) {
    std::remove(tmp.c_str());
    throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

inline std::string sidecar_text(const FileHeader& h) {
  std::ostringstream s;
  s << "magic = PBT1\n"
    << "kind = " << (h.kind == FileKind::trace ? "trace" : "fields") << "\n"
    << "dimension = " << h.dim << "\n"
    << "shape =";
  for (int n : h.shape) s << ' ' << n;
  s << "\norigin =";
  for (double o : h.origin) s << ' ' << detail::format_double(o);
  s << "\nh = " << detail::format_double(h.h) << "\n"
    << "dt = " << detail::format_double(h.dt) << "\n"
    << "nt = " << h.nt << "\n"
    << "node_ordering_version = " << h.ordering_version << "\n"
    << "count = " << h.count << "\n"
    << "components =";
  for (const auto& n : h.names) s << ' ' << n;
  s << "\nbyte_order = little-endian\n";
  return s.str();
}

inline void write_binary(const std::filesystem::path& path, const FileHeader& h, const std::vector<double>& values) {
  detail::Writer w;
  w.bytes("PBT1");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(h.kind));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(h.dim));
  for (int n : h.shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(n));
  for (double o : h.origin) w.put<double>(o);
  w.put<double>(h.h);
  w.put<double>(h.dt);
  w.put<std::int64_t>(h.nt);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(h.ordering_version));
  w.put<std::uint64_t>(h.count);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(h.names.size()));
  for (const auto& n : h.names) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(n.size()));
    w.bytes(n);
  }
  for (double v : values) w.put<double>(v);
  write_file_atomic(path, w.str());
  write_file_atomic(path.string() + ".txt", sidecar_text(h));
}

inline std::pair<FileHeader, std::vector<double>> read_binary(const std::filesystem::path& path) {
  detail::Reader r(detail::read_all(path), path.string());
  if (r.bytes(4) != "PBT1") throw IoError(path.string() + ": bad magic");
  FileHeader h;
  const auto kind = r.get<std::uint32_t>();
  if (kind != 1 && kind != 2) throw IoError(path.string() + ": unknown file kind");
  h.kind = static_cast<FileKind>(kind);
  h.dim = static_cast<int>(r.get<std::uint32_t>());
  if (h.dim < 1 || h.dim > 3) throw IoError(path.string() + ": bad dimension");
  for (int a = 0; a < h.dim; ++a) h.shape.push_back(static_cast<int>(r.get<std::uint32_t>()));
  for (int a = 0; a < h.dim; ++a) h.origin.push_back(r.get<double>());
  h.h = r.get<double>();
  h.dt = r.get<double>();
  h.nt = r.get<std::int64_t>();
  h.ordering_version = static_cast<int>(r.get<std::uint32_t>());
  h.count = r.get<std::uint64_t>();
  const auto ncomp = r.get<std::uint32_t>();
  if (ncomp > 64) throw IoError(path.string() + ": implausible component count");
  for (std::uint32_t c = 0; c < ncomp; ++c) h.names.push_back(r.bytes(r.get<std::uint32_t>()));
  const std::uint64_t steps = h.kind == FileKind::trace ? static_cast<std::uint64_t>(h.nt + 1) : 1;
  const std::uint64_t total = steps * h.count * ncomp;
  if (total > r.remaining() / sizeof(double)) throw IoError(path.string() + ": truncated file");
  std::vector<double> values;
  values.reserve(total);
  for (std::uint64_t i = 0; i < total; ++i) values.push_back(r.get<double>());
  if (!r.done()) throw IoError(path.string() + ": trailing bytes");
  return {std::move(h), std::move(values)};
}

// ---------------------------------------------------------------------------
// Traces

inline void write_trace(const std::filesystem::path& path, const BoundaryTrace& t) {
  FileHeader h;
  h.kind = FileKind::trace;
  h.dim = t.dim;
  h.shape = t.shape;
  h.origin = t.origin.empty() ? std::vector<double>(t.dim, 0.0) : t.origin;
  h.h = t.h;
  h.dt = t.dt;
  h.nt = t.nt;
  h.ordering_version = t.ordering_version;
  h.count = t.nodes;
  const char* axes = "xyz";
  for (int c = 0; c < 2 * t.dim; ++c)
    h.names.push_back(std::string(c < t.dim ? "us_" : "uf_") + axes[c % t.dim]);
  write_binary(path, h, t.values);
}

inline BoundaryTrace read_trace(const std::filesystem::path& path) {
  auto [h, values] = read_binary(path);
  if (h.kind != FileKind::trace) throw IoError(path.string() + ": not a trace file");
  if (h.ordering_version != kNodeOrderingVersion)
    throw IoError(path.string() + ": unsupported node ordering version " + std::to_string(h.ordering_version));
  if (static_cast<int>(h.names.size()) != 2 * h.dim) throw IoError(path.string() + ": wrong component count");
  BoundaryTrace t;
  t.dim = h.dim;
  t.shape = h.shape;
  t.origin = h.origin;
  t.h = h.h;
  t.dt = h.dt;
  t.nt = static_cast<int>(h.nt);
  t.ordering_version = h.ordering_version;
  t.nodes = h.count;
  t.values = std::move(values);
  return t;
}

// ---------------------------------------------------------------------------
// Field files

struct NamedFields {
  std::vector<std::string> names;
  std::vector<Field> fields;
};

template <int D>
void write_fields(const std::filesystem::path& path, const Lattice<D>& L, const NamedFields& nf,
                  double t = 0.0, std::int64_t step = 0) {
  FileHeader h;
  h.kind = FileKind::fields;
  h.dim = D;
  for (int a = 0; a < D; ++a) {
    h.shape.push_back(L.n[a]);
    h.origin.push_back(L.origin[a]);
  }
  h.h = L.h;
  h.dt = t;
  h.nt = step;
  h.count = L.size();
  h.names = nf.names;
  std::vector<double> values;
  values.reserve(L.size() * nf.fields.size());
  for (const Field& f : nf.fields) {
    check_shape(L, f);
    values.insert(values.end(), f.begin(), f.end());
  }
  write_binary(path, h, values);
}

/// Reads a field file and checks it lives on L.
template <int D>
NamedFields read_fields(const std::filesystem::path& path, const Lattice<D>& L) {
  auto [h, values] = read_binary(path);
  if (h.kind != FileKind::fields) throw IoError(path.string() + ": not a field file");
  if (h.dim != D) throw IoError(path.string() + ": dimension mismatch");
  for (int a = 0; a < D; ++a) {
    if (h.shape[a] != L.n[a]) throw ShapeMismatch(path.string() + ": grid shape does not match the configuration");
    if (std::abs(h.origin[a] - L.origin[a]) > 1e-9 * std::max(1.0, std::abs(L.origin[a])) ||
        std::abs(h.h - L.h) > 1e-12 * L.h)
      throw ShapeMismatch(path.string() + ": grid geometry does not match the configuration");
  }
  NamedFields nf;
  nf.names = h.names;
  const std::size_t n = L.size();
  for (std::size_t c = 0; c < h.names.size(); ++c)
    nf.fields.emplace_back(values.begin() + static_cast<std::ptrdiff_t>(c * n),
                           values.begin() + static_cast<std::ptrdiff_t>((c + 1) * n));
  return nf;
}

template <int D>
NamedFields pair_fields(const Pair<D>& p) {
  NamedFields nf;
  const char* axes = "xyz";
  for (int c = 0; c < 2 * D; ++c) {
    nf.names.push_back(std::string(c < D ? "us_" : "uf_") + axes[c % D]);
    nf.fields.push_back(p.comp(c));
  }
  return nf;
}

// ---------------------------------------------------------------------------
// CSV

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) throw InvalidInput("CSV row width does not match the header");
    rows_.push_back(cells);
  }
  static std::string num(double v) { return detail::format_double(v); }
  static std::string num(long long v) { return std::to_string(v); }
  std::string str() const {
    std::string s;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) s += ',';
        if (cells[i].find_first_of(",\"\n") == std::string::npos) {
          s += cells[i];
          continue;
        }
        s += '"';
        for (char ch : cells[i]) s += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        s += '"';
      }
      s += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return s;
  }
  void write(const std::filesystem::path& path) const { write_file_atomic(path, str()); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline CsvTable energy_table(const std::vector<EnergyRecord>& es) {
  CsvTable t({"step", "t", "E_kinetic", "E_potential", "E_total", "E_domain_omega"});
  for (const auto& e : es)
    t.row({CsvTable::num(static_cast<long long>(e.step)), CsvTable::num(e.t), CsvTable::num(e.kinetic),
           CsvTable::num(e.potential), CsvTable::num(e.total), CsvTable::num(e.omega)});
  return t;
}

}  // namespace porotr
