#pragma once

// Snapshot container and CSV time series.
//
// Snapshot layout (all integers and floats little-endian):
//   "MHDL"  u32 version  u32 n1  u32 n2  u32 n3  f64 time  u32 array_count
//   array_count x { u16 name_length, name bytes, u64 element_count }
//   payload: the arrays in table order as f64, x1 fastest, then x2, then x3,
//            vector components one after another.
// Arrays: eta (displacement), v, q, b0, b, params = {kappa, epsilon, fd_order}.

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "mhdl/diagnostics.hpp"
#include "mhdl/dynamics.hpp"
#include "mhdl/errors.hpp"

namespace mhdl {

inline constexpr std::uint32_t snapshot_version = 1;

namespace detail {

class ByteWriter {
 public:
  template <class U>
  void uint(U x) {
    for (std::size_t b = 0; b < sizeof(U); ++b) buf_.push_back(char((x >> (8 * b)) & 0xff));
  }
  void f64(double x) { uint(std::bit_cast<std::uint64_t>(x)); }
  void bytes(std::string_view s) { buf_.append(s); }
  const std::string& data() const noexcept { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string data) : buf_(std::move(data)) {}
  template <class U>
  U uint() {
    need(sizeof(U));
    U x = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) x |= U(std::uint8_t(buf_[pos_ + b])) << (8 * b);
    pos_ += sizeof(U);
    return x;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw FormatError("snapshot truncated");
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

struct NamedArray {
  std::string name;
  std::vector<double> data;
};

inline void append_values(std::vector<double>& out, const ScalarField& f) {
  out.insert(out.end(), f.values().begin(), f.values().end());
}

inline std::vector<double> flatten(const VectorField& u) {
  std::vector<double> out;
  for (int c = 0; c < 3; ++c) append_values(out, u[c]);
  return out;
}

inline std::vector<double> flatten(const ScalarField& f) {
  std::vector<double> out;
  append_values(out, f);
  return out;
}

// Empty arrays stand for default-constructed fields.
inline ScalarField scalar_from(const GridSpec& g, std::vector<double> d) {
  if (d.empty()) return ScalarField();
  if (d.size() != g.size()) throw FormatError("snapshot array length does not match grid");
  return ScalarField(g, std::move(d));
}

inline VectorField vector_from(const GridSpec& g, const std::vector<double>& d) {
  if (d.empty()) return VectorField();
  if (d.size() != 3 * g.size()) throw FormatError("snapshot array length does not match grid");
  VectorField u;
  for (int c = 0; c < 3; ++c)
    u[c] = ScalarField(g, std::vector<double>(d.begin() + std::ptrdiff_t(c * g.size()),
                                              d.begin() + std::ptrdiff_t((c + 1) * g.size())));
  return u;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline std::string encode_snapshot(const FlowState& s) {
  const GridSpec& g = s.grid();
  const std::vector<detail::NamedArray> arrays{
      {"eta", detail::flatten(s.eta.displacement)}, {"v", detail::flatten(s.v)},
      {"q", detail::flatten(s.q)},                  {"b0", detail::flatten(s.b0)},
      {"b", detail::flatten(s.b)},                  {"params", {s.kappa, s.epsilon, double(g.fd_order)}}};
  detail::ByteWriter w;
  w.bytes("MHDL");
  w.uint(snapshot_version);
  w.uint(std::uint32_t(g.n1));
  w.uint(std::uint32_t(g.n2));
  w.uint(std::uint32_t(g.n3));
  w.f64(s.t);
  w.uint(std::uint32_t(arrays.size()));
  for (const auto& a : arrays) {
    w.uint(std::uint16_t(a.name.size()));
    w.bytes(a.name);
    w.uint(std::uint64_t(a.data.size()));
  }
  for (const auto& a : arrays)
    for (double x : a.data) w.f64(x);
  return w.data();
}

inline FlowState decode_snapshot(std::string bytes) {
  detail::ByteReader r(std::move(bytes));
  if (r.bytes(4) != "MHDL") throw FormatError("bad snapshot magic");
  if (const auto v = r.uint<std::uint32_t>(); v != snapshot_version)
    throw FormatError("unsupported snapshot version " + std::to_string(v));
  GridSpec g;
  g.n1 = int(r.uint<std::uint32_t>());
  g.n2 = int(r.uint<std::uint32_t>());
  g.n3 = int(r.uint<std::uint32_t>());
  const double t = r.f64();
  const auto count = r.uint<std::uint32_t>();
  if (count > 64) throw FormatError("implausible snapshot array count");

  std::vector<detail::NamedArray> arrays(count);
  std::uint64_t total = 0;
  for (auto& a : arrays) {
    a.name = r.bytes(r.uint<std::uint16_t>());
    const auto n = r.uint<std::uint64_t>();
    if (n > r.remaining() / 8 || total + n > r.remaining() / 8) throw FormatError("snapshot truncated");
    total += n;
    a.data.resize(n);
  }
  if (r.remaining() != total * 8) throw FormatError("snapshot payload length mismatch");
  for (auto& a : arrays)
    for (auto& x : a.data) x = r.f64();

  auto find = [&](std::string_view name) -> std::vector<double>& {
    for (auto& a : arrays)
      if (a.name == name) return a.data;
    throw FormatError("snapshot lacks array '" + std::string(name) + "'");
  };
  const auto& params = find("params");
  if (params.size() != 3) throw FormatError("snapshot params must hold 3 values");
  g.fd_order = int(params[2]);
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("snapshot dims: ") + e.what());
  }

  FlowState s;
  s.t = t;
  s.eta = FlowMap(detail::vector_from(g, find("eta")));
  s.v = detail::vector_from(g, find("v"));
  s.q = detail::scalar_from(g, std::move(find("q")));
  s.b0 = detail::vector_from(g, find("b0"));
  s.b = detail::vector_from(g, find("b"));
  s.kappa = params[0];
  s.epsilon = params[1];
  return s;
}

// Writes to a sibling temporary and renames, so readers never see a partial file.
inline void write_snapshot(const FlowState& s, const std::filesystem::path& path) {
  const std::string bytes = encode_snapshot(s);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline FlowState read_snapshot(const std::filesystem::path& path) { return decode_snapshot(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// CSV series

struct SeriesRow {
  double t = 0.0;
  EnergyReport energy;
  InvariantReport invariants;
  int iterations = 0;
  double wall_ms = 0.0;
};

// Column order of the series format, version 1.
inline const std::vector<std::string>& series_columns() {
  static const std::vector<std::string> cols{
      "t",     "v4sq",   "eta4sq",          "beta4sq",    "trace_term", "energy",     "trace_kappa",
      "j_dev", "a_dev",  "piola",           "div_v",      "frozen_mismatch", "taylor_min", "divb0",
      "warnings", "iterations", "wall_ms"};
  return cols;
}

// Shortest round-trip would vary in width; 17 significant digits is fixed and locale free.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

inline std::string format_row(const SeriesRow& r) {
  const auto& e = r.energy;
  const auto& i = r.invariants;
  const double vals[] = {r.t,     e.v4sq,  e.eta4sq, e.beta4sq, e.trace_term,       e.total,        e.trace_kappa,
                         i.j_dev, i.a_dev, i.piola,  i.div_v,   i.frozen_mismatch, i.taylor_min, i.divb0};
  std::string line;
  for (double v : vals) line += format_double(v) + ",";
  line += std::to_string(i.warnings.size()) + "," + std::to_string(r.iterations) + "," + format_double(r.wall_ms);
  return line;
}

namespace detail {

inline std::string last_line(const std::string& text) {
  std::size_t end = text.size();
  while (end > 0 && text[end - 1] == '\n') --end;
  const std::size_t start = text.rfind('\n', end == 0 ? 0 : end - 1);
  return text.substr(start == std::string::npos ? 0 : start + 1, end - (start == std::string::npos ? 0 : start + 1));
}

}  // namespace detail

// Appends one row; writes the header first when the file is empty or absent.
// Rejects a row whose t does not exceed the last one in the file.
inline void append_series(const SeriesRow& row, const std::filesystem::path& path) {
  std::string existing;
  if (std::filesystem::exists(path)) existing = detail::read_file(path);
  std::string out;
  if (existing.empty()) {
    for (std::size_t c = 0; c < series_columns().size(); ++c) out += (c ? "," : "") + series_columns()[c];
    out += "\n";
  } else {
    const std::string last = detail::last_line(existing);
    if (last.rfind("t,", 0) != 0) {
      const std::string first = last.substr(0, last.find(','));
      double t_last = 0.0;
      const auto res = std::from_chars(first.data(), first.data() + first.size(), t_last);
      if (res.ec != std::errc()) throw FormatError("series file has a malformed last row");
      if (!(row.t > t_last))
        throw std::invalid_argument("append_series: t=" + format_double(row.t) + " does not exceed " + first);
    }
  }
  out += format_row(row) + "\n";
  std::ofstream f(path, std::ios::binary | std::ios::app);
  if (!f) throw std::runtime_error("cannot append to " + path.string());
  f << out;
  if (!f) throw std::runtime_error("append failed: " + path.string());
}

}  // namespace mhdl
