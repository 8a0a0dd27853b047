#pragma once

// Run configuration read from line-oriented `key = value` text. Blank lines
// and everything after '#' are ignored. Errors carry 1-based line and column.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "mhdl/errors.hpp"
#include "mhdl/grid.hpp"
#include "mhdl/presets.hpp"

namespace mhdl {

enum class RunMode { nonlinear, constructive };

struct RunConfig {
  GridSpec grid{16, 16, 16, 2};
  std::string preset = "demo";
  double amplitude = 3e-4;
  double field = 0.5;
  double shear = 0.02;
  unsigned seed = 0;
  double kappa = 0.05;
  double epsilon = 0.0;
  double dt = 1e-3;
  double T = 0.05;
  std::string scheme = "rk4";
  RunMode mode = RunMode::nonlinear;
  std::string pressure = "compatible";
  bool monitor_taylor = true;
  bool monitor_bands = false;
  double lambda = -1.0;  // negative: measured from the initial pressure
  std::string series;    // CSV path, empty for none
  std::string snapshot;  // snapshot path prefix, empty for none
  int snapshot_every = 0;
  bool wall_clock = false;  // record wall time per step; off keeps the CSV reproducible
  // lemma harness
  int samples = 100;
  std::string lemmas = "all";
  // studies
  std::string report = "report.csv";
  int levels = 3;  // parameter values per study

  PresetParams preset_params() const { return {amplitude, field, shear, seed}; }
  int steps() const { return int(std::lround(T / dt)); }
};

namespace detail {

inline std::string_view trim(std::string_view s, std::size_t& offset) {
  std::size_t a = 0;
  while (a < s.size() && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  std::size_t b = s.size();
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  offset += a;
  return s.substr(a, b - a);
}

struct ValueParser {
  int line, col;
  std::string_view text;

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(what, line, col); }

  double real() const {
    double x = 0.0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), x);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size() || !std::isfinite(x))
      fail("expected a number, got '" + std::string(text) + "'");
    return x;
  }
  long integer() const {
    long x = 0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), x);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size())
      fail("expected an integer, got '" + std::string(text) + "'");
    return x;
  }
  bool boolean() const {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    fail("expected a boolean, got '" + std::string(text) + "'");
  }
  std::string word(std::initializer_list<std::string_view> allowed) const {
    for (auto a : allowed)
      if (text == a) return std::string(text);
    std::string list;
    for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
    fail("expected one of {" + list + "}, got '" + std::string(text) + "'");
  }
};

}  // namespace detail

inline RunConfig parse_config(std::string_view text) {
  RunConfig c;
  using P = detail::ValueParser;
  auto positive = [](const P& p) {
    const double x = p.real();
    if (!(x > 0)) p.fail("must be positive");
    return x;
  };
  auto nonneg = [](const P& p) {
    const double x = p.real();
    if (x < 0) p.fail("must be non-negative");
    return x;
  };
  auto in_range = [](const P& p, long lo, long hi) {
    const long x = p.integer();
    if (x < lo || x > hi) p.fail("must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return int(x);
  };
  const std::map<std::string, std::function<void(const P&)>, std::less<>> keys{
      {"n1", [&](const P& p) { c.grid.n1 = in_range(p, 8, 1024); }},
      {"n2", [&](const P& p) { c.grid.n2 = in_range(p, 8, 1024); }},
      {"n3", [&](const P& p) { c.grid.n3 = in_range(p, 8, 1024); }},
      {"fd_order", [&](const P& p) { c.grid.fd_order = in_range(p, 2, 4); }},
      {"preset",
       [&](const P& p) {
         for (const auto& n : preset_names())
           if (p.text == n) return void(c.preset = n);
         p.fail("unknown preset '" + std::string(p.text) + "'");
       }},
      {"amplitude", [&](const P& p) { c.amplitude = nonneg(p); }},
      {"field", [&](const P& p) { c.field = nonneg(p); }},
      {"shear", [&](const P& p) { c.shear = p.real(); }},
      {"seed", [&](const P& p) { c.seed = unsigned(in_range(p, 0, 2147483647)); }},
      {"kappa", [&](const P& p) { c.kappa = nonneg(p); }},
      {"epsilon", [&](const P& p) { c.epsilon = nonneg(p); }},
      {"dt", [&](const P& p) { c.dt = positive(p); }},
      {"T", [&](const P& p) { c.T = positive(p); }},
      {"scheme", [&](const P& p) { c.scheme = p.word({"rk4", "euler"}); }},
      {"mode",
       [&](const P& p) {
         c.mode = p.word({"nonlinear", "constructive"}) == "nonlinear" ? RunMode::nonlinear : RunMode::constructive;
       }},
      {"pressure", [&](const P& p) { c.pressure = p.word({"compatible", "flux"}); }},
      {"monitor_taylor", [&](const P& p) { c.monitor_taylor = p.boolean(); }},
      {"monitor_bands", [&](const P& p) { c.monitor_bands = p.boolean(); }},
      {"lambda", [&](const P& p) { c.lambda = p.real(); }},
      {"series", [&](const P& p) { c.series = std::string(p.text); }},
      {"snapshot", [&](const P& p) { c.snapshot = std::string(p.text); }},
      {"snapshot_every", [&](const P& p) { c.snapshot_every = in_range(p, 0, 1 << 30); }},
      {"wall_clock", [&](const P& p) { c.wall_clock = p.boolean(); }},
      {"samples", [&](const P& p) { c.samples = in_range(p, 1, 1000000); }},
      {"lemmas", [&](const P& p) { c.lemmas = std::string(p.text); }},
      {"report", [&](const P& p) { c.report = std::string(p.text); }},
      {"levels", [&](const P& p) { c.levels = in_range(p, 2, 8); }},
  };

  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    ++lineno;
    pos = nl + 1;
    if (const auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    std::size_t off = 0;
    if (detail::trim(line, off).empty()) continue;
    const auto eq = line.find('=');
    std::size_t koff = 0;
    const auto key = detail::trim(line.substr(0, eq == std::string_view::npos ? line.size() : eq), koff);
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", lineno, int(koff) + 1);
    if (key.empty()) throw ConfigError("missing key before '='", lineno, int(eq) + 1);
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError("unknown key '" + std::string(key) + "'", lineno, int(koff) + 1);
    std::size_t voff = eq + 1;
    const auto value = detail::trim(line.substr(eq + 1), voff);
    if (value.empty()) throw ConfigError("missing value for '" + std::string(key) + "'", lineno, int(eq) + 2);
    it->second(P{lineno, int(voff) + 1, value});
  }
  if (c.grid.n1 % 2 || c.grid.n2 % 2) throw ConfigError("n1 and n2 must be even", 0, 0);
  if (c.grid.fd_order != 2 && c.grid.fd_order != 4) throw ConfigError("fd_order must be 2 or 4", 0, 0);
  if (std::abs(c.steps() * c.dt - c.T) > 1e-9 * c.T)
    throw ConfigError("T must be a whole multiple of dt", 0, 0);
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string(), 0, 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace mhdl
