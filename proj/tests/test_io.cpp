#include <gtest/gtest.h>

#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "mhdl/io.hpp"
#include "mhdl/presets.hpp"

namespace {

using namespace mhdl;
namespace fs = std::filesystem;

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "mhdl_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

FlowState random_state(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(4, 8);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  GridSpec g{2 * dim(rng), 2 * dim(rng), 8 + dim(rng), rng() % 2 ? 2 : 4};
  auto fill = [&](ScalarField& f) {
    for (auto& x : f.values()) x = u(rng) * std::ldexp(1.0, int(rng() % 40) - 20);
  };
  FlowState s;
  s.t = u(rng);
  s.eta = FlowMap(VectorField(g));
  s.v = VectorField(g);
  s.q = ScalarField(g);
  s.b0 = VectorField(g);
  s.b = VectorField(g);
  for (int c = 0; c < 3; ++c) {
    fill(s.eta.displacement[c]);
    fill(s.v[c]);
    fill(s.b0[c]);
    fill(s.b[c]);
  }
  fill(s.q);
  s.kappa = std::abs(u(rng));
  s.epsilon = std::abs(u(rng));
  return s;
}

template <class U>
U read_le(const std::string& b, std::size_t off) {
  U x = 0;
  for (std::size_t k = 0; k < sizeof(U); ++k) x |= U(std::uint8_t(b[off + k])) << (8 * k);
  return x;
}

TEST(Snapshot, TrivialRoundTrip) {
  GridSpec g{8, 8, 8, 2};
  const auto s = FlowState::initial(VectorField(g), VectorField(g));
  const auto p = temp_path("trivial.mhdl");
  write_snapshot(s, p);
  EXPECT_TRUE(read_snapshot(p) == s);
}

TEST(Snapshot, HeaderLayout) {
  GridSpec g{10, 12, 9, 4};
  auto s = FlowState::initial(VectorField(g), VectorField(g), 0.25, 0.125);
  s.t = 1.5;
  const std::string b = encode_snapshot(s);
  EXPECT_EQ(b.substr(0, 4), "MHDL");
  EXPECT_EQ(read_le<std::uint32_t>(b, 4), snapshot_version);
  EXPECT_EQ(read_le<std::uint32_t>(b, 8), 10u);
  EXPECT_EQ(read_le<std::uint32_t>(b, 12), 12u);
  EXPECT_EQ(read_le<std::uint32_t>(b, 16), 9u);
  EXPECT_EQ(std::bit_cast<double>(read_le<std::uint64_t>(b, 20)), 1.5);
  EXPECT_EQ(read_le<std::uint32_t>(b, 28), 6u);
  // first table entry: "eta" with 3 * 10 * 12 * 10 values
  EXPECT_EQ(read_le<std::uint16_t>(b, 32), 3u);
  EXPECT_EQ(b.substr(34, 3), "eta");
  EXPECT_EQ(read_le<std::uint64_t>(b, 37), 3u * 10 * 12 * 10);
  // header + payload of 3+3+1+3+3 fields and 3 params
  const std::size_t n = 10 * 12 * 10;
  std::size_t table = 0;
  for (const char* name : {"eta", "v", "q", "b0", "b", "params"}) table += 2 + std::strlen(name) + 8;
  EXPECT_EQ(b.size(), 32 + table + 8 * (13 * n + 3));
  // params sit at the end: kappa, epsilon, fd_order
  const std::size_t end = b.size();
  EXPECT_EQ(std::bit_cast<double>(read_le<std::uint64_t>(b, end - 24)), 0.25);
  EXPECT_EQ(std::bit_cast<double>(read_le<std::uint64_t>(b, end - 16)), 0.125);
  EXPECT_EQ(std::bit_cast<double>(read_le<std::uint64_t>(b, end - 8)), 4.0);
}

TEST(Snapshot, PayloadIsX1Fastest) {
  GridSpec g{8, 8, 8, 2};
  auto s = FlowState::initial(VectorField(g), VectorField(g));
  s.eta.displacement[0] = ScalarField::from_function(g, [](double x, double y, double z) { return x + 10 * y + 100 * z; });
  const std::string b = encode_snapshot(s);
  std::size_t table = 0;
  for (const char* name : {"eta", "v", "q", "b0", "b", "params"}) table += 2 + std::strlen(name) + 8;
  const std::size_t p0 = 32 + table;
  EXPECT_EQ(std::bit_cast<double>(read_le<std::uint64_t>(b, p0 + 8)), g.x1(1));
  EXPECT_EQ(std::bit_cast<double>(read_le<std::uint64_t>(b, p0 + 8 * 8)), 10 * g.x2(1));
  EXPECT_EQ(std::bit_cast<double>(read_le<std::uint64_t>(b, p0 + 8 * 64)), 100 * g.x3(1));
}

TEST(Snapshot, FuzzRoundTripBitExact) {
  std::mt19937_64 rng(42);
  for (int n = 0; n < 50; ++n) {
    const auto s = random_state(rng);
    const std::string bytes = encode_snapshot(s);
    const auto r = decode_snapshot(bytes);
    ASSERT_TRUE(r == s) << "sample " << n;
    ASSERT_EQ(encode_snapshot(r), bytes);
  }
}

TEST(Snapshot, SpecialValuesSurvive) {
  GridSpec g{8, 8, 8, 2};
  auto s = FlowState::initial(VectorField(g), VectorField(g));
  auto& v = s.v[0];
  v[0] = -0.0;
  v[1] = std::numeric_limits<double>::denorm_min();
  v[2] = std::numeric_limits<double>::infinity();
  v[3] = std::numeric_limits<double>::quiet_NaN();
  v[4] = std::numeric_limits<double>::max();
  const std::string bytes = encode_snapshot(s);
  const auto r = decode_snapshot(bytes);
  EXPECT_EQ(encode_snapshot(r), bytes);
  EXPECT_TRUE(std::signbit(r.v[0][0]));
  EXPECT_TRUE(std::isnan(r.v[0][3]));
}

TEST(Snapshot, TruncationIsFormatError) {
  std::mt19937_64 rng(1);
  const std::string bytes = encode_snapshot(random_state(rng));
  for (std::size_t cut : {std::size_t(0), std::size_t(3), std::size_t(10), std::size_t(31), std::size_t(40),
                          bytes.size() / 2, bytes.size() - 1}) {
    const auto p = temp_path("cut.mhdl");
    {
      std::ofstream out(p, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), std::streamsize(cut));
    }
    EXPECT_THROW(read_snapshot(p), FormatError) << "cut " << cut;
  }
}

TEST(Snapshot, CorruptHeadersRejected) {
  GridSpec g{8, 8, 8, 2};
  const std::string good = encode_snapshot(FlowState::initial(VectorField(g), VectorField(g)));
  auto bad = good;
  bad[0] = 'X';
  EXPECT_THROW(decode_snapshot(bad), FormatError);
  bad = good;
  bad[4] = 9;
  EXPECT_THROW(decode_snapshot(bad), FormatError);
  bad = good;
  bad[8] = 7;  // n1 = 7 is not a valid grid
  EXPECT_THROW(decode_snapshot(bad), FormatError);
  bad = good;
  bad[8] = 10;  // valid grid, arrays no longer match it
  EXPECT_THROW(decode_snapshot(bad), FormatError);
  EXPECT_THROW(decode_snapshot(good + "x"), FormatError);
}

TEST(Snapshot, MissingFileIsIoError) {
  EXPECT_THROW(read_snapshot(temp_path("does_not_exist.mhdl")), std::runtime_error);
}

TEST(Series, SeventeenDigitsRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(0.0), "0");
  std::mt19937_64 rng(3);
  for (int n = 0; n < 1000; ++n) {
    const double x = std::bit_cast<double>(rng());
    if (!std::isfinite(x)) continue;
    const std::string s = format_double(x);
    double y = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), y);
    ASSERT_EQ(std::bit_cast<std::uint64_t>(x), std::bit_cast<std::uint64_t>(y)) << s;
  }
}

TEST(Series, HeaderOnceAndRows) {
  const auto p = temp_path("series.csv");
  fs::remove(p);
  SeriesRow r;
  r.energy.total = 2.5;
  append_series(r, p);
  std::string text = slurp(p);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  r.t = 0.5;
  r.iterations = 7;
  append_series(r, p);
  text = slurp(p);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  const auto header = text.substr(0, text.find('\n'));
  EXPECT_EQ(header.rfind("t,v4sq,eta4sq,beta4sq,trace_term,energy,", 0), 0u);
  EXPECT_EQ(std::size_t(std::count(header.begin(), header.end(), ',')) + 1, series_columns().size());
  const auto last = text.substr(text.rfind('\n', text.size() - 2) + 1);
  EXPECT_EQ(last.rfind("0.5,0,0,0,0,2.5,", 0), 0u);
  EXPECT_EQ(std::size_t(std::count(last.begin(), last.end(), ',')) + 1, series_columns().size());
  EXPECT_EQ(text.find('\r'), std::string::npos);
}

TEST(Series, RejectsTimeRegression) {
  const auto p = temp_path("regress.csv");
  fs::remove(p);
  SeriesRow r;
  r.t = 1.0;
  append_series(r, p);
  EXPECT_THROW(append_series(r, p), std::invalid_argument);
  r.t = 0.5;
  EXPECT_THROW(append_series(r, p), std::invalid_argument);
  const std::string text = slurp(p);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

}  // namespace
