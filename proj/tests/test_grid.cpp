#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mhdl/grid.hpp"

namespace {

using namespace mhdl;
constexpr double pi = std::numbers::pi;

GridSpec grid(int n = 16, int n3 = 16, int order = 2) { return GridSpec{n, n, n3, order}; }

// Random field with horizontal modes |k| <= 3 and smooth x3 profile.
ScalarField random_field(const GridSpec& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double c[4][4][3];
  for (auto& a : c)
    for (auto& b : a)
      for (auto& x : b) x = u(rng);
  return ScalarField::from_function(g, [&](double x, double y, double z) {
    double s = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        s += std::cos(2 * pi * (a * x + b * y) + c[a][b][0]) * (c[a][b][1] + c[a][b][2] * std::sin(1.3 * z + a));
    return s;
  });
}

double max_diff(const ScalarField& a, const ScalarField& b) { return max_abs(a - b); }

TEST(GridSpec, RejectsInvalid) {
  EXPECT_THROW((GridSpec{6, 16, 16, 2}.validate()), std::invalid_argument);
  EXPECT_THROW((GridSpec{16, 15, 16, 2}.validate()), std::invalid_argument);
  EXPECT_THROW((GridSpec{16, 16, 4, 2}.validate()), std::invalid_argument);
  EXPECT_THROW((GridSpec{16, 16, 16, 3}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((GridSpec{8, 8, 8, 4}.validate()));
}

TEST(Tangential, SineDerivative) {
  auto g = grid();
  auto f = ScalarField::from_function(g, [](double x, double, double) { return std::sin(2 * pi * x); });
  auto df = tangential_derivative(f, 1);
  auto ex = ScalarField::from_function(g, [](double x, double, double) { return 2 * pi * std::cos(2 * pi * x); });
  EXPECT_LT(max_diff(df, ex), 1e-12);
  EXPECT_LT(max_abs(tangential_derivative(f, 2)), 1e-12);
}

TEST(Tangential, ConstantGivesZero) {
  ScalarField f(grid(), 3.5);
  EXPECT_LT(max_abs(tangential_derivative(f, 1)), 1e-13);
  EXPECT_LT(max_abs(tangential_derivative(f, 2)), 1e-13);
}

TEST(Tangential, MixedPartialsCommute) {
  auto f = random_field(grid(), 7);
  auto a = tangential_derivative(tangential_derivative(f, 1), 2);
  auto b = tangential_derivative(tangential_derivative(f, 2), 1);
  EXPECT_LT(max_diff(a, b), 1e-10);
  EXPECT_LT(max_diff(a, tangential_derivative(f, 1, 1)), 1e-10);
}

TEST(Tangential, CommutesWithVertical) {
  auto f = random_field(grid(), 8);
  auto a = vertical_derivative(tangential_derivative(f, 1), 1);
  auto b = tangential_derivative(vertical_derivative(f, 1), 1);
  EXPECT_LT(max_diff(a, b), 1e-9);
}

TEST(Tangential, Linear) {
  auto g = grid();
  auto f = random_field(g, 1), h = random_field(g, 2);
  auto lhs = tangential_derivative(2.0 * f + (-3.0) * h, 2);
  auto rhs = 2.0 * tangential_derivative(f, 2) + (-3.0) * tangential_derivative(h, 2);
  EXPECT_LT(max_diff(lhs, rhs), 1e-10);
}

TEST(Tangential, GradientPairMatchesSingleAxis) {
  auto f = random_field(grid(), 3);
  auto [d1, d2] = tangential_gradient(f);
  EXPECT_LT(max_diff(d1, tangential_derivative(f, 1)), 1e-12);
  EXPECT_LT(max_diff(d2, tangential_derivative(f, 2)), 1e-12);
}

class VerticalOrders : public ::testing::TestWithParam<int> {};

TEST_P(VerticalOrders, ExactOnLinear) {
  auto g = grid(8, 12, GetParam());
  auto f = ScalarField::from_function(g, [](double, double, double z) { return z; });
  auto d = vertical_derivative(f, 1);
  for (double x : d.values()) EXPECT_NEAR(x, 1.0, 1e-12);
  EXPECT_LT(max_abs(vertical_derivative(f, 2)), 1e-9);
}

TEST_P(VerticalOrders, ExactOnQuadratic) {
  auto g = grid(8, 12, GetParam());
  auto f = ScalarField::from_function(g, [](double, double, double z) { return z * z; });
  auto ex = ScalarField::from_function(g, [](double, double, double z) { return 2 * z; });
  EXPECT_LT(max_diff(vertical_derivative(f, 1), ex), 1e-12);
  auto d2 = vertical_derivative(f, 2);
  for (double x : d2.values()) EXPECT_NEAR(x, 2.0, 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Orders, VerticalOrders, ::testing::Values(2, 4));

TEST(Vertical, FourthOrderExactOnQuartic) {
  auto g = grid(8, 12, 4);
  auto f = ScalarField::from_function(g, [](double, double, double z) { return z * z * z * z; });
  auto ex = ScalarField::from_function(g, [](double, double, double z) { return 4 * z * z * z; });
  EXPECT_LT(max_diff(vertical_derivative(f, 1), ex), 1e-10);
}

// Refinement oracle: analytic derivative of sin(pi x3 + phase).
double sine_error(int n3, int order, int deriv, double phase = 0.0) {
  auto g = GridSpec{8, 8, n3, order};
  auto f = ScalarField::from_function(g, [&](double, double, double z) { return std::sin(pi * z + phase); });
  auto ex = ScalarField::from_function(g, [&](double, double, double z) {
    return deriv == 1 ? pi * std::cos(pi * z + phase) : -pi * pi * std::sin(pi * z + phase);
  });
  return max_diff(vertical_derivative(f, deriv), ex);
}

TEST(Vertical, SecondOrderRefinement) {
  // A phase keeps the even derivatives nonzero at the faces, so the boundary
  // rows do not superconverge and mix rates.
  for (int deriv = 1; deriv <= 2; ++deriv) {
    const double ph = deriv == 1 ? 0.0 : 0.4;
    const double r1 = sine_error(16, 2, deriv, ph) / sine_error(32, 2, deriv, ph);
    const double r2 = sine_error(32, 2, deriv, ph) / sine_error(64, 2, deriv, ph);
    EXPECT_NEAR(std::log2(r1), 2.0, 0.3) << "deriv " << deriv;
    EXPECT_NEAR(std::log2(r2), 2.0, 0.25) << "deriv " << deriv;
  }
}

TEST(Vertical, FourthOrderRefinement) {
  for (int deriv = 1; deriv <= 2; ++deriv) {
    const double r = sine_error(32, 4, deriv, 0.4) / sine_error(64, 4, deriv, 0.4);
    EXPECT_NEAR(std::log2(r), 4.0, 0.35) << "deriv " << deriv;
  }
}

TEST(Surface, LaplacianExamples) {
  auto g = grid();
  auto c1 = BoundaryField::from_function(g, [](Face, double x, double) { return std::cos(2 * pi * x); });
  auto l = surface_laplacian(c1);
  for (std::size_t n = 0; n < l.values().size(); ++n)
    EXPECT_NEAR(l.values()[n], -4 * pi * pi * c1.values()[n], 1e-10);
  BoundaryField cst(g, 1, 2.0);
  EXPECT_LT(boundary_max(surface_laplacian(cst)), 1e-12);
  auto cc = BoundaryField::from_function(g, [](Face, double x, double y) {
    return std::cos(2 * pi * x) * std::cos(2 * pi * y);
  });
  auto lc = surface_laplacian(cc);
  for (std::size_t n = 0; n < lc.values().size(); ++n)
    EXPECT_NEAR(lc.values()[n], -8 * pi * pi * cc.values()[n], 1e-10);
}

TEST(Surface, InverseLaplacian) {
  auto g = grid();
  auto c1 = BoundaryField::from_function(g, [](Face, double x, double) { return std::cos(2 * pi * x); });
  auto u = inverse_surface_laplacian(c1);
  for (std::size_t n = 0; n < u.values().size(); ++n)
    EXPECT_NEAR(u.values()[n], -c1.values()[n] / (4 * pi * pi), 1e-14);
  EXPECT_LT(boundary_max(inverse_surface_laplacian(BoundaryField(g, 1, 5.0))), 1e-14);

  std::mt19937 rng(4);
  std::uniform_real_distribution<double> d(-1, 1);
  const double a = d(rng), b = d(rng), c = d(rng);
  auto r = BoundaryField::from_function(g, [&](Face f, double x, double y) {
    return 0.7 + a * std::sin(2 * pi * (x + 2 * y)) + b * std::cos(6 * pi * y) + (f == Face::top ? c : 0.0);
  });
  auto back = surface_laplacian(inverse_surface_laplacian(r));
  auto pr = remove_mean(r);
  for (std::size_t n = 0; n < back.values().size(); ++n) EXPECT_NEAR(back.values()[n], pr.values()[n], 1e-12);
}

TEST(Norms, VolumeExamples) {
  auto g = grid();
  EXPECT_NEAR(volume_norm(ScalarField(g, 1.0), 0), 1.0, 1e-14);
  auto s = ScalarField::from_function(g, [](double x, double, double) { return std::sin(2 * pi * x); });
  EXPECT_NEAR(volume_norm(s, 0), std::sqrt(0.5), 1e-14);
  // Analytic: int sin^2 + int (2 pi cos)^2 over the unit slab.
  EXPECT_NEAR(volume_norm(s, 1), std::sqrt(0.5 + 4 * pi * pi / 2), 1e-10);
  EXPECT_THROW(volume_norm(s, 5), std::out_of_range);
  EXPECT_THROW(volume_norm(s, -1), std::out_of_range);
}

TEST(Norms, VolumeMatchesManualSum) {
  auto g = grid(8, 10);
  auto f = random_field(g, 11);
  double manual = 0.0;
  auto d1 = tangential_derivative(f, 1), d2 = tangential_derivative(f, 2), d3 = vertical_derivative(f, 1);
  for (const auto* h : {&f, &d1, &d2, &d3}) manual += inner(*h, *h);
  EXPECT_NEAR(volume_norm(f, 1), std::sqrt(manual), 1e-12 * std::sqrt(manual));
}

TEST(Norms, ParsevalModalEnergy) {
  auto f = random_field(grid(), 5);
  const double a = volume_norm(f, 0);
  EXPECT_NEAR(a * a, modal_energy(f), 1e-12 * a * a);
}

TEST(Norms, BoundaryExamples) {
  auto g = grid();
  EXPECT_NEAR(boundary_norm(BoundaryField(g, 1, 1.0), 0), std::sqrt(2.0), 1e-14);
  auto one = BoundaryField::from_function(g, [](Face f, double x, double) {
    return f == Face::bottom ? std::cos(2 * pi * x) : 0.0;
  });
  EXPECT_NEAR(boundary_norm(one, 0), std::sqrt(0.5), 1e-14);
  EXPECT_THROW(boundary_norm(one, 0.25), std::out_of_range);
  EXPECT_THROW(boundary_norm(one, -1.0), std::out_of_range);
  EXPECT_THROW(boundary_norm(one, 4.0), std::out_of_range);
}

TEST(Norms, BoundaryInterpolationAndMonotone) {
  auto g = grid();
  std::mt19937 rng(9);
  std::normal_distribution<double> d;
  for (int trial = 0; trial < 20; ++trial) {
    BoundaryField r(g, 2);
    for (auto& x : r.values()) x = d(rng);
    const double n0 = boundary_norm(r, 0), n1 = boundary_norm(r, 1), nh = boundary_norm(r, 0.5);
    EXPECT_LE(nh, std::sqrt(n0 * n1) * (1 + 1e-12));
    double prev = 0.0;
    for (double s = -0.5; s <= 3.5; s += 0.5) {
      const double v = boundary_norm(r, s);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Dealias, RemovesHighModesKeepsLow) {
  auto g = grid();
  auto low = ScalarField::from_function(g, [](double x, double y, double) { return std::sin(2 * pi * (3 * x + 2 * y)); });
  auto high = ScalarField::from_function(g, [](double x, double, double) { return std::cos(2 * pi * 7 * x); });
  EXPECT_LT(max_diff(dealias(low), low), 1e-13);
  EXPECT_LT(max_abs(dealias(high)), 1e-13);
}

TEST(Trace, PicksFaces) {
  auto g = grid();
  auto f = ScalarField::from_function(g, [](double x, double, double z) { return x + 10 * z; });
  auto t = trace(f);
  EXPECT_DOUBLE_EQ(t.at(Face::bottom, 0)[3], g.x1(3));
  EXPECT_DOUBLE_EQ(t.at(Face::top, 0)[3], g.x1(3) + 10);
}

}  // namespace
