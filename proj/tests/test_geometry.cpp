#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "mhdl/geometry.hpp"

namespace {

using namespace mhdl;
constexpr double pi = std::numbers::pi;

// eta = x + amp * smooth periodic displacement built from a few random modes.
FlowMap random_map(const GridSpec& g, double amp, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorField d(g);
  for (int c = 0; c < 3; ++c) {
    double a[3][3][3];
    for (auto& x : a)
      for (auto& y : x)
        for (auto& z : y) z = u(rng);
    d[c] = ScalarField::from_function(g, [&](double x, double y, double z) {
      double s = 0.0;
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q)
          s += a[p][q][0] * std::cos(2 * pi * (p * x + q * y) + a[p][q][1]) * std::cos(1.7 * z + a[p][q][2]);
      return amp * s / 9.0;
    });
  }
  return FlowMap(d);
}

FlowMap shear_map(const GridSpec& g, double gamma) {
  VectorField d(g);
  d[0] = ScalarField::from_function(g, [&](double, double, double z) { return gamma * z; });
  return FlowMap(d);
}

TEST(FlowMap, PositionsRoundTrip) {
  GridSpec g{8, 8, 8, 2};
  auto m = random_map(g, 0.1, 1);
  auto back = FlowMap::from_positions(m.positions());
  EXPECT_LT(max_abs(back.displacement - m.displacement), 1e-15);
}

TEST(Cofactor, IdentityExact) {
  GridSpec g{8, 8, 8, 2};
  auto cof = cofactor(FlowMap::identity(g));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (double x : cof.A(i, j).values()) EXPECT_EQ(x, i == j ? 1.0 : 0.0);
  for (double x : cof.J.values()) EXPECT_EQ(x, 1.0);
}

TEST(Cofactor, ShearClosedForm) {
  GridSpec g{8, 8, 8, 2};
  const double gamma = 0.3;
  auto cof = cofactor(shear_map(g, gamma));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double ex = (i == 2 && j == 0) ? -gamma : (i == j ? 1.0 : 0.0);
      for (double x : cof.A(i, j).values()) EXPECT_NEAR(x, ex, 1e-13);
    }
  for (double x : cof.J.values()) EXPECT_NEAR(x, 1.0, 1e-13);
}

TEST(Cofactor, MatchesBruteForceInversion) {
  GridSpec g{8, 8, 8, 2};
  auto cof = cofactor(random_map(g, 0.05, 3));
  double err = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    Eigen::Matrix3d F;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) F(i, j) = cof.grad_eta(i, j)[n];
    const Eigen::Matrix3d A = F.inverse().transpose();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) err = std::max(err, std::abs(A(i, j) - cof.A(i, j)[n]));
    err = std::max(err, std::abs(F.determinant() - cof.J[n]));
    // A^T F = I for A = F^{-T}
    const Eigen::Matrix3d Aa = [&] {
      Eigen::Matrix3d m;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = cof.A(i, j)[n];
      return m;
    }();
    err = std::max(err, (Aa.transpose() * F - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(err, 1e-13);
}

TEST(Cofactor, SingularMapRaised) {
  GridSpec g{8, 8, 8, 2};
  VectorField d(g);
  d[2] = ScalarField::from_function(g, [](double, double, double z) { return -0.7 * z; });  // J = 0.3
  EXPECT_THROW(cofactor(FlowMap(d)), SingularMap);
  CofactorOptions loose{0.1, false, 0.125};
  EXPECT_NO_THROW(cofactor(FlowMap(d), loose));
}

TEST(Cofactor, BandEnforcement) {
  GridSpec g{8, 8, 8, 2};
  CofactorOptions opt;
  opt.enforce_band = true;
  auto m = shear_map(g, 0.2);
  auto cof = cofactor(m);
  EXPECT_NEAR(a_deviation(cof), 0.2, 1e-13);
  EXPECT_THROW(cofactor(m, opt), SingularMap);
  EXPECT_NO_THROW(cofactor(shear_map(g, 0.1), opt));
}

TEST(Piola, IdentityAndShearVanish) {
  GridSpec g{8, 8, 8, 2};
  EXPECT_EQ(max_abs(piola_residual(cofactor(FlowMap::identity(g)))), 0.0);
  EXPECT_LT(max_abs(piola_residual(cofactor(shear_map(g, 0.4)))), 1e-12);
}

double piola_at(int n3, int order) {
  GridSpec g{16, 16, n3, order};
  return max_abs(piola_residual(cofactor(random_map(g, 0.05, 17))));
}

TEST(Piola, ConvergesAtFdOrder) {
  const double r = piola_at(32, 2) / piola_at(64, 2);
  EXPECT_GT(r, 3.5);
  EXPECT_LT(r, 4.5);
}

// n1 = 32 keeps horizontal aliasing of the products below the vertical error.
double curl_grad_at(int n3) {
  GridSpec g{32, 32, n3, 2};
  auto cof = cofactor(random_map(g, 0.05, 19));
  auto q = ScalarField::from_function(g, [](double x, double y, double z) {
    return std::sin(2 * pi * x) * std::cos(2 * pi * y) * std::exp(z) + z * z;
  });
  return max_abs(curl_A(grad_A(q, cof), cof));
}

TEST(CurlGradA, ConvergesAtFdOrder) {
  const double r = curl_grad_at(32) / curl_grad_at(64);
  EXPECT_GT(r, 3.5);
  EXPECT_LT(r, 4.5);
}

TEST(Pullback, Examples) {
  GridSpec g{8, 8, 8, 2};
  VectorField b0(g);
  b0[0] = ScalarField::from_function(g, [](double, double, double z) { return std::sin(pi * z) + 0.5; });
  auto b = pullback_field(b0, FlowMap::identity(g));
  EXPECT_EQ(max_abs(b - b0), 0.0);
  EXPECT_EQ(max_abs(pullback_field(VectorField(g), random_map(g, 0.1, 2))), 0.0);
  auto bs = pullback_field(b0, shear_map(g, 0.3));
  EXPECT_LT(max_abs(bs - b0), 1e-13);
}

TEST(Lorentz, Examples) {
  GridSpec g{8, 8, 8, 2};
  VectorField b0(g);
  b0[0] = ScalarField::from_function(g, [](double, double, double z) { return std::cos(pi * z); });
  EXPECT_LT(max_abs(lorentz_force(b0, FlowMap::identity(g))), 1e-12);
  EXPECT_EQ(max_abs(lorentz_force(VectorField(g), random_map(g, 0.1, 2))), 0.0);
}

TEST(Lorentz, MatchesTwoFirstOrderApplications) {
  GridSpec g{16, 16, 16, 2};
  auto eta = random_map(g, 0.1, 5);
  VectorField b0(g);
  b0[0] = ScalarField::from_function(g, [](double, double y, double z) { return 0.3 + std::sin(2 * pi * y) * z; });
  b0[1] = ScalarField::from_function(g, [](double x, double, double z) { return std::cos(2 * pi * x) * (1 + z); });
  // Oracle: explicit component formula b0_j d_j (b0_k d_k eta_i) with d(x_i) = e_i.
  VectorField first(g), oracle(g);
  for (int i = 0; i < 3; ++i) {
    VectorField d = gradient(eta.displacement[i]);
    for (std::size_t n = 0; n < g.size(); ++n)
      first[i][n] = b0[0][n] * (d[0][n] + (i == 0)) + b0[1][n] * (d[1][n] + (i == 1)) + b0[2][n] * (d[2][n] + (i == 2));
  }
  for (int i = 0; i < 3; ++i) {
    VectorField d = gradient(first[i]);
    for (std::size_t n = 0; n < g.size(); ++n)
      oracle[i][n] = b0[0][n] * d[0][n] + b0[1][n] * d[1][n] + b0[2][n] * d[2][n];
  }
  EXPECT_LT(max_abs(lorentz_force(b0, eta) - oracle), 1e-12);
}

TEST(Lorentz, LinearInDisplacement) {
  GridSpec g{16, 16, 16, 2};
  VectorField b0(g);
  b0[0] = ScalarField(g, 1.0);
  b0[1] = ScalarField::from_function(g, [](double x, double, double) { return std::sin(2 * pi * x); });
  auto m1 = random_map(g, 0.1, 6), m2 = random_map(g, 0.1, 7);
  FlowMap sum(m1.displacement + m2.displacement);
  auto lhs = lorentz_force(b0, sum);
  // The identity part is counted once, so subtract one copy of (b0.grad)b0.
  auto rhs = lorentz_force(b0, m1) + lorentz_force(b0, m2) - lorentz_force(b0, FlowMap::identity(g));
  EXPECT_LT(max_abs(lhs - rhs), 1e-11);
}

TEST(PulledBackOps, FlatReduction) {
  GridSpec g{16, 16, 16, 2};
  auto cof = cofactor(FlowMap::identity(g));
  auto q = ScalarField::from_function(g, [](double, double, double z) { return z; });
  auto gq = grad_A(q, cof);
  EXPECT_LT(max_abs(gq[0]), 1e-14);
  EXPECT_LT(max_abs(gq[1]), 1e-14);
  for (double x : gq[2].values()) EXPECT_NEAR(x, 1.0, 1e-12);
  VectorField u(g);
  u[0] = ScalarField::from_function(g, [](double x, double y, double) { return std::sin(2 * pi * (x + y)); });
  u[1] = ScalarField::from_function(g, [](double x, double, double) { return std::cos(2 * pi * x); });
  u[2] = ScalarField::from_function(g, [](double, double y, double z) { return std::sin(2 * pi * y) * z; });
  EXPECT_LT(max_abs(div_A(u, cof) - divergence(u)), 1e-12);
  EXPECT_LT(max_abs(curl_A(u, cof) - curl(u)), 1e-12);
  EXPECT_LT(max_abs(divergence(curl(u))), 1e-10);
}

TEST(PulledBackOps, ShearDivergence) {
  GridSpec g{8, 8, 8, 2};
  auto cof = cofactor(shear_map(g, 0.25));
  VectorField u(g);
  u[2] = ScalarField::from_function(g, [](double, double, double z) { return z; });
  auto dv = div_A(u, cof);
  for (double x : dv.values()) EXPECT_NEAR(x, 1.0, 1e-12);
}

TEST(Variations, CofactorDerivativeMatchesFiniteDifference) {
  GridSpec g{16, 16, 16, 2};
  auto m = random_map(g, 0.1, 8);
  auto w = random_map(g, 0.1, 9).displacement;
  const double h = 1e-6;
  auto cp = cofactor(FlowMap(m.displacement + h * w));
  auto cm = cofactor(FlowMap(m.displacement - (h)*w));
  auto c0 = cofactor(m);
  auto dF = jacobian(w);
  auto dA = cofactor_variation(c0, dF);
  auto dJ = jacobian_variation(c0, dF);
  double e = 0.0;
  for (int n = 0; n < 9; ++n) e = std::max(e, max_abs((1.0 / (2 * h)) * (cp.A.c[n] - cm.A.c[n]) - dA.c[n]));
  EXPECT_LT(e, 1e-7);
  EXPECT_LT(max_abs((1.0 / (2 * h)) * (cp.J - cm.J) - dJ), 1e-7);
}

TEST(IdentityDJ, StaticPathZero) {
  GridSpec g{8, 8, 8, 2};
  auto m = random_map(g, 0.1, 1);
  EXPECT_EQ(identity_dJ_check(m, m, 1e-3), 0.0);
}

TEST(IdentityDJ, LinearShearPath) {
  GridSpec g{8, 8, 8, 2};
  EXPECT_LT(identity_dJ_check(shear_map(g, 0.0), shear_map(g, 1e-3), 1e-3), 1e-10);
}

TEST(IdentityDJ, FirstOrderInDelta) {
  GridSpec g{16, 16, 16, 2};
  auto m = random_map(g, 0.1, 4);
  auto w = random_map(g, 0.3, 5).displacement;
  auto at = [&](double d) { return identity_dJ_check(m, FlowMap(m.displacement + d * w), d); };
  const double r = at(1e-2) / at(5e-3);
  EXPECT_NEAR(r, 2.0, 0.1);
}

TEST(Normals, UnitLengthAndFlat) {
  GridSpec g{8, 8, 8, 2};
  auto n = unit_normal(cofactor(FlowMap::identity(g)));
  for (double x : n.at(Face::top, 2)) EXPECT_EQ(x, 1.0);
  for (double x : n.at(Face::bottom, 2)) EXPECT_EQ(x, -1.0);
  auto nr = unit_normal(cofactor(random_map(g, 0.05, 3)));
  for (int f = 0; f < 2; ++f)
    for (std::size_t p = 0; p < g.plane(); ++p) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) s += nr.at(Face(f), c)[p] * nr.at(Face(f), c)[p];
      EXPECT_NEAR(s, 1.0, 1e-14);
    }
}

}  // namespace
