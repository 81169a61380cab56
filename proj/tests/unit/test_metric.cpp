#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "covar/error.hpp"
#include "covar/metric.hpp"

using namespace covar;

namespace {

constexpr double kPi = std::numbers::pi;

std::span<const double> pt(const std::array<double, kMaxDim>& p, int d) {
  return std::span<const double>(p.data(), d);
}

Eigen::MatrixXd to_eigen(const Matrix& m, int d) {
  Eigen::MatrixXd e(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) e(i, j) = m[i][j];
  return e;
}

MetricField diagonal_metric(const CoordinateChart& c, const std::vector<std::string>& diag,
                            Signature sig) {
  const int d = c.dim();
  std::vector<Expr> comps(d * d);
  for (int i = 0; i < d; ++i) comps[i * d + i] = parse(diag[i], c.symbols());
  return MetricField::from_expressions(c, comps, sig);
}

}  // namespace

TEST(Metric, MinkowskiIsItsOwnInverse) {
  const MetricField m = preset("minkowski4");
  const double x[4] = {0.5, 0.5, 0.5, 0.5};
  const auto p = m.at(x);
  EXPECT_EQ(p.g[0][0], -1.0);
  for (int i = 1; i < 4; ++i) EXPECT_EQ(p.g[i][i], 1.0);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(p.ginv[i][j], p.g[i][j]);
  EXPECT_EQ(p.sqrt_det, 1.0);
  EXPECT_EQ(m.signature(), (Signature{1, 3}));
}

TEST(Metric, StaticSphericalVolumeFactor) {
  const MetricField m = preset("static_spherical");
  const double x[4] = {0.0, 2.0, kPi / 2, 0.0};
  EXPECT_NEAR(m.at(x).sqrt_det, 4.0, 1e-14);
}

TEST(Metric, PolarAtRadiusThree) {
  const CoordinateChart c({"r", "theta"}, {1.0, 0.0}, {4.0, 2 * kPi}, {false, true}, {{0.0}, {}});
  const MetricField m = preset("polar2", {}, c);
  const double x[2] = {3.0, 1.0};
  const auto p = m.at(x);
  EXPECT_DOUBLE_EQ(p.g[1][1], 9.0);
  EXPECT_DOUBLE_EQ(p.sqrt_det, 3.0);
  EXPECT_DOUBLE_EQ(p.d_sqrt_det[0], 1.0);
  EXPECT_DOUBLE_EQ(p.dg[0][1][1], 6.0);
}

TEST(Metric, SchwarzschildLapse) {
  PresetParams params;
  params.values["M"] = "1";
  const MetricField m = preset("schwarzschild", params);
  const double x[4] = {0.0, 4.0, 1.0, 0.5};
  const auto p = m.at(x);
  EXPECT_NEAR(p.g[0][0], -0.5, 1e-15);
  EXPECT_NEAR(p.g[1][1], 2.0, 1e-15);
  EXPECT_EQ(m.signature(), (Signature{1, 3}));
}

TEST(Metric, InverseAndDeterminantAgreeWithEigen) {
  // Non-diagonal 3-metric with position dependence in every entry.
  const CoordinateChart c({"x", "y", "z"}, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
  const auto s = c.symbols();
  std::vector<Expr> comps = {parse("2 + x^2", s), parse("0.3*y", s),     parse("0.1*z*x", s),
                             parse("0.3*y", s),   parse("3 + sin(z)", s), parse("0.2*x", s),
                             parse("0.1*z*x", s), parse("0.2*x", s),      parse("1.5 + y*z", s)};
  const MetricField m = MetricField::from_expressions(c, comps, {0, 3});
  for (const auto& q : random_points(c, 100, 1)) {
    const auto p = m.at(pt(q, 3));
    const Eigen::MatrixXd g = to_eigen(p.g, 3), gi = to_eigen(p.ginv, 3);
    EXPECT_LT((g * gi - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_NEAR(p.det, std::abs(g.determinant()), 1e-12 * p.det);
    EXPECT_NEAR(p.sqrt_det, std::sqrt(p.det), 1e-14 * p.sqrt_det);
  }
}

TEST(Metric, SqrtDetGradientMatchesJacobiFormula) {
  // (sqrt g)_{,l} = 1/2 sqrt g g^{mn} g_{mn,l}
  PresetParams params;
  params.values["alpha"] = "1 - 1/(2*r)";
  params.values["a"] = "1 + 1/r^2";
  const MetricField m = preset("static_spherical", params);
  for (const auto& q : random_points(m.chart(), 100, 2)) {
    const auto p = m.at(pt(q, 4));
    for (int l = 0; l < 4; ++l) {
      double tr = 0.0;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) tr += p.ginv[a][b] * p.dg[l][a][b];
      EXPECT_NEAR(p.d_sqrt_det[l], 0.5 * p.sqrt_det * tr, 1e-12 * std::max(1.0, p.sqrt_det));
    }
  }
}

TEST(Metric, DiagonalVolumeFactorIsProductOfEntries) {
  const MetricField m = preset("spherical3");
  for (const auto& q : random_points(m.chart(), 50, 3)) {
    const auto p = m.at(pt(q, 3));
    EXPECT_NEAR(p.sqrt_det, std::sqrt(p.g[0][0] * p.g[1][1] * p.g[2][2]), 1e-14);
  }
}

TEST(Metric, RejectsWrongSignatureAndDegeneracy) {
  const CoordinateChart c({"x", "y"}, {0.0, 0.0}, {1.0, 1.0});
  const double x[2] = {0.5, 0.5};
  EXPECT_THROW(diagonal_metric(c, {"-1", "1"}, {0, 2}).at(x), GeometryError);
  EXPECT_THROW(diagonal_metric(c, {"1", "x - 0.5"}, {0, 2}).at(x), GeometryError);
  EXPECT_NO_THROW(diagonal_metric(c, {"-1", "1"}, {1, 1}).at(x));
  EXPECT_THROW(diagonal_metric(c, {"1", "1"}, {1, 2}), PreconditionError);
}

TEST(Metric, PresetErrors) {
  EXPECT_THROW(preset("kerr"), PreconditionError);
  PresetParams bad;
  bad.values["M"] = "-1";
  EXPECT_THROW(preset("schwarzschild", bad), PreconditionError);
  // A user chart that reaches the polar origin.
  EXPECT_THROW(preset("polar2", {},
                      CoordinateChart({"r", "theta"}, {0.0, 0.0}, {1.0, 2 * kPi}, {false, true})),
               GeometryError);
}

TEST(Metric, PointOutsideChartIsRejected) {
  const MetricField m = preset("polar2");
  const double x[2] = {5.0, 0.0};
  EXPECT_THROW(m.at(x), PreconditionError);
}

TEST(Metric, SignatureCounts) {
  Matrix a{};
  a[0][0] = -2.0;
  a[1][1] = 1.0;
  a[2][2] = 3.0;
  a[0][1] = a[1][0] = 0.5;
  EXPECT_EQ(signature_of(a, 3), (Signature{1, 2}));
}

TEST(SampledMetric, MatchesAnalyticAtNodes) {
  const MetricField m = preset("polar2");
  const GridSpec g(m.chart(), {33, 32}, 4);
  const MetricField s = m.sampled_on(g);
  EXPECT_EQ(s.channel(), Channel::FiniteDifference);
  ASSERT_NE(s.grid(), nullptr);
  double worst_g = 0.0, worst_d = 0.0;
  for (std::size_t node = 0; node < g.size(); ++node) {
    const auto x = g.coordinates(node);
    const auto a = m.at(pt(x, 2)), b = s.at_node(node);
    worst_g = std::max(worst_g, std::abs(a.g[1][1] - b.g[1][1]) + std::abs(a.det - b.det));
    worst_d = std::max(worst_d, std::abs(a.d_sqrt_det[0] - b.d_sqrt_det[0]) +
                                    std::abs(a.dg[0][1][1] - b.dg[0][1][1]));
  }
  EXPECT_LT(worst_g, 1e-14);
  EXPECT_LT(worst_d, 1e-10);  // r and r^2 are differentiated exactly by a 4th-order stencil
  EXPECT_THROW(s.at(std::span<const double>(g.coordinates(0).data(), 2)), PreconditionError);
  EXPECT_THROW(m.at_node(0), PreconditionError);
}
