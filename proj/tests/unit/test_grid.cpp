#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "covar/error.hpp"
#include "covar/grid.hpp"

using namespace covar;

namespace {

constexpr double kPi = std::numbers::pi;

CoordinateChart line_chart(double lo, double hi, bool periodic = false) {
  return CoordinateChart({"x", "y"}, {lo, 0.0}, {hi, 1.0}, {periodic, false});
}

Expr x_expr(const std::string& src, const CoordinateChart& c) { return parse(src, c.symbols()); }

/// Max |d f/dx - exact| along the first axis for f = src on an n-point grid.
double derivative_error(const std::string& src, const std::string& exact, int n, int order,
                        double lo = 1.0, double hi = 2.0) {
  const CoordinateChart c = line_chart(lo, hi);
  const GridSpec g(c, {n, 7}, order);
  const SampledField f = sample({x_expr(src, c)}, 0, g);
  const SampledField d = partial_derivative(f, 0);
  const Expr ex = x_expr(exact, c);
  double worst = 0.0;
  for (std::size_t node = 0; node < g.size(); ++node) {
    const auto x = g.coordinates(node);
    worst = std::max(worst, std::abs(d.at(node, 0) - ex.eval(std::span<const double>(x.data(), 2))));
  }
  return worst;
}

}  // namespace

TEST(Chart, ValidatesAxes) {
  EXPECT_THROW(CoordinateChart({"x"}, {0}, {1}), GeometryError);
  EXPECT_THROW(CoordinateChart({"x", "y"}, {0, 1}, {1, 1}), GeometryError);
  EXPECT_THROW(CoordinateChart({"x", "x"}, {0, 0}, {1, 1}), GeometryError);
  EXPECT_THROW(CoordinateChart({"x", "y"}, {0}, {1, 1}), GeometryError);
}

TEST(Chart, RejectsBoundsAroundSingularPoints) {
  EXPECT_THROW(CoordinateChart({"r", "theta"}, {0.0, 0.1}, {1.0, 3.0}, {}, {{0.0}, {}}),
               GeometryError);
  EXPECT_THROW(CoordinateChart({"r", "theta"}, {1.0, 0.0}, {2.0, 1.0}, {}, {{0.0}, {0.0, kPi}}),
               GeometryError);
  EXPECT_NO_THROW(CoordinateChart({"r", "theta"}, {1.0, 0.1}, {2.0, 3.0}, {}, {{0.0}, {0.0, kPi}}));
}

TEST(Grid, SpacingAndMinimumSize) {
  const GridSpec g(line_chart(1.0, 2.0), {5, 5}, 2);
  EXPECT_DOUBLE_EQ(g.spacing(0), 0.25);
  const GridSpec p(line_chart(0.0, 2 * kPi, true), {8, 5}, 2);
  EXPECT_DOUBLE_EQ(p.spacing(0), 2 * kPi / 8);
  EXPECT_THROW(GridSpec(line_chart(0, 1), {4, 5}, 2), PreconditionError);
  EXPECT_THROW(GridSpec(line_chart(0, 1), {6, 6}, 6), PreconditionError);
  EXPECT_THROW(GridSpec(line_chart(0, 1), {6, 6}, 3), PreconditionError);
}

TEST(Sample, ZeroAndLinear) {
  const CoordinateChart c({"r", "theta"}, {1.0, 0.0}, {2.0, 1.0});
  const GridSpec g(c, {5, 5}, 2);
  const SampledField zero = sample({Expr()}, 0, g);
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
  const SampledField r = sample({x_expr("r", c)}, 0, g);
  const double expected[5] = {1.0, 1.25, 1.5, 1.75, 2.0};
  for (int i = 0; i < 5; ++i) {
    const int idx[2] = {i, 0};
    EXPECT_DOUBLE_EQ(r.at(g.flatten(idx), 0), expected[i]);
  }
}

TEST(Sample, SineIsSymmetricAboutHalfPi) {
  const CoordinateChart c({"theta", "y"}, {0.0, 0.0}, {kPi, 1.0});
  const GridSpec g(c, {33, 5}, 2);
  const SampledField s = sample({x_expr("sin(theta)", c)}, 0, g);
  for (int i = 0; i < 33; ++i) {
    const int a[2] = {i, 0}, b[2] = {32 - i, 0};
    EXPECT_NEAR(s.at(g.flatten(a), 0), s.at(g.flatten(b), 0), 1e-15);
  }
}

TEST(Sample, NonFiniteValueNamesLatticeIndex) {
  const CoordinateChart c({"x", "y"}, {0.0, 0.0}, {1.0, 1.0});
  const GridSpec g(c, {5, 5}, 2);
  try {
    sample({x_expr("1/x", c)}, 0, g);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("lattice index [0, 0]"), std::string::npos) << e.what();
  }
  try {
    sample({x_expr("log(x - 0.5)", c)}, 0, g);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("lattice index"), std::string::npos) << e.what();
  }
}

TEST(FiniteDifference, FornbergWeights) {
  const int c3[] = {-1, 0, 1}, c5[] = {-2, -1, 0, 1, 2}, s3[] = {0, 1, 2};
  const auto w3 = first_derivative_weights(c3);
  EXPECT_NEAR(w3[0], -0.5, 1e-15);
  EXPECT_NEAR(w3[1], 0.0, 1e-15);
  EXPECT_NEAR(w3[2], 0.5, 1e-15);
  const auto w5 = first_derivative_weights(c5);
  const double e5[] = {1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(w5[i], e5[i], 1e-15);
  const auto ws = first_derivative_weights(s3);
  EXPECT_NEAR(ws[0], -1.5, 1e-15);
  EXPECT_NEAR(ws[1], 2.0, 1e-15);
  EXPECT_NEAR(ws[2], -0.5, 1e-15);
}

TEST(FiniteDifference, ConstantAndLinearAreExact) {
  for (int order : {2, 4, 6}) {
    EXPECT_LT(derivative_error("3.5", "0", 9, order), 1e-13);
    EXPECT_LT(derivative_error("x", "1", 9, order, 0.0, 1.0), 1e-13);
  }
}

TEST(FiniteDifference, CubicConvergesAtSecondOrder) {
  const double e32 = derivative_error("x^3", "3*x^2", 32, 2);
  const double e64 = derivative_error("x^3", "3*x^2", 64, 2);
  const double e128 = derivative_error("x^3", "3*x^2", 128, 2);
  const double h64 = 1.0 / 63;
  EXPECT_LE(e64, 10.0 * h64 * h64);
  EXPECT_NEAR(std::log2(e32 / e64), 2.0, 0.3);
  EXPECT_NEAR(std::log2(e64 / e128), 2.0, 0.3);
}

TEST(FiniteDifference, FourthAndSixthOrderRates) {
  for (int order : {4, 6}) {
    const double a = derivative_error("exp(x)*sin(3*x)", "exp(x)*(sin(3*x) + 3*cos(3*x))", 33, order);
    const double b = derivative_error("exp(x)*sin(3*x)", "exp(x)*(sin(3*x) + 3*cos(3*x))", 65, order);
    EXPECT_NEAR(std::log2(a / b), order, 0.3) << "order " << order;
  }
}

TEST(FiniteDifference, PeriodicAxisWraps) {
  const CoordinateChart c = line_chart(0.0, 2 * kPi, true);
  auto err = [&](int n) {
    const GridSpec g(c, {n, 5}, 4);
    const SampledField d = partial_derivative(sample({x_expr("sin(x)", c)}, 0, g), 0);
    double worst = 0.0;
    for (std::size_t node = 0; node < g.size(); ++node)
      worst = std::max(worst, std::abs(d.at(node, 0) - std::cos(g.coordinates(node)[0])));
    return worst;
  };
  EXPECT_NEAR(std::log2(err(32) / err(64)), 4.0, 0.3);
}

TEST(FiniteDifference, IsLinear) {
  const CoordinateChart c({"x", "y"}, {0.0, 0.0}, {1.0, 2.0});
  const GridSpec g(c, {17, 9}, 4);
  const auto f = sample({x_expr("sin(3*x)*y^2", c)}, 0, g);
  const auto h = sample({x_expr("exp(x - y)", c)}, 0, g);
  std::vector<double> combo(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) combo[i] = 2.5 * f.at(i, 0) - 0.75 * h.at(i, 0);
  const SampledField fc(g, 0, combo);
  for (int axis = 0; axis < 2; ++axis) {
    const auto df = partial_derivative(f, axis), dh = partial_derivative(h, axis),
               dc = partial_derivative(fc, axis);
    for (std::size_t i = 0; i < g.size(); ++i)
      EXPECT_NEAR(dc.at(i, 0), 2.5 * df.at(i, 0) - 0.75 * dh.at(i, 0), 1e-12);
  }
}

TEST(FiniteDifference, MixedPartialsCommute) {
  const CoordinateChart c({"x", "y"}, {0.0, 0.0}, {1.0, 1.0});
  auto gap = [&](int n) {
    const GridSpec g(c, {n, n}, 4);
    const auto f = sample({x_expr("sin(2*x + y^2)", c)}, 0, g);
    const auto xy = partial_derivative(partial_derivative(f, 0), 1);
    const auto yx = partial_derivative(partial_derivative(f, 1), 0);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(xy.at(i, 0) - yx.at(i, 0)));
    return worst;
  };
  // Stencils along different axes act on separate index directions, so they commute
  // to rounding even where one-sided stencils are used.
  EXPECT_LT(gap(17), 1e-11);
  EXPECT_LT(gap(33), 1e-11);
}

TEST(FiniteDifference, AxisOutOfRange) {
  const GridSpec g(line_chart(0, 1), {5, 5}, 2);
  const auto f = sample({Expr()}, 0, g);
  EXPECT_THROW(partial_derivative(f, 2), PreconditionError);
}

TEST(RandomPoints, StayInsideChartAndRepeat) {
  const CoordinateChart c({"r", "theta"}, {1.0, 0.1}, {2.0, 3.0});
  const auto a = random_points(c, 50, 3), b = random_points(c, 50, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(c.contains(std::span<const double>(a[i].data(), 2)));
    EXPECT_EQ(a[i], b[i]);
  }
}
