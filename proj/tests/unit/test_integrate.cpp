#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "covar/density.hpp"
#include "covar/error.hpp"
#include "covar/integrate.hpp"

using namespace covar;

namespace {

constexpr double kPi = std::numbers::pi;

TensorDensityField field(const MetricField& m, IndexSignature sig,
                         const std::vector<std::string>& comps, double weight = 0.0) {
  std::vector<Expr> e;
  for (const auto& s : comps) e.push_back(parse(s, m.chart().symbols()));
  return TensorDensityField::from_expressions(m.chart(), std::move(sig), weight, std::move(e));
}

// Integral of x^p over [0, 1] from 1D weights.
double integrate_power(Quadrature q, int count, int p) {
  const double h = 1.0 / (count - 1);
  const auto w = quadrature_weights(q, count, h, false);
  double s = 0.0;
  for (int i = 0; i < count; ++i) s += w[i] * std::pow(i * h, p);
  return s;
}

double shell_solid_angle() { return 2 * kPi * 2 * std::cos(0.1); }

}  // namespace

TEST(Quadrature, ExactForLowDegree) {
  for (int n : {5, 6, 9, 10}) {
    EXPECT_NEAR(integrate_power(Quadrature::Trapezoid, n, 1), 0.5, 1e-15);
    for (int p = 0; p <= 3; ++p)
      EXPECT_NEAR(integrate_power(Quadrature::Simpson, n, p), 1.0 / (p + 1), 1e-15)
          << "n = " << n << " p = " << p;
  }
  const auto w = quadrature_weights(Quadrature::Simpson, 8, 0.25, true);
  for (double v : w) EXPECT_EQ(v, 0.25);
  EXPECT_EQ(quadrature_order(Quadrature::Simpson), 4);
  EXPECT_EQ(quadrature_order(Quadrature::Trapezoid), 2);
}

TEST(Quadrature, SimpsonConvergesAtFourthOrder) {
  auto err = [](int n) {
    const double h = 1.0 / (n - 1);
    const auto w = quadrature_weights(Quadrature::Simpson, n, h, false);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += w[i] * std::exp(i * h);
    return std::abs(s - (std::exp(1.0) - 1.0));
  };
  EXPECT_NEAR(std::log2(err(17) / err(33)), 4.0, 0.3);
  EXPECT_NEAR(std::log2(err(16) / err(32)), 4.0, 0.4);
}

TEST(Volume, UnitBox) {
  const MetricField m = preset("minkowski4");
  const GridSpec g(m.chart(), {5, 5, 5, 5}, 2);
  const auto one = field(m, {}, {"1"});
  EXPECT_NEAR(volume_integral(one, m, RegionSpec(g)), 1.0, 1e-14);
  EXPECT_NEAR(volume_integral(sqrt_det_density(m), m, RegionSpec(g)), 1.0, 1e-14);
}

TEST(Volume, SphericalShell) {
  const MetricField m = preset("spherical3");
  const GridSpec g(m.chart(), {33, 33, 32}, 4);
  const double exact = 7.0 / 3.0 * shell_solid_angle();
  const double v = volume_integral(field(m, {}, {"1"}), m, RegionSpec(g), Quadrature::Simpson);
  EXPECT_NEAR(v, exact, 1e-6 * exact);
}

TEST(Volume, InvariantUnderChartScaling) {
  const CoordinateChart unit({"x", "y"}, {0.0, 0.0}, {1.0, 1.0});
  const CoordinateChart big({"X", "Y"}, {0.0, 0.0}, {2.0, 2.0});
  const auto s = unit.symbols();
  const MetricField m = MetricField::from_expressions(
      unit, {parse("1 + x", s), parse("0", s), parse("0", s), parse("1 + y^2", s)}, {0, 2});
  const ChartMap map(unit, big, {parse("2*x", s), parse("2*y", s)},
                     {parse("X/2", big.symbols()), parse("Y/2", big.symbols())});
  const MetricField mp = transform_metric(m, map);
  const auto f = TensorDensityField::scalar(unit, parse("x*y + 1", s));
  const auto fp = transform_density(f, map);
  const double a = volume_integral(f, m, RegionSpec(GridSpec(unit, {33, 33})), Quadrature::Simpson);
  const double b = volume_integral(fp, mp, RegionSpec(GridSpec(big, {33, 33})), Quadrature::Simpson);
  EXPECT_NEAR(a, b, 1e-12);
}

TEST(Flux, InverseSquareThroughShell) {
  const MetricField m = preset("spherical3");
  const GridSpec g(m.chart(), {17, 33, 32}, 4);
  const RegionSpec region(g);
  const auto p = field(m, {Slot::Up}, {"1/r^2", "0", "0"});
  const double omega = shell_solid_angle();
  ASSERT_EQ(region.faces().size(), 4u);
  for (const Face& f : region.faces()) {
    const double flux = face_flux(p, m, region, f, Quadrature::Simpson);
    if (f.axis == 0) EXPECT_NEAR(flux, f.side * omega, 1e-6 * omega) << "side " << f.side;
    else EXPECT_NEAR(flux, 0.0, 1e-14);
  }
  EXPECT_NEAR(surface_integral(p, m, region, Quadrature::Simpson), 0.0, 1e-12);
  EXPECT_NEAR(surface_integral(p, m, region.reversed(), Quadrature::Simpson), 0.0, 1e-12);
}

TEST(Flux, ReversedOrientationNegates) {
  const MetricField m = preset("spherical3");
  const GridSpec g(m.chart(), {17, 17, 16}, 4);
  const RegionSpec region(g);
  const auto p = field(m, {Slot::Up}, {"r", "cos(theta)", "sin(phi)"});
  const double a = surface_integral(p, m, region), b = surface_integral(p, m, region.reversed());
  EXPECT_NE(a, 0.0);
  EXPECT_EQ(a, -b);
}

TEST(Flux, RejectsTensorsAndDensities) {
  const MetricField m = preset("polar2");
  const RegionSpec region(GridSpec(m.chart(), {9, 8}));
  const Face face{0, 1, 1};
  EXPECT_THROW(face_flux(field(m, {Slot::Up, Slot::Up}, {"1", "0", "0", "1"}), m, region, face),
               PreconditionError);
  EXPECT_THROW(face_flux(field(m, {Slot::Up}, {"1", "0"}, 1.0), m, region, face),
               PreconditionError);
  EXPECT_THROW(face_flux(field(m, {Slot::Up}, {"1", "0"}), m, region, Face{1, 1, 1}),
               PreconditionError);
}

TEST(Gauss, AnalyticShellAgrees) {
  const MetricField m = preset("spherical3");
  const GridSpec g(m.chart(), {33, 33, 32}, 4);
  const auto p = field(m, {Slot::Up}, {"r*sin(theta)", "cos(phi)/r", "r^2*sin(2*phi)"});
  const auto rep = gauss_check(p, m, RegionSpec(g), Quadrature::Simpson);
  EXPECT_LT(rep.residual, 1e-6);
  EXPECT_EQ(rep.order, 4);
  EXPECT_EQ(rep.channel, Channel::Analytic);
}

TEST(Gauss, SampledChannelConverges) {
  const MetricField m = preset("polar2");
  const auto p = field(m, {Slot::Up}, {"r^3*cos(theta)", "sin(theta)/r"});
  auto residual = [&](int n) {
    const GridSpec g(m.chart(), {n, n}, 4);
    const auto rep =
        gauss_check(p.sampled_on(g), m.sampled_on(g), RegionSpec(g), Quadrature::Simpson);
    EXPECT_EQ(rep.channel, Channel::FiniteDifference);
    return rep.residual;
  };
  const double a = residual(17), b = residual(33);
  EXPECT_LT(b, a);
  EXPECT_LT(b, 1e-5);
}

TEST(Region, SubBoxAndErrors) {
  const MetricField m = preset("spherical3");
  const GridSpec g(m.chart(), {9, 9, 8}, 2);
  const double th_lo = m.chart().lower(1), th_hi = m.chart().upper(1);
  const RegionSpec sub(g, {1.25, th_lo, 0.0}, {1.75, th_hi, 2 * kPi});
  EXPECT_EQ(sub.first(0), 2);
  EXPECT_EQ(sub.last(0), 6);
  EXPECT_EQ(sub.nodes().size(), 5u * 9u * 8u);
  EXPECT_THROW(RegionSpec(g, {1.3, th_lo, 0.0}, {1.75, th_hi, 2 * kPi}), PreconditionError);
  EXPECT_THROW(RegionSpec(g, {1.25, th_lo, 0.0}, {1.75, th_hi, kPi}), PreconditionError);
  EXPECT_THROW(RegionSpec(g, {1.75, th_lo, 0.0}, {1.25, th_hi, 2 * kPi}), PreconditionError);
}

TEST(SurfaceElementTest, NormalIsUnitAndCausal) {
  const MetricField m = preset("schwarzschild");
  const double x[4] = {0.5, 5.0, 1.0, 2.0};
  const auto md = m.at(x);
  for (int axis = 0; axis < 4; ++axis) {
    const auto se = surface_element(md, axis, -1);
    const double nn = md.ginv[axis][axis] * se.normal[axis] * se.normal[axis];
    EXPECT_NEAR(nn, axis == 0 ? -1.0 : 1.0, 1e-14);
    EXPECT_EQ(se.causal, axis == 0 ? -1 : 1);
    EXPECT_LT(se.normal[axis], 0.0);
    // n_axis sqrt(gamma) = sign sqrt g
    EXPECT_NEAR(se.normal[axis] * se.induced_density, -md.sqrt_det, 1e-12 * md.sqrt_det);
  }
}

namespace {

struct MassSetup {
  MetricField m = preset("static_spherical");
  GridSpec g{m.chart(), {5, 17, 17, 16}, 4};
  RegionSpec slice{g, {0.0, 1.0, m.chart().lower(2), 0.0},
                   {0.0, 2.0, m.chart().upper(2), 2 * kPi}};
  TensorDensityField k = field(m, {Slot::Up}, {"1", "0", "0", "0"});
};

}  // namespace

TEST(Mass, ZeroStressGivesZero) {
  MassSetup s;
  const auto t = scalar_stress_energy(field(s.m, {}, {"1"}), s.m);
  const auto rep = mass_integral(t, s.k, s.m, s.slice);
  EXPECT_EQ(rep.mass, 0.0);
  EXPECT_EQ(rep.slice_axis, 0);
  EXPECT_TRUE(rep.warnings.empty());
}

TEST(Mass, MatchesNaiveSum) {
  MassSetup s;
  const auto t = scalar_stress_energy(field(s.m, {}, {"1/r"}), s.m);
  const auto rep = mass_integral(t, s.k, s.m, s.slice, {.quadrature = Quadrature::Simpson});
  // (T^t_t - T) = phi'^2 / (8 pi), n_t sqrt(gamma) = r^2 sin(theta).
  const auto wr = quadrature_weights(Quadrature::Simpson, 17, s.g.spacing(1), false);
  const auto wt = quadrature_weights(Quadrature::Simpson, 17, s.g.spacing(2), false);
  double naive = 0.0;
  for (int i = 0; i < 17; ++i)
    for (int j = 0; j < 17; ++j) {
      const double r = s.g.coordinate(1, i), th = s.g.coordinate(2, j);
      naive += wr[i] * wt[j] * (1.0 / std::pow(r, 4)) / (8 * kPi) * r * r * std::sin(th);
    }
  naive *= 2 * kPi * (-1.0 / (16 * kPi));
  EXPECT_NEAR(rep.mass, naive, 1e-15);
  // Closed form: -(1/16 pi)(1/8 pi) * solid angle * (1 - 1/2)
  const double exact = -1.0 / (16 * kPi) / (8 * kPi) * 2 * kPi * 2 * std::cos(s.m.chart().lower(2)) * 0.5;
  EXPECT_NEAR(rep.mass, exact, 1e-4 * std::abs(exact));
}

TEST(Mass, LinearInStressAndKilling) {
  MassSetup s;
  const auto t1 = scalar_stress_energy(field(s.m, {}, {"1/r"}), s.m);
  const auto t2 = scalar_stress_energy(field(s.m, {}, {"r*cos(theta)"}), s.m);
  const StressEnergyField sum(linear_combination(2.0, t1.up(), -0.5, t2.up()));
  const double m1 = mass_integral(t1, s.k, s.m, s.slice).mass;
  const double m2 = mass_integral(t2, s.k, s.m, s.slice).mass;
  const double ms = mass_integral(sum, s.k, s.m, s.slice).mass;
  EXPECT_NEAR(ms, 2.0 * m1 - 0.5 * m2, 1e-13 * (std::abs(m1) + std::abs(m2)));
  const double mk = mass_integral(t1, scaled(s.k, 3.0), s.m, s.slice).mass;
  EXPECT_NEAR(mk, 3.0 * m1, 1e-15);
}

TEST(Mass, Preconditions) {
  MassSetup s;
  const auto t = scalar_stress_energy(field(s.m, {}, {"1/r"}), s.m);
  // Whole lattice: nothing collapsed.
  EXPECT_THROW(mass_integral(t, s.k, s.m, RegionSpec(s.g)), PreconditionError);
  // A spatial slice has a spacelike normal.
  const RegionSpec radial(s.g, {0.0, 1.5, s.m.chart().lower(2), 0.0},
                          {1.0, 1.5, s.m.chart().upper(2), 2 * kPi});
  EXPECT_THROW(mass_integral(t, s.k, s.m, radial), GeometryError);
  // Far from Killing: refused.
  EXPECT_THROW(mass_integral(t, field(s.m, {Slot::Up}, {"r^3", "0", "0", "0"}), s.m, s.slice),
               PreconditionError);
  // Riemannian metric has no timelike direction.
  const MetricField sph = preset("spherical3");
  const GridSpec g3(sph.chart(), {5, 5, 8}, 2);
  const RegionSpec slice3(g3, {1.0, sph.chart().lower(1), 0.0},
                          {1.0, sph.chart().upper(1), 2 * kPi});
  const StressEnergyField t3(field(sph, {Slot::Up, Slot::Up},
                                   {"1", "0", "0", "0", "1", "0", "0", "0", "1"}));
  EXPECT_THROW(mass_integral(t3, field(sph, {Slot::Up}, {"0", "0", "1"}), sph, slice3),
               GeometryError);
}

TEST(Mass, SlightlyNonKillingWarns) {
  MassSetup s;
  const auto t = scalar_stress_energy(field(s.m, {}, {"1/r"}), s.m);
  const auto rep =
      mass_integral(t, field(s.m, {Slot::Up}, {"1", "1e-7*r", "0", "0"}), s.m, s.slice);
  EXPECT_EQ(rep.warnings.size(), 1u);
  EXPECT_GT(rep.killing_residual, 1e-10);
}
