#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "covar/calculus.hpp"
#include "covar/grid.hpp"
#include "covar/metric.hpp"
#include "covar/physics.hpp"
#include "covar/tensor_field.hpp"

namespace covar {

/// Trapezoid works for any point count. Simpson uses the 1-4-2-4-1 rule on an
/// even number of intervals and closes an odd count with a 3/8 panel.
/// Periodic axes always use equal weights.
enum class Quadrature { Trapezoid, Simpson };
std::string_view quadrature_name(Quadrature q);
/// Convergence order of the rule on a non-periodic axis.
int quadrature_order(Quadrature q);

/// 1D weights for `count` equally spaced nodes with spacing `h`.
std::vector<double> quadrature_weights(Quadrature q, int count, double h, bool periodic);

/// Boundary face of a region: the lattice plane at the lower (side -1) or
/// upper (side +1) end of a non-periodic axis.
struct Face {
  int axis = 0;
  int side = 1;
  /// +1: flux counted along the outward normal; -1: reversed.
  int orientation = 1;
};

/// Coordinate box of lattice nodes. An axis may be collapsed to a single lattice
/// plane (e.g. a t = const slice); periodic axes must cover their full period.
class RegionSpec {
 public:
  /// The whole lattice.
  explicit RegionSpec(GridSpec grid);
  /// Sub-box [lower, upper] per axis; bounds must sit on lattice planes.
  RegionSpec(GridSpec grid, std::vector<double> lower, std::vector<double> upper);

  const GridSpec& grid() const { return grid_; }
  int dim() const { return grid_.dim(); }
  int first(int axis) const { return first_[axis]; }
  int last(int axis) const { return last_[axis]; }
  bool collapsed(int axis) const { return first_[axis] == last_[axis]; }
  int count(int axis) const { return last_[axis] - first_[axis] + 1; }

  /// Faces of the non-collapsed, non-periodic axes.
  const std::vector<Face>& faces() const { return faces_; }
  /// Same box with every face orientation negated.
  RegionSpec reversed() const;

  /// Lattice node indices inside the region, in lattice order.
  std::vector<std::size_t> nodes() const;

 private:
  void build_faces();
  GridSpec grid_;
  std::vector<int> first_, last_;
  std::vector<Face> faces_;
};

/// Unit normal and induced density on a coordinate face normal to `axis`.
struct SurfaceElement {
  int axis = 0;
  int sign = 1;
  /// n_nu = sign delta^axis_nu / sqrt|g^{axis axis}|, so g^{mu nu} n_mu n_nu = +-1.
  std::array<double, kMaxDim> normal{};
  /// +1 for a spacelike normal, -1 for a timelike one.
  int causal = 1;
  /// sqrt|det of the induced metric| = sqrt g * sqrt|g^{axis axis}|.
  double induced_density = 0.0;
};
SurfaceElement surface_element(const MetricPointData& md, int axis, int sign);

/// Integral of f sqrt g over the region (the weight-1 density f itself if f has weight 1).
double volume_integral(const TensorDensityField& f, const MetricField& m, const RegionSpec& region,
                       Quadrature q = Quadrature::Trapezoid);

/// Integral of P^nu n_nu sqrt(gamma) over one face.
double face_flux(const TensorDensityField& p, const MetricField& m, const RegionSpec& region,
                 const Face& face, Quadrature q = Quadrature::Trapezoid);

/// Net outward flux of a weight-0 vector through every face of the region.
double surface_integral(const TensorDensityField& p, const MetricField& m,
                        const RegionSpec& region, Quadrature q = Quadrature::Trapezoid);

struct GaussReport {
  double lhs = 0.0;
  double rhs = 0.0;
  /// |lhs - rhs| / max(|lhs|, |rhs|, 1)
  double residual = 0.0;
  int resolution = 0;
  int order = 0;
  Channel channel = Channel::Analytic;
};

/// Volume integral of the divergence (sqrt g route) against the boundary flux.
GaussReport gauss_check(const TensorDensityField& p, const MetricField& m, const RegionSpec& region,
                        Quadrature q = Quadrature::Trapezoid);

struct MassOptions {
  double prefactor = -0.019894367886486918;  // -1/(16 pi)
  /// Coefficient c of delta^mu_nu T in (T^mu_nu - c delta^mu_nu T).
  double trace_coefficient = 1.0;
  Quadrature quadrature = Quadrature::Trapezoid;
  /// Above this Killing residual a warning is attached.
  double killing_tolerance = 1e-10;
  /// Above this Killing residual the integral is refused.
  double killing_hard_cap = 1e-4;
};

struct MassReport {
  double mass = 0.0;
  double killing_residual = 0.0;
  int slice_axis = -1;
  std::vector<std::string> warnings;
};

/// prefactor * integral of (T^mu_nu - c delta^mu_nu T) k^nu dS_mu over a slice:
/// the region must collapse exactly one axis, whose normal must be timelike.
MassReport mass_integral(const StressEnergyField& t, const TensorDensityField& k,
                         const MetricField& m, const RegionSpec& region,
                         const MassOptions& options = {});

}  // namespace covar
