#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lbds/bdsde_solver.hpp"
#include "lbds/path_engine.hpp"
#include "lbds/reflected_sde.hpp"

namespace lbds {

/// g(t, x, y) for a one-dimensional forward state.
using FlowFn = std::function<double(double t, double x, double y)>;

struct FlowDriver {
  FlowFn g;
  FlowFn g_y;  // optional; central differences otherwise
  bool x_independent = false;

  double value(double t, double x, double y) const { return g(t, x, y); }
  double dy(double t, double x, double y) const;
};

struct FlowPoint {
  double chi = 0.0;
  double dchi = 1.0;  // D_y chi
};

/// chi(tau_i, x, y) for every node i of the grid, integrated backward from
/// chi(T) = y along piecewise-linear B (Stratonovich limit).
std::vector<FlowPoint> flow_chi(const FlowDriver& g, const TimeGrid& grid, std::span<const double> dB,
                                double x, double y);

/// chi at a single node.
FlowPoint flow_at(const FlowDriver& g, const TimeGrid& grid, std::span<const double> dB,
                  std::size_t node, double x, double y);

/// chi and D_y chi tabulated on (node, x-lattice, y-lattice) for one B path.
/// Cubic Hermite in y, cubic Lagrange in x.
class FlowField {
 public:
  FlowField(FlowDriver g, TimeGrid grid, std::vector<double> dB, std::vector<double> x_grid,
            std::vector<double> y_grid);

  const FlowDriver& driver() const { return g_; }
  const TimeGrid& grid() const { return grid_; }
  std::span<const double> dB() const { return dB_; }
  std::span<const double> x_grid() const { return xs_; }
  std::span<const double> y_grid() const { return ys_; }

  FlowPoint table(std::size_t node, std::size_t ix, std::size_t iy) const {
    return data_[(node * xs_.size() + ix) * ys_.size() + iy];
  }
  /// Interpolated chi and D_y chi.
  FlowPoint chi(std::size_t node, double x, double y) const;
  /// Direct integration (no interpolation).
  FlowPoint exact(std::size_t node, double x, double y) const;
  /// Interpolated inside the lattice, integrated directly outside it.
  FlowPoint at(std::size_t node, double x, double y) const;
  double dchi_dx(std::size_t node, double x, double y) const;
  /// y-inverse: |chi(node, x, pi) - y| <= 1e-9 against the exact flow.
  double pi(std::size_t node, double x, double y) const;
  double min_dchi() const;

 private:
  FlowPoint column(std::size_t node, double x, std::size_t iy) const;

  FlowDriver g_;
  TimeGrid grid_;
  std::vector<double> dB_, xs_, ys_;
  std::vector<FlowPoint> data_;
};

struct FlowChecks {
  double min_dchi = 0.0;
  double fd_mismatch = 0.0;  // max relative |D_y chi - central difference|
  double roundtrip = 0.0;    // sup |pi(chi(y)) - y| over the y-lattice
  double growth_constant = 0.0;      // fitted C in |chi| <= |y| + C sup|B_T - B_s|
  double derivative_constant = 0.0;  // fitted C in |log D_y chi| <= C sup|B_T - B_s|
};

FlowChecks check_flow(const FlowField& flow, std::size_t node_stride = 1);

/// Scalar driver f(t, x, y, z) with a one-dimensional state.
using ScalarDriverFn = std::function<double(double t, double x, double y, std::span<const double> z)>;
using ScalarBoundaryFn = std::function<double(double t, double x, double y)>;
using TestField = std::function<double(double t, double x)>;
using ScalarSigma = std::function<double(double x)>;

/// L^x_t chi = b sigma D_x chi + sum_j [chi(x + sigma e_j) - chi - D_x chi sigma e_j] lambda_j.
double flow_generator(const FlowField& flow, const LevyCharacteristics& chars,
                      const ScalarSigma& sigma, std::size_t node, double x, double y);

/// Transformed driver f~ evaluated at (tau_node, x, y, z) with test field phi.
double transformed_f(const ScalarDriverFn& f, const FlowField& flow, const MartingaleBasis& basis,
                     const LevyCharacteristics& chars, const ScalarSigma& sigma, const TestField& phi,
                     std::size_t node, double x, double y, double z);

/// Transformed boundary driver h~ at a boundary point x.
double transformed_h(const ScalarBoundaryFn& h, const FlowField& flow, const SmoothDomain& domain,
                     std::size_t node, double x, double y);

/// One flow table per backward group of the batch (per path when groups are off).
std::vector<FlowField> tabulate_flows(const FlowDriver& g, const PathBatch& batch,
                                      const std::vector<double>& x_grid,
                                      const std::vector<double>& y_grid);

/// Drivers of the pathwise transformed problem v = pi(t, Y) with no B-integral.
/// Requires an x-independent g, c = 0 and an f that ignores z. The flows, the
/// batch and the basis must outlive the returned drivers.
DriverSet transformed_drivers(const DriverSet& original, const FlowDriver& g,
                              const std::vector<FlowField>& flows, const PathBatch& batch,
                              const MartingaleBasis& basis);

/// Maps a solution of the transformed problem back through chi: Y exactly,
/// Z to first order (scaled by D_y chi), K unchanged.
SolutionGrid flow_restore(const SolutionGrid& v, const std::vector<FlowField>& flows,
                          const PathBatch& batch);

}  // namespace lbds
