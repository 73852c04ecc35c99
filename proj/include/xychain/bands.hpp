#pragma once

// Quasi-energy bands of the infinite kicked XY chain and the count of their
// non-trivial stationary points.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "xychain/types.hpp"

namespace xychain {

/// Quasi-particle energy of the unkicked chain.
inline double epsilon(double kappa, double gamma) {
  const double c = std::cos(kappa);
  const double s = std::sin(kappa);
  return std::sqrt(c * c + gamma * gamma * s * s);
}

inline constexpr double kArccosSlack = 1e-12;

/// Upper band theta_1(kappa) in [0, pi]; the lower band is its negative.
inline double quasienergy(double kappa, double gamma, double h, double tau) {
  const double eps = epsilon(kappa, gamma);
  if (eps < 1e-14) {
    fail(ErrorCode::SingularDispersion,
         "singular dispersion: epsilon(kappa) vanishes at kappa = " + std::to_string(kappa));
  }
  const double arg = std::cos(2 * tau * h) * std::cos(2 * tau * eps) +
                     std::sin(2 * tau * h) * std::sin(2 * tau * eps) * std::cos(kappa) / eps;
  if (std::abs(arg) > 1.0 + kArccosSlack) {
    fail(ErrorCode::NumericalInconsistency,
         "quasi-energy argument " + std::to_string(arg) + " outside [-1, 1]");
  }
  return std::acos(std::clamp(arg, -1.0, 1.0));
}

struct StationaryCount {
  int half_count = 0;
  int raw_count = 0;
  int grid_size = 0;          // grid the returned value was taken from
  bool refined = false;       // initial and doubled grids disagreed
};

namespace detail {

// Sign changes of the central-difference slope on the symmetric grid
// kappa_i = (i - G/2) * 2pi/G, skipping windows of half-width 2 steps around
// the trivial stationary points 0 and +-pi.
inline int raw_stationary_count(double gamma, double h, double tau, int grid) {
  const double step = 2 * std::numbers::pi / grid;
  const int half = grid / 2;
  auto theta = [&](int i) { return quasienergy(step * (i - half), gamma, h, tau); };
  std::vector<double> th(static_cast<std::size_t>(grid + 3));
  for (int i = -1; i <= grid + 1; ++i) th[static_cast<std::size_t>(i + 1)] = theta(i);
  auto slope_sign = [&](int i) {
    const double d = th[static_cast<std::size_t>(i + 2)] - th[static_cast<std::size_t>(i)];
    return (d > 0) - (d < 0);
  };
  const double window = 2 * step;
  int count = 0;
  int prev = slope_sign(0);
  for (int i = 1; i <= grid; ++i) {
    const int cur = slope_sign(i);
    if (cur == 0) continue;
    if (prev != 0 && cur != prev) {
      const double mid = step * (i - half) - step / 2;
      const bool trivial = std::abs(mid) <= window || std::abs(mid) >= std::numbers::pi - window;
      if (!trivial) ++count;
    }
    prev = cur;
  }
  return count;
}

}  // namespace detail

/// Half the number of non-trivial stationary points of theta_1 over the
/// Brillouin zone. The grid is doubled once to confirm the count, and once more
/// if the first two grids disagree.
inline StationaryCount count_stationary_points(double gamma, double h, double tau,
                                               int grid_size = 10000) {
  require(grid_size >= 1000, "grid_size must be >= 1000");
  require(std::isfinite(gamma) && std::isfinite(h) && std::isfinite(tau),
          "band parameters must be finite");
  const int grid = grid_size + (grid_size % 2);
  auto counted = [&](int g) {
    const int raw = detail::raw_stationary_count(gamma, h, tau, g);
    if (raw % 2 != 0) {
      fail(ErrorCode::NumericalInconsistency,
           "odd stationary-point count " + std::to_string(raw) + " on grid " + std::to_string(g));
    }
    return raw;
  };
  const int c1 = counted(grid);
  const int c2 = counted(2 * grid);
  if (c1 == c2) return {c1 / 2, c1, grid, false};
  const int c4 = counted(4 * grid);
  if (c4 == c2) return {c2 / 2, c2, 2 * grid, true};
  fail(ErrorCode::UnresolvedBands, "unresolved band structure: counts " + std::to_string(c2) +
                                       " and " + std::to_string(c4) + " on grids " +
                                       std::to_string(2 * grid) + " and " +
                                       std::to_string(4 * grid));
}

struct BandCountMap {
  Eigen::MatrixXi half_counts;  // rows follow the a grid, columns the tau grid; -1 when masked
  std::vector<std::vector<std::optional<ErrorCode>>> errors;
  std::vector<std::vector<bool>> refined;
};

/// Count map over an (a, tau) grid with h = a / tau per cell. Failing cells are
/// masked rather than aborting the map.
inline BandCountMap band_count_map(double gamma, const std::vector<double>& a_grid,
                                   const std::vector<double>& tau_grid, int grid_size = 10000) {
  require(!a_grid.empty() && !tau_grid.empty(), "band map grids must be non-empty");
  const auto na = static_cast<Eigen::Index>(a_grid.size());
  const auto nt = static_cast<Eigen::Index>(tau_grid.size());
  BandCountMap out;
  out.half_counts = Eigen::MatrixXi::Constant(na, nt, -1);
  out.errors.assign(a_grid.size(), std::vector<std::optional<ErrorCode>>(tau_grid.size()));
  out.refined.assign(a_grid.size(), std::vector<bool>(tau_grid.size(), false));
  for (Eigen::Index i = 0; i < na; ++i) {
    for (Eigen::Index j = 0; j < nt; ++j) {
      const auto ui = static_cast<std::size_t>(i);
      const auto uj = static_cast<std::size_t>(j);
      try {
        require(tau_grid[uj] > 0, "tau must be positive");
        const StationaryCount sc =
            count_stationary_points(gamma, a_grid[ui] / tau_grid[uj], tau_grid[uj], grid_size);
        out.half_counts(i, j) = sc.half_count;
        out.refined[ui][uj] = sc.refined;
      } catch (const Error& e) {
        out.errors[ui][uj] = e.code();
      }
    }
  }
  return out;
}

}  // namespace xychain
