#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace xychain {

using cplx = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr cplx I_unit{0.0, 1.0};

enum class ErrorCode {
  InvalidArgument,
  NoUniqueSteadyState,
  NonUniqueFloquet,
  Resonance,
  SingularDispersion,
  NumericalInconsistency,
  UnresolvedBands,
  MemoryGuard,
  NotConverged,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::NoUniqueSteadyState: return "no_unique_ness";
    case ErrorCode::NonUniqueFloquet: return "non_unique_floquet";
    case ErrorCode::Resonance: return "resonance";
    case ErrorCode::SingularDispersion: return "singular_dispersion";
    case ErrorCode::NumericalInconsistency: return "numerical_inconsistency";
    case ErrorCode::UnresolvedBands: return "unresolved_bands";
    case ErrorCode::MemoryGuard: return "memory_guard";
    case ErrorCode::NotConverged: return "not_converged";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable code, which
/// the sweep driver writes into the status column of masked cells.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::InvalidArgument, what);
}

/// Lindblad rates of the four end-site jump operators
/// L1 = sqrt(g1L) s1+, L2 = sqrt(g2L) s1-, L3 = sqrt(g1R) sN+, L4 = sqrt(g2R) sN-.
struct BathRates {
  double gamma_1L = 0.5;
  double gamma_2L = 0.3;
  double gamma_1R = 0.5;
  double gamma_2R = 0.1;

  bool any_positive() const {
    return gamma_1L > 0 || gamma_2L > 0 || gamma_1R > 0 || gamma_2R > 0;
  }
  bool all_nonnegative() const {
    return gamma_1L >= 0 && gamma_2L >= 0 && gamma_1R >= 0 && gamma_2R >= 0;
  }
};

struct ChainParams {
  int n_sites = 4;
  double gamma = 0.5;  // anisotropy
  double h = 0.0;      // transverse field, static model only
  BathRates bath{};

  void validate(int min_sites = 2) const {
    require(n_sites >= min_sites,
            "n_sites must be >= " + std::to_string(min_sites) + ", got " +
                std::to_string(n_sites));
    require(std::isfinite(gamma) && gamma >= 0.0 && gamma <= 1.0,
            "gamma must lie in [0, 1], got " + std::to_string(gamma));
    require(std::isfinite(h), "h must be finite");
    require(bath.all_nonnegative(), "bath rates must be nonnegative");
  }
};

struct KickParams {
  double a = 0.0;    // kick strength h*tau
  double tau = 1.0;  // kick period
};

/// Kick strength reduced to the canonical window [0, pi/2). The kicked
/// dynamics is invariant under a -> a + pi/2.
inline double fold_kick(double a) {
  constexpr double period = std::numbers::pi / 2;
  double r = std::fmod(a, period);
  if (r < 0) r += period;
  if (r >= period) r = 0.0;
  return r;
}

/// Which index pairs enter the residual correlator: site distance
/// |site(j) - site(k)| >= N/2, or raw Majorana distance |j - k| >= N.
enum class DistanceConvention { Site, Majorana };

/// Order of the two steps inside one driving period; the Floquet state is the
/// state at the end of the period.
enum class KickOrder { FreeThenKick, KickThenFree };

}  // namespace xychain
