#pragma once

// End-to-end covariance computations: static NESS and kicked Floquet state.

#include <cmath>

#include "xychain/lyap.hpp"
#include "xychain/model_core.hpp"
#include "xychain/types.hpp"

namespace xychain {

/// Orthogonal action of the kick U = exp(-i a sum_s sz_s) on the Majorana
/// vector in the Heisenberg picture, U^dag w_j U = sum_k k_jk w_k, so that the
/// state update rho -> U rho U^dag sends C to k C k^T.
struct KickMap {
  RealMatrix k;
};

inline KickMap kick_map(int n_sites, double a) {
  require(n_sites >= 1, "n_sites must be >= 1");
  const double c = std::cos(2.0 * a);
  const double s = std::sin(2.0 * a);
  RealMatrix k = RealMatrix::Zero(2 * n_sites, 2 * n_sites);
  for (int site = 0; site < n_sites; ++site) {
    const int x = 2 * site;
    k(x, x) = c;
    k(x, x + 1) = -s;
    k(x + 1, x) = s;
    k(x + 1, x + 1) = c;
  }
  return {std::move(k)};
}

struct PipelineOptions {
  LyapunovMethod method = LyapunovMethod::Kronecker;
  KickOrder kick_order = KickOrder::FreeThenKick;
};

/// A correlation matrix together with the solver residual it was certified by.
struct CovarianceResult {
  CorrelationMatrix corr;
  double residual = 0.0;
  double q_condition = 1.0;  // kicked model only
};

/// Enforces the exact antisymmetric, purely imaginary form after checking that
/// the solver output is within tolerance of it.
inline CorrelationMatrix clean_correlation(const ComplexMatrix& c, double tolerance = 1e-10) {
  const double asym = (c + c.transpose()).cwiseAbs().maxCoeff();
  const double real = c.real().cwiseAbs().maxCoeff();
  if (asym > tolerance || real > tolerance) {
    fail(ErrorCode::NumericalInconsistency,
         "correlation matrix violates antisymmetry/imaginarity: " + std::to_string(asym) +
             ", " + std::to_string(real));
  }
  const RealMatrix im = c.imag();
  return {I_unit * (0.5 * (im - im.transpose())).cast<cplx>()};
}

inline CovarianceResult static_ness_detailed(const ChainParams& params,
                                             const PipelineOptions& options = {}) {
  params.validate(2);
  if (!params.bath.any_positive()) {
    fail(ErrorCode::NoUniqueSteadyState, "no unique steady state: all bath rates are zero");
  }
  const StructureMatrices sm =
      assemble_structure(build_xy_form(params, true), build_bath_vectors(params));
  const CorrelationMatrix raw = solve_continuous_lyapunov(sm.x, sm.y, options.method);
  CovarianceResult out;
  out.residual = continuous_residual(sm.x, sm.y, raw);
  if (out.residual > kLyapunovResidualTolerance) {
    fail(ErrorCode::NumericalInconsistency,
         "continuous Lyapunov residual " + std::to_string(out.residual) + " above tolerance");
  }
  out.corr = clean_correlation(raw.c);
  return out;
}

inline CorrelationMatrix static_ness(const ChainParams& params,
                                     const PipelineOptions& options = {}) {
  return static_ness_detailed(params, options).corr;
}

/// One-period map (Q, P) of the kicked chain, anchored at the end of the period.
inline PeriodPropagator kicked_period_map(const ChainParams& params, const KickParams& kick,
                                          KickOrder order = KickOrder::FreeThenKick) {
  params.validate(2);
  require(kick.tau > 0 && std::isfinite(kick.tau), "tau must be positive");
  require(std::isfinite(kick.a), "a must be finite");
  const StructureMatrices sm =
      assemble_structure(build_xy_form(params, false), build_bath_vectors(params));
  PeriodPropagator free = propagate_period(sm.x, sm.y, kick.tau);
  const RealMatrix k = kick_map(params.n_sites, fold_kick(kick.a)).k;
  if (order == KickOrder::FreeThenKick) {
    free.q = k * free.q;
    free.p = k * free.p;
  } else {
    free.q = free.q * k;
    free.p = free.p * k;
  }
  return free;
}

inline CovarianceResult kicked_floquet_detailed(const ChainParams& params,
                                                const KickParams& kick,
                                                const PipelineOptions& options = {}) {
  if (!params.bath.any_positive()) {
    fail(ErrorCode::NoUniqueSteadyState, "no unique steady state: all bath rates are zero");
  }
  const PeriodPropagator map = kicked_period_map(params, kick, options.kick_order);
  const ComplexMatrix r = I_unit * (map.p * map.q.transpose()).cast<cplx>();
  const CorrelationMatrix raw = solve_discrete_lyapunov(map.q, r, options.method);
  CovarianceResult out;
  out.q_condition = map.q_condition;
  out.residual = discrete_residual(map.q, r, raw);
  if (out.residual > kLyapunovResidualTolerance) {
    fail(ErrorCode::NumericalInconsistency,
         "discrete Lyapunov residual " + std::to_string(out.residual) + " above tolerance");
  }
  out.corr = clean_correlation(raw.c);
  return out;
}

inline CorrelationMatrix kicked_floquet(const ChainParams& params, const KickParams& kick,
                                        const PipelineOptions& options = {}) {
  return kicked_floquet_detailed(params, kick, options).corr;
}

}  // namespace xychain
