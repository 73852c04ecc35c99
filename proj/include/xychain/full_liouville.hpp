#pragma once

// Brute-force Lindblad dynamics on the 2^N dimensional Hilbert space.
//
// Density matrices are vectorized column-major, so vec(A rho B) = (B^T (x) A) vec(rho).
// Generator convention: d rho/dt = -i[H, rho] + sum_mu 2 L rho L^dag - {L^dag L, rho}.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "xychain/lyap.hpp"
#include "xychain/model_core.hpp"
#include "xychain/pauli.hpp"
#include "xychain/types.hpp"

namespace xychain {

inline constexpr int kMaxHamiltonianSites = 12;
inline constexpr int kMaxDenseSites = 6;
inline constexpr int kMaxMatrixFreeSites = 10;

struct RangeSpec {
  enum class Kind { NearestNeighbor, PowerLaw };
  Kind kind = Kind::NearestNeighbor;
  double alpha = 0.0;

  static RangeSpec nearest_neighbor() { return {}; }
  static RangeSpec power_law(double alpha) { return {Kind::PowerLaw, alpha}; }

  void validate() const {
    if (kind == Kind::PowerLaw) {
      require(alpha > 0 && std::isfinite(alpha), "power-law exponent alpha must be positive");
    }
  }
};

struct CouplingMatrices {
  RealMatrix jx;
  RealMatrix jy;
};

/// J^eta_{jk} = J^eta_{j,j+1} |j-k|^-alpha on the open chain; nearest-neighbour
/// range keeps only |j-k| = 1.
inline CouplingMatrices coupling_matrices(const ChainParams& params, const RangeSpec& range) {
  range.validate();
  const int n = params.n_sites;
  const double jx = (1.0 + params.gamma) / 2.0;
  const double jy = (1.0 - params.gamma) / 2.0;
  CouplingMatrices out{RealMatrix::Zero(n, n), RealMatrix::Zero(n, n)};
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      const int dist = k - j;
      double scale = 0.0;
      if (dist == 1) {
        scale = 1.0;
      } else if (range.kind == RangeSpec::Kind::PowerLaw) {
        scale = std::pow(static_cast<double>(dist), -range.alpha);
      }
      out.jx(j, k) = out.jx(k, j) = jx * scale;
      out.jy(j, k) = out.jy(k, j) = jy * scale;
    }
  }
  return out;
}

inline SparseComplex hamiltonian_sparse(const ChainParams& params, const RangeSpec& range,
                                        bool include_field) {
  params.validate(1);
  if (params.n_sites > kMaxHamiltonianSites) {
    fail(ErrorCode::MemoryGuard, "full Hilbert-space construction limited to N <= " +
                                     std::to_string(kMaxHamiltonianSites));
  }
  const int n = params.n_sites;
  const CouplingMatrices j = coupling_matrices(params, range);
  std::vector<PauliTerm> terms;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (j.jx(a, b) != 0.0) terms.push_back({j.jx(a, b), pauli_x(n, a) * pauli_x(n, b)});
      if (j.jy(a, b) != 0.0) terms.push_back({j.jy(a, b), pauli_y(n, a) * pauli_y(n, b)});
    }
  }
  if (include_field && params.h != 0.0) {
    for (int s = 0; s < n; ++s) terms.push_back({params.h, pauli_z(n, s)});
  }
  return pauli_sum_matrix(n, terms);
}

/// Spin Hamiltonian on the full space. Nearest-neighbour range with the field
/// reproduces the static XY chain; power-law range gives the long-range model.
inline ComplexMatrix build_hamiltonian_full(const ChainParams& params, const RangeSpec& range,
                                            bool include_field) {
  return ComplexMatrix(hamiltonian_sparse(params, range, include_field));
}

/// The four end-site jump operators sqrt(rate) s+-, in the order L1..L4.
inline std::array<SparseComplex, 4> jump_operators(const ChainParams& params) {
  params.validate(1);
  const int n = params.n_sites;
  const BathRates& b = params.bath;
  // s+ = (X + iY)/2, s- = (X - iY)/2
  auto ladder = [n](int site, double rate, double sign) {
    const double amp = std::sqrt(rate) / 2.0;
    return pauli_sum_matrix(n, {{amp, pauli_x(n, site)}, {sign * I_unit * amp, pauli_y(n, site)}});
  };
  return {ladder(0, b.gamma_1L, +1.0), ladder(0, b.gamma_2L, -1.0),
          ladder(n - 1, b.gamma_1R, +1.0), ladder(n - 1, b.gamma_2R, -1.0)};
}

/// Matrix-free Lindblad generator: holds sparse H and jump operators and applies
/// the generator to a density matrix.
class LindbladGenerator {
 public:
  LindbladGenerator(SparseComplex hamiltonian, std::array<SparseComplex, 4> jumps)
      : h_(std::move(hamiltonian)), jumps_(std::move(jumps)) {
    dim_ = h_.rows();
    for (const auto& l : jumps_) {
      require(l.rows() == dim_ && l.cols() == dim_, "jump operator dimension mismatch");
      ldag_.push_back(l.adjoint());
      ldl_.push_back(ldag_.back() * l);
    }
  }

  LindbladGenerator(const ChainParams& params, const RangeSpec& range, bool include_field)
      : LindbladGenerator(hamiltonian_sparse(params, range, include_field),
                          jump_operators(params)) {}

  Eigen::Index dim() const { return dim_; }
  const SparseComplex& hamiltonian() const { return h_; }

  ComplexMatrix apply(const ComplexMatrix& rho) const {
    require(rho.rows() == dim_ && rho.cols() == dim_, "density matrix shape mismatch");
    ComplexMatrix out = -I_unit * (h_ * rho - rho * h_);
    for (std::size_t k = 0; k < jumps_.size(); ++k) {
      const ComplexMatrix lr = jumps_[k] * rho;
      out += 2.0 * (lr * ldag_[k]) - ldl_[k] * rho - rho * ldl_[k];
    }
    return out;
  }

  ComplexVector apply_vec(const ComplexVector& v) const {
    const Eigen::Map<const ComplexMatrix> rho(v.data(), dim_, dim_);
    const ComplexMatrix out = apply(ComplexMatrix(rho));
    return Eigen::Map<const ComplexVector>(out.data(), out.size());
  }

  /// Dense superoperator; only sensible for small N.
  ComplexMatrix superoperator() const {
    const Eigen::Index d = dim_;
    SparseComplex id(d, d);
    id.setIdentity();
    auto kron = [](const SparseComplex& a, const SparseComplex& b) {
      SparseComplex out(a.rows() * b.rows(), a.cols() * b.cols());
      std::vector<Eigen::Triplet<cplx>> trip;
      trip.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
      for (int ca = 0; ca < a.outerSize(); ++ca) {
        for (SparseComplex::InnerIterator ia(a, ca); ia; ++ia) {
          for (int cb = 0; cb < b.outerSize(); ++cb) {
            for (SparseComplex::InnerIterator ib(b, cb); ib; ++ib) {
              trip.emplace_back(static_cast<int>(ia.row() * b.rows() + ib.row()),
                                static_cast<int>(ia.col() * b.cols() + ib.col()),
                                ia.value() * ib.value());
            }
          }
        }
      }
      out.setFromTriplets(trip.begin(), trip.end());
      return out;
    };
    const SparseComplex ht = h_.transpose();
    SparseComplex total = -I_unit * kron(id, h_) + I_unit * kron(ht, id);
    for (std::size_t k = 0; k < jumps_.size(); ++k) {
      const SparseComplex lconj = jumps_[k].conjugate();
      const SparseComplex nt = ldl_[k].transpose();
      total += 2.0 * kron(lconj, jumps_[k]) - kron(id, ldl_[k]) - kron(nt, id);
    }
    return ComplexMatrix(total);
  }

 private:
  SparseComplex h_;
  std::array<SparseComplex, 4> jumps_;
  std::vector<SparseComplex> ldag_;
  std::vector<SparseComplex> ldl_;
  Eigen::Index dim_ = 0;
};

/// d rho/dt for the given Hamiltonian and the chain's end-site baths.
inline ComplexMatrix lindblad_apply(const ComplexMatrix& rho, const ComplexMatrix& h_full,
                                    const ChainParams& baths) {
  require(h_full.rows() == h_full.cols(), "Hamiltonian must be square");
  require(h_full.rows() == (Eigen::Index{1} << baths.n_sites),
          "Hamiltonian dimension does not match 2^N");
  const LindbladGenerator gen(h_full.sparseView(), jump_operators(baths));
  return gen.apply(rho);
}

struct DensityMatrix {
  ComplexMatrix rho;

  int n_sites() const { return std::countr_zero(static_cast<std::uint64_t>(rho.rows())); }
};

struct DensityDiagnostics {
  double hermiticity = 0.0;  // max |rho - rho^dag|
  double trace_error = 0.0;  // |tr rho - 1|
  double min_eigenvalue = 0.0;
};

inline DensityDiagnostics density_diagnostics(const DensityMatrix& state) {
  DensityDiagnostics d;
  d.hermiticity = (state.rho - state.rho.adjoint()).cwiseAbs().maxCoeff();
  d.trace_error = std::abs(state.rho.trace() - 1.0);
  const ComplexMatrix herm = 0.5 * (state.rho + state.rho.adjoint());
  d.min_eigenvalue = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(herm, Eigen::EigenvaluesOnly)
                         .eigenvalues()
                         .minCoeff();
  return d;
}

inline constexpr double kDensityTolerance = 1e-10;
inline constexpr double kPositivityTolerance = -1e-8;

/// Raises when the state is not a density matrix within the library tolerances.
inline void validate_density(const DensityMatrix& state) {
  const DensityDiagnostics d = density_diagnostics(state);
  if (d.hermiticity > kDensityTolerance || d.trace_error > kDensityTolerance ||
      d.min_eigenvalue < kPositivityTolerance) {
    fail(ErrorCode::NumericalInconsistency,
         "invalid density matrix: hermiticity " + std::to_string(d.hermiticity) +
             ", trace error " + std::to_string(d.trace_error) + ", min eigenvalue " +
             std::to_string(d.min_eigenvalue));
  }
}

struct Superoperator {
  ComplexMatrix matrix;

  ComplexVector apply(const ComplexVector& v) const { return matrix * v; }
};

struct FullSolverOptions {
  KickOrder kick_order = KickOrder::FreeThenKick;
  bool spectral_gap = false;       // dense path: full eigen-decomposition for the gap
  bool force_matrix_free = false;  // use the iterative path even for small N
  int max_iterations = 200000;     // power iteration / propagation chunks
  double propagation_chunk = 5.0;  // static long-time propagation step
  int krylov_dim = 30;
};

struct FullStateResult {
  DensityMatrix state;
  double residual = 0.0;  // max |L rho| (static) or max |Phi rho - rho| (Floquet)
  double gap = std::numeric_limits<double>::quiet_NaN();
  bool matrix_free = false;
  int iterations = 0;
};

namespace detail {

inline ComplexVector vec(const ComplexMatrix& m) {
  return Eigen::Map<const ComplexVector>(m.data(), m.size());
}

inline ComplexMatrix unvec(const ComplexVector& v, Eigen::Index dim) {
  return Eigen::Map<const ComplexMatrix>(v.data(), dim, dim);
}

inline ComplexVector trace_row(Eigen::Index dim) {
  ComplexVector row = ComplexVector::Zero(dim * dim);
  for (Eigen::Index p = 0; p < dim; ++p) row(p + p * dim) = 1.0;
  return row;
}

// Null vector of a generator-like matrix whose rows sum (over diagonal entries)
// to zero: the (0,0) row is redundant and is replaced by the trace condition.
inline ComplexVector trace_normalized_null_vector(ComplexMatrix system, Eigen::Index dim,
                                                  ErrorCode degenerate_code,
                                                  const std::string& what) {
  system.row(0) = trace_row(dim).transpose();
  ComplexVector rhs = ComplexVector::Zero(system.rows());
  rhs(0) = 1.0;
  const Eigen::PartialPivLU<ComplexMatrix> lu(system);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-13)) {
    fail(degenerate_code, what + " (reciprocal condition " + std::to_string(rcond) + ")");
  }
  return lu.solve(rhs);
}

// Diagonal of the kick superoperator rho -> U rho U^dag with U = exp(-i a sum sz).
inline ComplexVector kick_diagonal(int n_sites, double a) {
  const Eigen::Index dim = Eigen::Index{1} << n_sites;
  ComplexVector u(dim);
  for (Eigen::Index p = 0; p < dim; ++p) {
    const int mz = n_sites - 2 * std::popcount(static_cast<std::uint64_t>(p));
    u(p) = std::exp(-I_unit * a * static_cast<double>(mz));
  }
  ComplexVector out(dim * dim);
  for (Eigen::Index q = 0; q < dim; ++q) {
    for (Eigen::Index p = 0; p < dim; ++p) out(p + q * dim) = u(p) * std::conj(u(q));
  }
  return out;
}

/// exp(t A) v for a matrix-free A, by Arnoldi projection with adaptive substeps.
template <typename Apply>
ComplexVector krylov_expv(const Apply& apply, const ComplexVector& v, double t, int m,
                          double tol = 1e-13) {
  ComplexVector w = v;
  double remaining = t;
  double dt = t;
  const Eigen::Index n = v.size();
  m = static_cast<int>(std::min<Eigen::Index>(m, n));
  while (remaining > 0) {
    const double beta = w.norm();
    if (beta == 0.0) return w;
    std::vector<ComplexVector> basis;
    basis.push_back(w / beta);
    ComplexMatrix hess = ComplexMatrix::Zero(m + 1, m);
    int k_used = m;
    bool breakdown = false;
    for (int j = 0; j < m; ++j) {
      ComplexVector z = apply(basis[static_cast<std::size_t>(j)]);
      for (int i = 0; i <= j; ++i) {
        hess(i, j) = basis[static_cast<std::size_t>(i)].dot(z);
        z -= hess(i, j) * basis[static_cast<std::size_t>(i)];
      }
      const double hn = z.norm();
      hess(j + 1, j) = hn;
      if (hn < 1e-12 * beta) {
        k_used = j + 1;
        breakdown = true;
        break;
      }
      basis.push_back(z / hn);
    }
    dt = std::min(dt, remaining);
    for (;;) {
      const ComplexMatrix f = matrix_exp(ComplexMatrix(dt * hess.topLeftCorner(k_used, k_used)));
      const double err =
          breakdown ? 0.0 : beta * std::abs(hess(k_used, k_used - 1)) * dt * std::abs(f(k_used - 1, 0));
      if (err <= tol * beta || dt < 1e-12 * t) {
        ComplexVector next = ComplexVector::Zero(n);
        for (int i = 0; i < k_used; ++i) next += f(i, 0) * basis[static_cast<std::size_t>(i)];
        w = beta * next;
        remaining -= dt;
        if (err < 0.1 * tol * beta) dt *= 1.5;
        break;
      }
      dt *= 0.5;
    }
  }
  return w;
}

}  // namespace detail

/// exp(L0 tau) as a dense superoperator (N <= 6).
inline Superoperator free_propagator(const ChainParams& params, const RangeSpec& range,
                                     double tau) {
  require(tau >= 0 && std::isfinite(tau), "tau must be nonnegative");
  if (params.n_sites > kMaxDenseSites) {
    fail(ErrorCode::MemoryGuard,
         "dense superoperator limited to N <= " + std::to_string(kMaxDenseSites));
  }
  const LindbladGenerator gen(params, range, false);
  if (tau == 0.0) {
    const Eigen::Index d2 = gen.dim() * gen.dim();
    return {ComplexMatrix::Identity(d2, d2)};
  }
  return {matrix_exp(ComplexMatrix(tau * gen.superoperator()))};
}

/// Composes a precomputed free propagator with the kick conjugation.
inline Superoperator compose_kick(const Superoperator& free, int n_sites, double a,
                                  KickOrder order) {
  const ComplexVector diag = detail::kick_diagonal(n_sites, a);
  require(free.matrix.rows() == diag.size(), "propagator dimension does not match n_sites");
  if (order == KickOrder::FreeThenKick) return {diag.asDiagonal() * free.matrix};
  return {free.matrix * diag.asDiagonal()};
}

/// One-period superoperator of the kicked chain (dense, N <= 6).
inline Superoperator one_period_map(const ChainParams& params, const KickParams& kick,
                                    const RangeSpec& range,
                                    KickOrder order = KickOrder::FreeThenKick) {
  require(kick.tau >= 0 && std::isfinite(kick.tau), "tau must be nonnegative");
  return compose_kick(free_propagator(params, range, kick.tau), params.n_sites, kick.a, order);
}

/// Fixed point of a dense one-period map, trace-normalized.
inline FullStateResult floquet_fixed_point(const Superoperator& map, int n_sites,
                                           bool spectral_gap = false) {
  const Eigen::Index dim = Eigen::Index{1} << n_sites;
  require(map.matrix.rows() == dim * dim, "map dimension does not match n_sites");
  FullStateResult out;
  if (spectral_gap) {
    ComplexVector ev = Eigen::ComplexEigenSolver<ComplexMatrix>(map.matrix, false).eigenvalues();
    std::vector<double> mags(static_cast<std::size_t>(ev.size()));
    for (Eigen::Index k = 0; k < ev.size(); ++k) mags[static_cast<std::size_t>(k)] = std::abs(ev(k));
    std::sort(mags.begin(), mags.end(), std::greater<>());
    out.gap = mags.size() > 1 ? 1.0 - mags[1] : 1.0;
    if (out.gap < kStabilityTolerance) {
      fail(ErrorCode::NonUniqueFloquet,
           "non-unique Floquet state: second eigenvalue modulus " + std::to_string(mags[1]));
    }
  }
  ComplexMatrix system = map.matrix;
  system.diagonal().array() -= 1.0;
  const ComplexVector x = detail::trace_normalized_null_vector(
      std::move(system), dim, ErrorCode::NonUniqueFloquet,
      "non-unique Floquet state: eigenvalue 1 is degenerate");
  out.residual = (map.apply(x) - x).cwiseAbs().maxCoeff();
  out.state.rho = detail::unvec(x, dim);
  return out;
}

inline constexpr double kStaticResidualTolerance = 1e-10;
inline constexpr double kFixedPointTolerance = 1e-9;

/// Non-equilibrium steady state of the full master equation.
inline FullStateResult steady_state_static(const ChainParams& params,
                                           const RangeSpec& range = {},
                                           const FullSolverOptions& options = {}) {
  params.validate(1);
  if (params.n_sites > kMaxMatrixFreeSites) {
    fail(ErrorCode::MemoryGuard,
         "full master equation limited to N <= " + std::to_string(kMaxMatrixFreeSites));
  }
  if (!params.bath.any_positive()) {
    fail(ErrorCode::NoUniqueSteadyState, "no unique steady state: all bath rates are zero");
  }
  const LindbladGenerator gen(params, range, true);
  const Eigen::Index dim = gen.dim();
  FullStateResult out;
  if (params.n_sites <= kMaxDenseSites && !options.force_matrix_free) {
    ComplexMatrix lv = gen.superoperator();
    if (options.spectral_gap) {
      const ComplexVector ev = Eigen::ComplexEigenSolver<ComplexMatrix>(lv, false).eigenvalues();
      std::vector<double> mags(static_cast<std::size_t>(ev.size()));
      for (Eigen::Index k = 0; k < ev.size(); ++k) mags[static_cast<std::size_t>(k)] = std::abs(ev(k));
      std::sort(mags.begin(), mags.end());
      out.gap = mags.size() > 1 ? mags[1] : 0.0;
      if (out.gap < kStabilityTolerance) {
        fail(ErrorCode::NoUniqueSteadyState,
             "non-unique steady state: zero eigenspace of the Liouvillian is degenerate");
      }
    }
    const ComplexVector x = detail::trace_normalized_null_vector(
        std::move(lv), dim, ErrorCode::NoUniqueSteadyState,
        "non-unique steady state: Liouvillian null space is degenerate");
    out.state.rho = detail::unvec(x, dim);
  } else {
    out.matrix_free = true;
    ComplexMatrix rho = ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim);
    auto apply = [&gen](const ComplexVector& v) { return gen.apply_vec(v); };
    ComplexVector v = detail::vec(rho);
    for (;;) {
      if (gen.apply(detail::unvec(v, dim)).cwiseAbs().maxCoeff() <= kStaticResidualTolerance) break;
      if (out.iterations >= options.max_iterations) {
        fail(ErrorCode::NotConverged, "long-time propagation did not reach the steady state");
      }
      v = detail::krylov_expv(apply, v, options.propagation_chunk, options.krylov_dim);
      v /= detail::unvec(v, dim).trace();
      ++out.iterations;
    }
    out.state.rho = detail::unvec(v, dim);
  }
  out.residual = gen.apply(out.state.rho).cwiseAbs().maxCoeff();
  if (out.residual > kStaticResidualTolerance) {
    fail(ErrorCode::NumericalInconsistency,
         "steady-state residual " + std::to_string(out.residual) + " above tolerance");
  }
  validate_density(out.state);
  return out;
}

/// State immediately after a kick in the asymptotic periodic regime.
inline FullStateResult floquet_steady_full(const ChainParams& params, const KickParams& kick,
                                           const RangeSpec& range = {},
                                           const FullSolverOptions& options = {}) {
  params.validate(1);
  require(kick.tau > 0 && std::isfinite(kick.tau), "tau must be positive");
  if (params.n_sites > kMaxMatrixFreeSites) {
    fail(ErrorCode::MemoryGuard,
         "full master equation limited to N <= " + std::to_string(kMaxMatrixFreeSites));
  }
  if (!params.bath.any_positive()) {
    fail(ErrorCode::NonUniqueFloquet, "non-unique Floquet state: all bath rates are zero");
  }
  const double a = fold_kick(kick.a);
  FullStateResult out;
  if (params.n_sites <= 5 && !options.force_matrix_free) {
    const Superoperator map = one_period_map(params, {a, kick.tau}, range, options.kick_order);
    out = floquet_fixed_point(map, params.n_sites, options.spectral_gap);
  } else {
    out.matrix_free = true;
    const LindbladGenerator gen(params, range, false);
    const Eigen::Index dim = gen.dim();
    const ComplexVector kick_diag = detail::kick_diagonal(params.n_sites, a);
    auto apply = [&gen](const ComplexVector& v) { return gen.apply_vec(v); };
    auto period = [&](const ComplexVector& v) {
      if (options.kick_order == KickOrder::FreeThenKick) {
        return ComplexVector(kick_diag.cwiseProduct(
            detail::krylov_expv(apply, v, kick.tau, options.krylov_dim)));
      }
      return detail::krylov_expv(apply, ComplexVector(kick_diag.cwiseProduct(v)), kick.tau,
                                 options.krylov_dim);
    };
    ComplexVector v = detail::vec(ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim));
    for (;;) {
      ComplexVector next = period(v);
      next /= detail::unvec(next, dim).trace();
      out.residual = (next - v).cwiseAbs().maxCoeff();
      v = std::move(next);
      ++out.iterations;
      if (out.residual <= 0.1 * kFixedPointTolerance) break;
      if (out.iterations >= options.max_iterations) {
        fail(ErrorCode::NotConverged, "power iteration did not converge after " +
                                          std::to_string(out.iterations) + " periods");
      }
    }
    out.residual = (period(v) - v).cwiseAbs().maxCoeff();
    out.state.rho = detail::unvec(v, dim);
  }
  if (out.residual > kFixedPointTolerance) {
    fail(ErrorCode::NumericalInconsistency,
         "Floquet fixed-point residual " + std::to_string(out.residual) + " above tolerance");
  }
  validate_density(out.state);
  return out;
}

struct LocalCorrelators {
  RealMatrix xx;
  RealMatrix xy;
  RealMatrix yy;
};

/// Two-site spin correlators tr(s^a_j s^b_k rho) for j != k. On the diagonal
/// xx and yy hold 1 and xy holds the real part of i<sz>, which is 0.
inline LocalCorrelators local_correlators(const DensityMatrix& state) {
  const int n = state.n_sites();
  LocalCorrelators out{RealMatrix::Identity(n, n), RealMatrix::Zero(n, n),
                       RealMatrix::Identity(n, n)};
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      if (j == k) continue;
      out.xx(j, k) = pauli_expectation(pauli_x(n, j) * pauli_x(n, k), state.rho).real();
      out.xy(j, k) = pauli_expectation(pauli_x(n, j) * pauli_y(n, k), state.rho).real();
      out.yy(j, k) = pauli_expectation(pauli_y(n, j) * pauli_y(n, k), state.rho).real();
    }
  }
  return out;
}

enum class LocalPairing {
  UpperTriangle,  // j < k with C^xy_jk only
  Symmetrized,    // both orders, so C^xy_kj (= C^yx_jk) also enters
};

/// Mean of (|C^xx| + |C^xy| + |C^yy|)/3 over site pairs with |j-k| >= N/2.
inline double local_residual(const RealMatrix& cxx, const RealMatrix& cxy, const RealMatrix& cyy,
                             int n_sites, LocalPairing pairing = LocalPairing::UpperTriangle) {
  require(cxx.rows() == n_sites && cxx.cols() == n_sites && cxy.rows() == n_sites &&
              cxy.cols() == n_sites && cyy.rows() == n_sites && cyy.cols() == n_sites,
          "local correlator matrices must be N x N");
  double total = 0.0;
  long count = 0;
  for (int j = 0; j < n_sites; ++j) {
    for (int k = 0; k < n_sites; ++k) {
      if (j == k) continue;
      if (pairing == LocalPairing::UpperTriangle && k < j) continue;
      if (std::abs(j - k) < n_sites / 2.0) continue;
      total += std::abs(cxx(j, k)) + std::abs(cxy(j, k)) + std::abs(cyy(j, k));
      count += 3;
    }
  }
  if (count == 0) fail(ErrorCode::InvalidArgument, "no site pairs admitted by the distance cut");
  return total / static_cast<double>(count);
}

inline double local_residual(const LocalCorrelators& lc, int n_sites,
                             LocalPairing pairing = LocalPairing::UpperTriangle) {
  return local_residual(lc.xx, lc.xy, lc.yy, n_sites, pairing);
}

/// C_jk = tr(w_j w_k rho) - delta_jk with the full Jordan-Wigner strings.
inline CorrelationMatrix majorana_correlations_full(const DensityMatrix& state) {
  const int n = state.n_sites();
  require(n <= kMaxMatrixFreeSites, "Majorana correlations limited to N <= 10");
  std::vector<PauliString> w;
  for (int j = 0; j < 2 * n; ++j) w.push_back(majorana_string(n, j));
  ComplexMatrix c = ComplexMatrix::Zero(2 * n, 2 * n);
  for (int j = 0; j < 2 * n; ++j) {
    for (int k = j + 1; k < 2 * n; ++k) {
      const cplx v = pauli_expectation(w[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(k)],
                                       state.rho);
      c(j, k) = v;
      c(k, j) = -v;  // w_k w_j = -w_j w_k
    }
  }
  return {std::move(c)};
}

}  // namespace xychain
