#pragma once

// Majorana-representation building blocks of the boundary-driven XY chain.
//
// Index conventions (0-based): Majorana operator w[2s] = sx_s * prod_{s'<s} sz_s'
// and w[2s+1] = sy_s * prod_{s'<s} sz_s'. A Hamiltonian is stored as the
// imaginary antisymmetric matrix hm with H = sum_{jk} w_j hm_{jk} w_k.

#include <array>
#include <cmath>
#include <string>

#include "xychain/types.hpp"

namespace xychain {

struct QuadraticForm {
  ComplexMatrix matrix;

  Eigen::Index dim() const { return matrix.rows(); }
};

struct BathVectors {
  std::array<ComplexVector, 4> vectors;
};

struct StructureMatrices {
  RealMatrix x;
  RealMatrix y;
};

struct CorrelationMatrix {
  ComplexMatrix c;

  Eigen::Index dim() const { return c.rows(); }
};

namespace detail {

// Adds coeff * w_a w_b (a != b) to the antisymmetric form.
inline void add_bilinear(ComplexMatrix& hm, Eigen::Index a, Eigen::Index b,
                         cplx coeff) {
  hm(a, b) += 0.5 * coeff;
  hm(b, a) -= 0.5 * coeff;
}

}  // namespace detail

/// XY exchange Hamiltonian, optionally with the transverse field term.
///
/// Under the Jordan-Wigner map the nearest-neighbour terms become
///   sx_s sx_{s+1} = -i w[2s+1] w[2s+2],   sy_s sy_{s+1} = i w[2s] w[2s+3],
/// and the field term sz_s = -i w[2s] w[2s+1].
inline QuadraticForm build_xy_form(const ChainParams& params, bool include_field) {
  params.validate(2);
  const int n = params.n_sites;
  const double jx = (1.0 + params.gamma) / 2.0;
  const double jy = (1.0 - params.gamma) / 2.0;
  ComplexMatrix hm = ComplexMatrix::Zero(2 * n, 2 * n);
  for (int s = 0; s + 1 < n; ++s) {
    detail::add_bilinear(hm, 2 * s + 1, 2 * s + 2, -I_unit * jx);
    detail::add_bilinear(hm, 2 * s, 2 * s + 3, I_unit * jy);
  }
  if (include_field) {
    for (int s = 0; s < n; ++s) {
      detail::add_bilinear(hm, 2 * s, 2 * s + 1, -I_unit * params.h);
    }
  }
  return {std::move(hm)};
}

/// Unit-strength form of sum_s sz_s.
inline QuadraticForm build_kick_form(int n_sites) {
  require(n_sites >= 1, "n_sites must be >= 1");
  ComplexMatrix hm = ComplexMatrix::Zero(2 * n_sites, 2 * n_sites);
  for (int s = 0; s < n_sites; ++s) {
    detail::add_bilinear(hm, 2 * s, 2 * s + 1, -I_unit);
  }
  return {std::move(hm)};
}

/// Linear forms of the four end-site jump operators.
///
/// s+ = (w0 + i w1)/2 on the left edge. On the right edge the Jordan-Wigner
/// string is dropped: it equals (total parity) * sz_N, and the total parity
/// cancels from the dissipator's action on every even observable, so the
/// covariance dynamics is unchanged.
inline BathVectors build_bath_vectors(const ChainParams& params) {
  params.validate(1);
  const Eigen::Index dim = 2 * params.n_sites;
  const BathRates& b = params.bath;
  auto edge = [dim](Eigen::Index first, double rate, double sign) {
    ComplexVector v = ComplexVector::Zero(dim);
    const double amp = std::sqrt(rate) / 2.0;
    v(first) = amp;
    v(first + 1) = sign * I_unit * amp;
    return v;
  };
  BathVectors out;
  out.vectors[0] = edge(0, b.gamma_1L, +1.0);
  out.vectors[1] = edge(0, b.gamma_2L, -1.0);
  out.vectors[2] = edge(dim - 2, b.gamma_1R, +1.0);
  out.vectors[3] = edge(dim - 2, b.gamma_2R, -1.0);
  return out;
}

inline constexpr double kRealStorageCutoff = 1e-14;

/// X = 4 (i hm + Mr), Y = 4 (Mi - Mi^T) with M_{jk} = sum_mu conj(l_mu,j) l_mu,k.
///
/// The conjugate sits on the row index: with this ordering the covariance
/// equation dC/dt = -XC - CX^T + iY reproduces the master equation with the
/// 2 L rho L^dag - {L^dag L, rho} dissipator.
inline StructureMatrices assemble_structure(const QuadraticForm& h_form,
                                            const BathVectors& baths) {
  const Eigen::Index dim = h_form.dim();
  require(h_form.matrix.cols() == dim, "quadratic form must be square");
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  for (const auto& l : baths.vectors) {
    require(l.size() == dim, "bath vector length " + std::to_string(l.size()) +
                                 " does not match form dimension " +
                                 std::to_string(dim));
    m += l.conjugate() * l.transpose();
  }
  const ComplexMatrix xc = 4.0 * (I_unit * h_form.matrix + m.real().cast<cplx>());
  const RealMatrix mi = m.imag();

  auto truncate = [](RealMatrix a) {
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      if (std::abs(a.data()[k]) < kRealStorageCutoff) a.data()[k] = 0.0;
    }
    return a;
  };
  const double residue = xc.imag().cwiseAbs().maxCoeff();
  if (residue > kRealStorageCutoff) {
    fail(ErrorCode::NumericalInconsistency,
         "structure matrix X has imaginary residue " + std::to_string(residue) +
             "; the quadratic form is not purely imaginary");
  }
  return {truncate(xc.real()), truncate(4.0 * (mi - mi.transpose()))};
}

inline int majorana_site(Eigen::Index j) { return static_cast<int>(j / 2); }

inline bool admits_pair(Eigen::Index j, Eigen::Index k, int n_sites,
                        DistanceConvention convention) {
  if (convention == DistanceConvention::Site) {
    return std::abs(majorana_site(j) - majorana_site(k)) >= n_sites / 2.0;
  }
  return std::abs(static_cast<double>(j - k)) >= n_sites;
}

/// Mean |C_jk| over the well-separated index pairs (ordered pairs; the value is
/// the same either way since |C_jk| = |C_kj|).
inline double residual_correlation(const CorrelationMatrix& corr, int n_sites,
                                   DistanceConvention convention = DistanceConvention::Site) {
  const Eigen::Index dim = 2 * n_sites;
  require(corr.c.rows() == dim && corr.c.cols() == dim,
          "correlation matrix must be 2N x 2N");
  double total = 0.0;
  long count = 0;
  for (Eigen::Index j = 0; j < dim; ++j) {
    for (Eigen::Index k = 0; k < dim; ++k) {
      if (!admits_pair(j, k, n_sites, convention)) continue;
      total += std::abs(corr.c(j, k));
      ++count;
    }
  }
  if (count == 0) {
    fail(ErrorCode::InvalidArgument, "no index pairs admitted by the distance cut");
  }
  return total / static_cast<double>(count);
}

}  // namespace xychain
