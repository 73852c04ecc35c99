#pragma once

// Dense kernels: matrix exponential, continuous and discrete Lyapunov solvers,
// and the one-period propagator of the covariance equation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "xychain/model_core.hpp"
#include "xychain/types.hpp"

namespace xychain {

namespace detail {

template <typename Mat>
double one_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

// Pade numerator/denominator pieces for degrees 3, 5, 7, 9 (Higham 2005).
template <typename Mat>
void pade_low(const Mat& a, int degree, Mat& u, Mat& v) {
  static constexpr double b3[] = {120., 60., 12., 1.};
  static constexpr double b5[] = {30240., 15120., 3360., 420., 30., 1.};
  static constexpr double b7[] = {17297280., 8648640., 1995840., 277200.,
                                  25200.,    1512.,    56.,      1.};
  static constexpr double b9[] = {17643225600., 8821612800., 2075673600., 302702400.,
                                  30270240.,    2162160.,    110880.,     3960.,
                                  90.,          1.};
  const double* b = degree == 3 ? b3 : degree == 5 ? b5 : degree == 7 ? b7 : b9;
  const Eigen::Index n = a.rows();
  const Mat id = Mat::Identity(n, n);
  const Mat a2 = a * a;
  Mat odd = b[1] * id;
  Mat even = b[0] * id;
  Mat power = id;
  for (int k = 2; k <= degree; k += 2) {
    power = power * a2;
    odd += b[k + 1] * power;
    even += b[k] * power;
  }
  u.noalias() = a * odd;
  v = std::move(even);
}

template <typename Mat>
void pade13(const Mat& a, Mat& u, Mat& v) {
  static constexpr double b[] = {64764752532480000., 32382376266240000., 7771770303897600.,
                                 1187353796428800.,  129060195264000.,   10559470521600.,
                                 670442572800.,      33522128640.,       1323241920.,
                                 40840800.,          960960.,            16380.,
                                 182.,               1.};
  const Eigen::Index n = a.rows();
  const Mat id = Mat::Identity(n, n);
  const Mat a2 = a * a;
  const Mat a4 = a2 * a2;
  const Mat a6 = a4 * a2;
  Mat tmp = b[13] * a6 + b[11] * a4 + b[9] * a2;
  Mat inner = a6 * tmp;
  inner += b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
  u.noalias() = a * inner;
  tmp = b[12] * a6 + b[10] * a4 + b[8] * a2;
  v.noalias() = a6 * tmp;
  v += b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
}

}  // namespace detail

/// exp(a) by scaling and squaring around a diagonal Pade approximant, with the
/// degree chosen from the 1-norm as in Higham, SIAM J. Matrix Anal. Appl. 26 (2005).
template <typename Derived>
typename Derived::PlainObject matrix_exp(const Eigen::MatrixBase<Derived>& input) {
  using Mat = typename Derived::PlainObject;
  require(input.rows() == input.cols(), "matrix_exp requires a square matrix");
  Mat a = input;
  require(a.allFinite(), "matrix_exp requires finite entries");
  const Eigen::Index n = a.rows();
  if (n == 0) return a;

  static constexpr double theta[] = {1.495585217958292e-2, 2.539398330063230e-1,
                                     9.504178996162932e-1, 2.097847961257068e0};
  static constexpr int degrees[] = {3, 5, 7, 9};
  static constexpr double theta13 = 5.371920351148152e0;

  const double norm = detail::one_norm(a);
  Mat u(n, n), v(n, n);
  int squarings = 0;
  bool done = false;
  for (int i = 0; i < 4 && !done; ++i) {
    if (norm <= theta[i]) {
      detail::pade_low(a, degrees[i], u, v);
      done = true;
    }
  }
  if (!done) {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta13))));
    a /= std::ldexp(1.0, squarings);
    detail::pade13(a, u, v);
  }
  Mat result = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) result = result * result;
  return result;
}

inline constexpr double kStabilityTolerance = 1e-10;
inline constexpr double kLyapunovResidualTolerance = 1e-10;

enum class LyapunovMethod {
  Kronecker,  // dense (2N)^2 linear system
  Schur,      // Bartels-Stewart style back substitution on a complex Schur form
};

namespace detail {

inline std::string format_eigenvalue(cplx z) {
  std::ostringstream os;
  os.precision(6);
  os << "(" << z.real() << (z.imag() < 0 ? " - " : " + ") << std::abs(z.imag()) << "i)";
  return os.str();
}

inline RealMatrix antisymmetric_part(const RealMatrix& a) {
  return 0.5 * (a - a.transpose());
}

// Solves X C + C X^T = R for real X, R.
inline RealMatrix continuous_kronecker(const RealMatrix& x, const RealMatrix& r) {
  const Eigen::Index n = x.rows();
  const RealMatrix id = RealMatrix::Identity(n, n);
  RealMatrix system = RealMatrix::Zero(n * n, n * n);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (Eigen::Index q = 0; q < n; ++q) {
      // block (p, q) of I (x) X + X (x) I
      auto block = system.block(p * n, q * n, n, n);
      if (p == q) block += x;
      block += x(p, q) * id;
    }
  }
  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(r.data(), n * n);
  Eigen::VectorXd sol = system.partialPivLu().solve(rhs);
  return Eigen::Map<RealMatrix>(sol.data(), n, n);
}

inline ComplexMatrix discrete_kronecker(const RealMatrix& q, const ComplexMatrix& r) {
  const Eigen::Index n = q.rows();
  RealMatrix system(n * n, n * n);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (Eigen::Index s = 0; s < n; ++s) {
      system.block(p * n, s * n, n, n) = q(p, s) * q;
    }
  }
  system -= RealMatrix::Identity(n * n, n * n);
  const Eigen::PartialPivLU<RealMatrix> lu(system);
  const RealMatrix re = r.real();
  const RealMatrix im = r.imag();
  Eigen::VectorXd sol_re = lu.solve(Eigen::Map<const Eigen::VectorXd>(re.data(), n * n));
  Eigen::VectorXd sol_im = lu.solve(Eigen::Map<const Eigen::VectorXd>(im.data(), n * n));
  ComplexMatrix out(n, n);
  out.real() = Eigen::Map<RealMatrix>(sol_re.data(), n, n);
  out.imag() = Eigen::Map<RealMatrix>(sol_im.data(), n, n);
  return out;
}

inline ComplexMatrix continuous_schur(const RealMatrix& x, const ComplexMatrix& r) {
  const Eigen::Index n = x.rows();
  const Eigen::ComplexSchur<ComplexMatrix> schur(x.cast<cplx>());
  const ComplexMatrix& t = schur.matrixT();
  const ComplexMatrix& u = schur.matrixU();
  const ComplexMatrix rt = u.adjoint() * r * u.conjugate();
  ComplexMatrix ct = ComplexMatrix::Zero(n, n);
  ComplexMatrix shifted(n, n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    ComplexVector rhs = rt.col(j);
    for (Eigen::Index k = j + 1; k < n; ++k) rhs -= t(j, k) * ct.col(k);
    shifted = t;
    shifted.diagonal().array() += t(j, j);
    ct.col(j) = shifted.triangularView<Eigen::Upper>().solve(rhs);
  }
  return u * ct * u.transpose();
}

inline ComplexMatrix discrete_schur(const RealMatrix& q, const ComplexMatrix& r) {
  const Eigen::Index n = q.rows();
  const Eigen::ComplexSchur<ComplexMatrix> schur(q.cast<cplx>());
  const ComplexMatrix& t = schur.matrixT();
  const ComplexMatrix& u = schur.matrixU();
  const ComplexMatrix rt = u.adjoint() * r * u.conjugate();
  ComplexMatrix ct = ComplexMatrix::Zero(n, n);
  ComplexMatrix shifted(n, n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    ComplexVector acc = ComplexVector::Zero(n);
    for (Eigen::Index k = j + 1; k < n; ++k) acc += t(j, k) * ct.col(k);
    ComplexVector rhs = rt.col(j);
    rhs.noalias() -= t.triangularView<Eigen::Upper>() * acc;
    shifted = t(j, j) * t;
    shifted.diagonal().array() -= 1.0;
    ct.col(j) = shifted.triangularView<Eigen::Upper>().solve(rhs);
  }
  return u * ct * u.transpose();
}

}  // namespace detail

/// max |X C + C X^T - iY|
inline double continuous_residual(const RealMatrix& x, const RealMatrix& y,
                                  const CorrelationMatrix& corr) {
  const ComplexMatrix xc = x.cast<cplx>();
  return (xc * corr.c + corr.c * xc.transpose() - I_unit * y.cast<cplx>())
      .cwiseAbs()
      .maxCoeff();
}

/// max |Q C Q^T - C - R|
inline double discrete_residual(const RealMatrix& q, const ComplexMatrix& r,
                                const CorrelationMatrix& corr) {
  const ComplexMatrix qc = q.cast<cplx>();
  return (qc * corr.c * qc.transpose() - corr.c - r).cwiseAbs().maxCoeff();
}

/// Stationary covariance: solves X C + C X^T = iY. Requires every eigenvalue of
/// X to have real part above kStabilityTolerance.
inline CorrelationMatrix solve_continuous_lyapunov(
    const RealMatrix& x, const RealMatrix& y,
    LyapunovMethod method = LyapunovMethod::Kronecker) {
  require(x.rows() == x.cols(), "X must be square");
  require(y.rows() == x.rows() && y.cols() == x.cols(), "X and Y dimensions differ");
  const Eigen::VectorXcd eig = Eigen::EigenSolver<RealMatrix>(x, false).eigenvalues();
  for (Eigen::Index k = 0; k < eig.size(); ++k) {
    if (eig(k).real() <= kStabilityTolerance) {
      fail(ErrorCode::NoUniqueSteadyState,
           "no unique NESS: eigenvalue " + detail::format_eigenvalue(eig(k)) +
               " of X has real part <= " + std::to_string(kStabilityTolerance));
    }
  }
  RealMatrix c_imag;
  if (method == LyapunovMethod::Kronecker) {
    c_imag = detail::continuous_kronecker(x, y);
  } else {
    c_imag = detail::continuous_schur(x, y.cast<cplx>()).real();
  }
  return {I_unit * detail::antisymmetric_part(c_imag).cast<cplx>()};
}

/// Floquet covariance: solves Q C Q^T - C = R. Fails when two eigenvalues of Q
/// multiply to 1, where the fixed point is not unique.
inline CorrelationMatrix solve_discrete_lyapunov(
    const RealMatrix& q, const ComplexMatrix& r,
    LyapunovMethod method = LyapunovMethod::Kronecker) {
  require(q.rows() == q.cols(), "Q must be square");
  require(r.rows() == q.rows() && r.cols() == q.cols(), "Q and R dimensions differ");
  const Eigen::VectorXcd eig = Eigen::EigenSolver<RealMatrix>(q, false).eigenvalues();
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    for (Eigen::Index j = i; j < eig.size(); ++j) {
      if (std::abs(eig(i) * eig(j) - 1.0) <= kStabilityTolerance) {
        fail(ErrorCode::Resonance,
             "non-unique Floquet fixed point: eigenvalues " +
                 detail::format_eigenvalue(eig(i)) + " and " +
                 detail::format_eigenvalue(eig(j)) + " of Q multiply to 1");
      }
    }
  }
  if (method == LyapunovMethod::Kronecker) return {detail::discrete_kronecker(q, r)};
  return {detail::discrete_schur(q, r)};
}

struct PeriodPropagator {
  RealMatrix q;
  RealMatrix p;
  double q_condition = 1.0;  // 2-norm condition number of q
};

/// Q(tau) = exp(-X tau) and P(tau) = -int_0^tau exp(-X(tau-s)) Y exp(X^T s) ds,
/// read off one exponential of the block matrix [[-X, -Y], [0, X^T]] tau.
inline PeriodPropagator propagate_period(const RealMatrix& x0, const RealMatrix& y,
                                         double tau) {
  require(tau > 0 && std::isfinite(tau), "tau must be positive");
  require(x0.rows() == x0.cols() && y.rows() == x0.rows() && y.cols() == x0.cols(),
          "X and Y must be square and of equal size");
  const Eigen::Index n = x0.rows();
  RealMatrix aug = RealMatrix::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = -x0 * tau;
  aug.topRightCorner(n, n) = -y * tau;
  aug.bottomRightCorner(n, n) = x0.transpose() * tau;
  const RealMatrix e = matrix_exp(aug);
  PeriodPropagator out;
  out.q = e.topLeftCorner(n, n);
  out.p = e.topRightCorner(n, n);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<RealMatrix>(out.q).singularValues();
  out.q_condition = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1)
                                          : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace xychain
