#pragma once

// Pauli strings on N qubits in the binary symplectic form
//   P = i^phase * X^xmask * Z^zmask        (Z applied first).
// Site s lives on bit (N - 1 - s), so site 0 is the leftmost tensor factor and
// bit value 0 is spin up (sz = +1).

#include <bit>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "xychain/types.hpp"

namespace xychain {

using SparseComplex = Eigen::SparseMatrix<cplx>;

struct PauliString {
  std::uint64_t xmask = 0;
  std::uint64_t zmask = 0;
  int phase = 0;  // power of i, kept mod 4

  friend PauliString operator*(const PauliString& lhs, const PauliString& rhs) {
    const int swaps = std::popcount(lhs.zmask & rhs.xmask);
    return {lhs.xmask ^ rhs.xmask, lhs.zmask ^ rhs.zmask,
            (lhs.phase + rhs.phase + 2 * swaps) & 3};
  }

  cplx prefactor() const {
    static constexpr cplx powers[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    return powers[phase & 3];
  }

  /// P|col> = amplitude(col) |col ^ xmask>
  cplx amplitude(std::uint64_t col) const {
    return (std::popcount(col & zmask) & 1) ? -prefactor() : prefactor();
  }
};

inline std::uint64_t site_bit(int n_sites, int site) {
  return std::uint64_t{1} << (n_sites - 1 - site);
}

inline PauliString pauli_x(int n, int s) { return {site_bit(n, s), 0, 0}; }
inline PauliString pauli_z(int n, int s) { return {0, site_bit(n, s), 0}; }
inline PauliString pauli_y(int n, int s) { return {site_bit(n, s), site_bit(n, s), 1}; }

/// Jordan-Wigner Majorana operator w_j (0-based): sx or sy on site j/2 with a
/// sz string on every site to its left.
inline PauliString majorana_string(int n_sites, int j) {
  const int site = j / 2;
  PauliString out = (j % 2 == 0) ? pauli_x(n_sites, site) : pauli_y(n_sites, site);
  for (int s = 0; s < site; ++s) out = out * pauli_z(n_sites, s);
  return out;
}

/// tr(P rho) = sum_c <c ^ x| ... = sum_c amplitude(c) rho(c, c ^ x)
inline cplx pauli_expectation(const PauliString& p, const ComplexMatrix& rho) {
  cplx acc{0.0, 0.0};
  const auto dim = static_cast<std::uint64_t>(rho.rows());
  for (std::uint64_t c = 0; c < dim; ++c) {
    acc += p.amplitude(c) * rho(static_cast<Eigen::Index>(c),
                                static_cast<Eigen::Index>(c ^ p.xmask));
  }
  return acc;
}

struct PauliTerm {
  cplx coeff;
  PauliString string;
};

inline SparseComplex pauli_sum_matrix(int n_sites, const std::vector<PauliTerm>& terms) {
  const std::uint64_t dim = std::uint64_t{1} << n_sites;
  std::vector<Eigen::Triplet<cplx>> triplets;
  triplets.reserve(terms.size() * dim);
  for (const auto& term : terms) {
    for (std::uint64_t c = 0; c < dim; ++c) {
      triplets.emplace_back(static_cast<int>(c ^ term.string.xmask), static_cast<int>(c),
                            term.coeff * term.string.amplitude(c));
    }
  }
  SparseComplex out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.prune(cplx{0.0, 0.0});
  return out;
}

}  // namespace xychain
