#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "xychain/pipelines.hpp"

using namespace xychain;

namespace {

constexpr double kPi = std::numbers::pi;

ChainParams chain(int n, double gamma, double h = 0.0) {
  ChainParams p;
  p.n_sites = n;
  p.gamma = gamma;
  p.h = h;
  return p;
}

oracle::CMat oracle_liouvillian(const ChainParams& p, bool field) {
  const auto& b = p.bath;
  return oracle::liouvillian(oracle::xy_hamiltonian(p.n_sites, p.gamma, p.h, field),
                             oracle::jumps(p.n_sites, b.gamma_1L, b.gamma_2L, b.gamma_1R, b.gamma_2R));
}

// Majorana correlations of the state left just after a kick by the full
// master-equation evolution over many periods.
oracle::CMat oracle_floquet(const ChainParams& p, const KickParams& kick) {
  const oracle::CMat free = oracle::scaled_taylor_exp(oracle::CMat(kick.tau * oracle_liouvillian(p, false)));
  const oracle::CMat map = oracle::conjugation(oracle::kick_unitary(p.n_sites, kick.a)) * free;
  return oracle::majorana_correlations(p.n_sites, oracle::fixed_state(map, 1.0));
}

double residual_of(const ChainParams& p, double a, double tau) {
  return residual_correlation(kicked_floquet(p, {a, tau}), p.n_sites);
}

}  // namespace

TEST(KickMap, ZeroIsIdentity) {
  EXPECT_EQ(kick_map(3, 0.0).k, RealMatrix::Identity(6, 6));
}

TEST(KickMap, MatchesFullSpaceConjugation) {
  for (int n : {1, 3}) {
    for (double a : {kPi / 4, 0.37, 1.25, -0.8}) {
      const RealMatrix k = kick_map(n, a).k;
      const oracle::CMat u = oracle::kick_unitary(n, a);
      for (int j = 0; j < 2 * n; ++j) {
        oracle::CMat combo = oracle::CMat::Zero(1 << n, 1 << n);
        for (int l = 0; l < 2 * n; ++l) combo += k(j, l) * oracle::majorana(n, l);
        const oracle::CMat heis = u.adjoint() * oracle::majorana(n, j) * u;
        EXPECT_LT(oracle::max_abs(heis - combo), 1e-12) << "n=" << n << " a=" << a << " j=" << j;
      }
    }
  }
}

TEST(KickMap, QuarterTurnSendsXToY) {
  // a = pi/4 rotates sigma^x of a single site onto -sigma^y in the Heisenberg picture
  const RealMatrix k = kick_map(1, kPi / 4).k;
  EXPECT_NEAR(k(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(k(0, 1)), 1.0, 1e-15);
}

TEST(KickMap, StateUpdateActsAsCongruence) {
  // C(U rho U^dag) = k C(rho) k^T for an arbitrary density matrix
  std::mt19937 rng(21);
  std::normal_distribution<double> g;
  const int n = 3;
  oracle::CMat a(8, 8);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = {g(rng), g(rng)};
  oracle::CMat rho = a * a.adjoint();
  rho /= rho.trace();
  const double kick = 0.61;
  const oracle::CMat u = oracle::kick_unitary(n, kick);
  const RealMatrix k = kick_map(n, kick).k;
  const oracle::CMat before = oracle::majorana_correlations(n, rho);
  const oracle::CMat after = oracle::majorana_correlations(n, u * rho * u.adjoint());
  EXPECT_LT(oracle::max_abs(after - k.cast<cplx>() * before * k.transpose().cast<cplx>()), 1e-12);
}

TEST(KickMap, OrthogonalAndHalfPeriodAntiperiodic) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = u(rng);
    const int n = 2 + trial % 5;
    const RealMatrix k = kick_map(n, a).k;
    EXPECT_LT((k * k.transpose() - RealMatrix::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((kick_map(n, a + kPi / 2).k + k).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(StaticNess, SmallestChainIsPhysical) {
  ChainParams p = chain(2, 0.0, 0.0);
  p.bath = {0.4, 0.4, 0.4, 0.4};
  const CovarianceResult r = static_ness_detailed(p);
  EXPECT_LE(r.residual, 1e-10);
  EXPECT_EQ((r.corr.c + r.corr.c.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.corr.c.real().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.corr.c.diagonal().cwiseAbs().maxCoeff(), 0.0);
}

TEST(StaticNess, MatchesMasterEquation) {
  const ChainParams p = chain(4, 0.5, 0.75);
  const oracle::CMat rho = oracle::fixed_state(oracle_liouvillian(p, true), 0.0);
  const oracle::CMat ref = oracle::majorana_correlations(4, rho);
  const CorrelationMatrix c = static_ness(p);
  EXPECT_LT(oracle::max_abs(c.c - ref), 1e-6);
  EXPECT_GT(oracle::max_abs(ref), 1e-3);  // not a trivially vanishing comparison
}

TEST(StaticNess, MatchesMasterEquationForRandomRates) {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(0.05, 1.0), f(-1.5, 1.5);
  for (int n = 2; n <= 4; ++n) {
    ChainParams p = chain(n, u(rng), f(rng));
    p.bath = {u(rng), u(rng), u(rng), u(rng)};
    const oracle::CMat rho = oracle::fixed_state(oracle_liouvillian(p, true), 0.0);
    EXPECT_LT(oracle::max_abs(static_ness(p).c - oracle::majorana_correlations(n, rho)), 1e-6)
        << "n=" << n;
  }
}

TEST(StaticNess, SchurAgreesWithKronecker) {
  const ChainParams p = chain(8, 0.3, 0.4);
  const CorrelationMatrix a = static_ness(p, {LyapunovMethod::Kronecker});
  const CorrelationMatrix b = static_ness(p, {LyapunovMethod::Schur});
  EXPECT_LT((a.c - b.c).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(KickedFloquet, VanishingKickIsStaticChain) {
  const ChainParams p = chain(5, 0.3, 0.0);
  for (double tau : {0.2, 0.9, 2.5}) {
    const CorrelationMatrix kicked = kicked_floquet(p, {0.0, tau});
    EXPECT_LT((kicked.c - static_ness(p).c).cwiseAbs().maxCoeff(), 1e-8) << tau;
  }
}

TEST(KickedFloquet, MatchesMasterEquation) {
  const ChainParams p = chain(4, 0.1);
  for (KickParams kick : {KickParams{1.25, 0.4}, KickParams{0.5, 0.4}}) {
    const oracle::CMat ref = oracle_floquet(p, kick);
    const CovarianceResult r = kicked_floquet_detailed(p, kick);
    EXPECT_LE(r.residual, 1e-10);
    EXPECT_LT(oracle::max_abs(r.corr.c - ref), 1e-6) << "a=" << kick.a;
  }
}

TEST(KickedFloquet, KickOrderIsAConjugation) {
  const ChainParams p = chain(5, 0.2);
  const KickParams kick{0.7, 0.55};
  const CorrelationMatrix after = kicked_floquet(p, kick, {LyapunovMethod::Kronecker, KickOrder::FreeThenKick});
  const CorrelationMatrix before = kicked_floquet(p, kick, {LyapunovMethod::Kronecker, KickOrder::KickThenFree});
  const ComplexMatrix k = kick_map(5, kick.a).k.cast<cplx>();
  EXPECT_LT((after.c - k * before.c * k.transpose()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(KickedFloquet, SchurAgreesWithKronecker) {
  const ChainParams p = chain(6, 0.1);
  const CorrelationMatrix a = kicked_floquet(p, {1.1, 0.8}, {LyapunovMethod::Kronecker});
  const CorrelationMatrix b = kicked_floquet(p, {1.1, 0.8}, {LyapunovMethod::Schur});
  EXPECT_LT((a.c - b.c).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(KickedFloquet, PeriodicityAndReflection) {
  const ChainParams p = chain(5, 0.1);
  for (double a : {0.1, 0.45, 0.7, 1.3}) {
    for (double tau : {0.3, 1.1, 2.7}) {
      const double base = residual_of(p, a, tau);
      EXPECT_LE(std::abs(base - residual_of(p, a + kPi / 2, tau)), 1e-8);
      EXPECT_LE(std::abs(base - residual_of(p, kPi / 2 - a, tau)), 1e-8);
    }
  }
}

TEST(KickedFloquet, ReportsConditionNumber) {
  const CovarianceResult r = kicked_floquet_detailed(chain(4, 0.1), {0.4, 1.0});
  EXPECT_GE(r.q_condition, 1.0);
  EXPECT_TRUE(std::isfinite(r.q_condition));
}

TEST(KickedFloquet, RejectsBadInputs) {
  ChainParams p = chain(4, 0.1);
  EXPECT_THROW(kicked_floquet(p, {0.3, 0.0}), Error);
  p.bath = {0, 0, 0, 0};
  try {
    kicked_floquet(p, {0.3, 1.0});
    FAIL() << "expected failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoUniqueSteadyState);
  }
}

TEST(KickedFloquet, SevenSiteCutRisesOntoPlateau) {
  // a = 1.25, gamma = 0.1: C_res climbs by orders of magnitude up to tau ~ 0.4,
  // where the bulk stationary-point count first changes, and is flat afterwards.
  const ChainParams p = chain(7, 0.1);
  const double start = residual_of(p, 1.25, 0.1);
  const double knee = residual_of(p, 1.25, 0.4);
  EXPECT_GE(std::log10(knee / start), 3.0);
  for (double tau = 0.5; tau <= 2.0; tau += 0.1)
    EXPECT_LT(std::abs(std::log10(residual_of(p, 1.25, tau) / knee)), 0.3) << tau;
}
