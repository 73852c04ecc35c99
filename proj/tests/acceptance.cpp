// End-to-end acceptance runs. Each criterion prints one PASS/FAIL line with the
// measured numbers; the exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "xychain/sweep.hpp"

using namespace xychain;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

ChainParams chain(int n, double gamma, double h = 0.0) {
  ChainParams p;
  p.n_sites = n;
  p.gamma = gamma;
  p.h = h;
  return p;
}

oracle::CMat oracle_generator(const ChainParams& p, bool field) {
  const auto& b = p.bath;
  return oracle::liouvillian(oracle::xy_hamiltonian(p.n_sites, p.gamma, p.h, field),
                             oracle::jumps(p.n_sites, b.gamma_1L, b.gamma_2L, b.gamma_1R, b.gamma_2R));
}

double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

// log10 steps between neighbouring cells of a row-major n1 x n2 grid; an edge
// is a jump cell when the step is at least one decade
std::set<std::pair<int, int>> jump_edges(const std::vector<double>& v, int n1, int n2) {
  std::set<std::pair<int, int>> out;
  auto at = [&](int i, int j) { return std::log10(v[static_cast<std::size_t>(i * n2 + j)]); };
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      if (j + 1 < n2 && std::abs(at(i, j + 1) - at(i, j)) >= 1.0) out.insert({i * n2 + j, i * n2 + j + 1});
      if (i + 1 < n1 && std::abs(at(i + 1, j) - at(i, j)) >= 1.0) out.insert({i * n2 + j, (i + 1) * n2 + j});
    }
  }
  return out;
}

SweepConfig full_grid(const RangeSpec& range, Observable obs) {
  SweepConfig c;
  c.model = Model::KickedFull;
  c.chain = chain(5, 0.1);
  c.range = range;
  c.observable = obs;
  c.a_axis = {0.5 * (kPi / 2) / 12, 11.5 * (kPi / 2) / 12, 12};  // closed under a -> pi/2 - a
  c.tau_axis = {0.1, 4.0, 12};
  return c;
}

std::vector<double> values_of(const SweepDataset& ds, const std::string& observable) {
  std::vector<double> out;
  for (const auto& r : ds.records) {
    if (r.observable != observable) continue;
    if (!r.value) fail(ErrorCode::NumericalInconsistency, "masked cell " + r.status);
    out.push_back(*r.value);
  }
  return out;
}

double reflection_asymmetry(const std::vector<double>& v, int n1, int n2) {
  double worst = 0.0;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j)
      worst = std::max(worst, std::abs(v[static_cast<std::size_t>(i * n2 + j)] -
                                       v[static_cast<std::size_t>((n1 - 1 - i) * n2 + j)]));
  return worst;
}

Outcome static_critical_line() {
  std::string detail;
  bool pass = true;
  for (double g : {0.2, 0.4, 0.6, 0.8}) {
    ChainParams p = chain(17, g);
    std::vector<double> lc;
    for (int i = 0; i <= 75; ++i) {
      p.h = 0.02 * i;
      lc.push_back(std::log10(residual_correlation(static_ness(p), 17)));
    }
    int best = 0;
    for (int i = 1; i < 75; ++i)
      if (lc[i + 1] - lc[i] < lc[best + 1] - lc[best]) best = i;
    const double h_star = 0.02 * best + 0.01;
    const double hc = 1 - g * g;
    pass = pass && std::abs(h_star - hc) <= 0.1;
    detail += format("g=%.1f steepest h=%.2f vs %.2f; ", g, h_star, hc);
  }
  return {pass, detail};
}

Outcome static_oracle() {
  const ChainParams p = chain(4, 0.5, 0.75);
  const oracle::CMat ref = oracle::majorana_correlations(4, oracle::fixed_state(oracle_generator(p, true), 0.0));
  const double err = max_abs(static_ness(p).c - ref);
  return {err <= 1e-6, format("max entry error %.2e", err)};
}

Outcome kicked_oracle() {
  const ChainParams p = chain(4, 0.1);
  // one eigen-decomposition of the free generator serves every tau
  const oracle::CMat gen = oracle_generator(p, false);
  Eigen::ComplexEigenSolver<oracle::CMat> es(gen);
  const oracle::CMat v = es.eigenvectors();
  const oracle::CMat vinv = v.inverse();
  const double recon = max_abs(v * es.eigenvalues().asDiagonal() * vinv - gen);

  std::mt19937 rng(20240611);
  std::uniform_real_distribution<double> ua(std::nextafter(0.0, 1.0), kPi / 4);
  std::uniform_real_distribution<double> ut(std::nextafter(0.1, 1.0), 2.0);
  double worst = 0.0;
  for (int draw = 0; draw < 10; ++draw) {
    const KickParams kick{ua(rng), ut(rng)};
    const oracle::CMat free = v * (kick.tau * es.eigenvalues()).array().exp().matrix().asDiagonal() * vinv;
    const oracle::CMat map = oracle::conjugation(oracle::kick_unitary(4, kick.a)) * free;
    const oracle::CMat ref = oracle::majorana_correlations(4, oracle::fixed_state(map, 1.0));
    worst = std::max(worst, max_abs(kicked_floquet(p, kick).c - ref));
  }
  return {worst <= 1e-6, format("worst entry error %.2e over 10 draws (oracle reconstruction %.1e)", worst, recon)};
}

Outcome symmetry_suite() {
  const ChainParams p = chain(5, 0.1);
  auto c_res = [&](double a, double tau) { return residual_correlation(kicked_floquet(p, {a, tau}), 5); };
  double period = 0.0, reflect = 0.0;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      const double a = 0.05 + 0.2 * i;
      const double tau = 0.2 + 0.5 * j;
      const double base = c_res(a, tau);
      period = std::max(period, std::abs(base - c_res(a + kPi / 2, tau)));
      reflect = std::max(reflect, std::abs(base - c_res(kPi / 2 - a, tau)));
    }
  }
  return {period <= 1e-8 && reflect <= 1e-8, format("period %.2e, reflection %.2e", period, reflect)};
}

Outcome seven_site_jump() {
  const ChainParams p = chain(7, 0.1);
  std::vector<double> lc;
  for (int i = 0; i <= 95; ++i)
    lc.push_back(std::log10(residual_correlation(kicked_floquet(p, {1.25, 0.1 + 0.02 * i}), 7)));
  int best = 0;
  for (int i = 1; i < 95; ++i)
    if (std::abs(lc[i + 1] - lc[i]) > std::abs(lc[best + 1] - lc[best])) best = i;
  const double step = lc[best + 1] - lc[best];
  return {std::abs(step) >= 1.0,
          format("largest adjacent step %.2f decades at tau=%.2f..%.2f; total rise tau 0.1->0.4 %.2f decades",
                 step, 0.1 + 0.02 * best, 0.12 + 0.02 * best, lc[15] - lc[0])};
}

Outcome band_concordance() {
  const double a = 0.5;
  const ChainParams p = chain(20, 0.1);
  const int m = 200;  // tau = 0.02 .. 4.00
  std::vector<double> lc(m);
  std::vector<int> half(m);
  for (int i = 0; i < m; ++i) {
    const double tau = 0.02 * (i + 1);
    lc[static_cast<std::size_t>(i)] = std::log10(residual_correlation(kicked_floquet(p, {a, tau}), 20));
    half[static_cast<std::size_t>(i)] = count_stationary_points(0.1, a / tau, tau, 10000).half_count;
  }
  std::vector<int> c_jumps;
  for (int i = 0; i + 1 < m; ++i)
    if (std::abs(lc[i + 1] - lc[i]) >= 1.0) c_jumps.push_back(i);
  int band_jumps = 0, matched = 0;
  std::string detail;
  for (int i = 0; i + 1 < m; ++i) {
    if (half[i + 1] == half[i]) continue;
    ++band_jumps;
    bool hit = false;
    for (int k : c_jumps) hit = hit || std::abs(k - i) <= 2;
    matched += hit;
    double local = 0.0;
    for (int k = std::max(0, i - 2); k <= std::min(m - 2, i + 2); ++k)
      local = std::max(local, std::abs(lc[k + 1] - lc[k]));
    detail += format("count %d->%d at tau=%.2f (largest nearby step %.2f dec)%s; ", half[i], half[i + 1],
                     0.02 * (i + 1.5), local, hit ? "" : " unmatched");
  }
  detail = format("%d of %d count changes matched, %zu C_res decade jumps: ", matched, band_jumps,
                  c_jumps.size()) + detail;
  return {band_jumps > 0 && matched == band_jumps, detail};
}

struct FullMaps {
  std::vector<double> nn_fermionic, nn_local, alpha2_local;
};

const FullMaps& full_maps() {
  static const FullMaps maps = [] {
    FullMaps m;
    const SweepDataset nn = run_sweep(full_grid({}, Observable::Both));
    m.nn_fermionic = values_of(nn, "C_res");
    m.nn_local = values_of(nn, "C_res_loc");
    RangeSpec power;
    power.kind = RangeSpec::Kind::PowerLaw;
    power.alpha = 2.0;
    m.alpha2_local = values_of(run_sweep(full_grid(power, Observable::Local)), "C_res_loc");
    return m;
  }();
  return maps;
}

Outcome long_range_asymmetry() {
  const FullMaps& m = full_maps();
  const double nn = reflection_asymmetry(m.nn_local, 12, 12);
  const double lr = reflection_asymmetry(m.alpha2_local, 12, 12);
  const double ratio = lr / nn;
  return {ratio >= 10.0, format("alpha=2 asymmetry %.3e, nearest-neighbour %.3e, ratio %.3g", lr, nn, ratio)};
}

Outcome local_fermionic_overlap() {
  const FullMaps& m = full_maps();
  const auto f = jump_edges(m.nn_fermionic, 12, 12);
  const auto l = jump_edges(m.nn_local, 12, 12);
  std::size_t common = 0;
  for (const auto& e : f) common += l.count(e);
  const std::size_t all = f.size() + l.size() - common;
  const double overlap = all ? static_cast<double>(common) / static_cast<double>(all) : 0.0;
  // how far below a decade the other observable falls on unshared cells
  double weakest = 1.0;
  auto step = [](const std::vector<double>& v, const std::pair<int, int>& e) {
    return std::abs(std::log10(v[static_cast<std::size_t>(e.second)] / v[static_cast<std::size_t>(e.first)]));
  };
  for (const auto& e : f)
    if (!l.count(e)) weakest = std::min(weakest, step(m.nn_local, e));
  for (const auto& e : l)
    if (!f.count(e)) weakest = std::min(weakest, step(m.nn_fermionic, e));
  return {all > 0 && overlap >= 0.7,
          format("%zu fermionic and %zu local jump cells, %zu shared, overlap %.0f%% of all jump cells; "
                 "smallest partner step on unshared cells %.2f decades",
                 f.size(), l.size(), common, 100 * overlap, weakest)};
}

Outcome physicality() {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0), field(-1.5, 1.5), rate(0.02, 1.0), kick(-3.0, 3.0),
      tau(0.05, 3.0);
  int cases = 0, bad = 0;
  std::string first;
  auto note = [&](bool ok, const std::string& what) {
    ++cases;
    if (!ok && first.empty()) first = what;
    bad += !ok;
  };
  auto random_chain = [&](int n) {
    ChainParams p = chain(n, unit(rng), field(rng));
    p.bath = {rate(rng), rate(rng), rate(rng), rate(rng)};
    return p;
  };
  auto corr_ok = [](const CorrelationMatrix& c) {
    return max_abs(c.c + c.c.transpose()) <= 1e-10 && c.c.real().cwiseAbs().maxCoeff() <= 1e-10;
  };
  auto density_ok = [](const DensityMatrix& s) {
    const DensityDiagnostics d = density_diagnostics(s);
    return d.hermiticity <= kDensityTolerance && d.trace_error <= kDensityTolerance &&
           d.min_eigenvalue >= kPositivityTolerance;
  };

  for (int k = 0; k < 20; ++k) {
    const ChainParams p = random_chain(2 + k % 11);
    const CovarianceResult r = static_ness_detailed(p);
    note(corr_ok(r.corr) && r.residual <= 1e-10, format("static covariance case %d", k));
  }
  for (int k = 0; k < 20; ++k) {
    const ChainParams p = random_chain(2 + k % 11);
    const KickParams kp{kick(rng), tau(rng)};
    const RealMatrix km = kick_map(p.n_sites, kp.a).k;
    const bool orth = (km * km.transpose() - RealMatrix::Identity(km.rows(), km.cols())).cwiseAbs().maxCoeff() <= 1e-12;
    const CovarianceResult r = kicked_floquet_detailed(p, kp);
    note(orth && corr_ok(r.corr) && r.residual <= 1e-10, format("kicked covariance case %d", k));
  }
  for (int k = 0; k < 10; ++k) {
    const ChainParams p = random_chain(2 + k % 3);
    const FullStateResult s = steady_state_static(p);
    note(density_ok(s.state) && corr_ok(majorana_correlations_full(s.state)), format("static density case %d", k));
  }
  for (int k = 0; k < 10; ++k) {
    ChainParams p = random_chain(2 + k % 3);
    p.h = 0.0;
    RangeSpec range;
    if (k % 2) {
      range.kind = RangeSpec::Kind::PowerLaw;
      range.alpha = 1.5 + 2 * unit(rng);
    }
    const FullStateResult s = floquet_steady_full(p, {kick(rng), tau(rng)}, range);
    note(density_ok(s.state) && corr_ok(majorana_correlations_full(s.state)), format("Floquet density case %d", k));
  }
  return {cases >= 50 && bad == 0,
          format("%d randomized cases, %d violations%s%s", cases, bad, first.empty() ? "" : ", first: ",
                 first.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"static critical line N=17", static_critical_line},
      {"static oracle N=4", static_oracle},
      {"kicked oracle N=4", kicked_oracle},
      {"kick periodicity and reflection N=5", symmetry_suite},
      {"kicked cut jump N=7", seven_site_jump},
      {"band and C_res jump concordance N=20", band_concordance},
      {"long-range reflection breaking N=5", long_range_asymmetry},
      {"local and fermionic jump overlap N=5", local_fermionic_overlap},
      {"physicality of states and maps", physicality},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
