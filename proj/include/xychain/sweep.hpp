#pragma once

// Parameter-grid sweeps over the static, kicked and band pipelines, with
// CSV output and a JSON provenance sidecar.

#include <atomic>
#include <charconv>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "xychain/bands.hpp"
#include "xychain/full_liouville.hpp"
#include "xychain/pipelines.hpp"
#include "xychain/types.hpp"

namespace xychain {

enum class Model { Static, KickedCov, KickedFull, Bands };
enum class Observable { Fermionic, Local, Both };

inline std::string_view to_string(Model m) {
  switch (m) {
    case Model::Static: return "static";
    case Model::KickedCov: return "kicked-cov";
    case Model::KickedFull: return "kicked-full";
    case Model::Bands: return "bands";
  }
  return "unknown";
}

/// Inclusive linear grid; a single step sits at min.
struct Axis {
  double min = 0.0;
  double max = 0.0;
  int steps = 1;

  std::vector<double> values() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
      out.push_back(steps == 1 ? min : min + (max - min) * i / (steps - 1));
    }
    return out;
  }
};

inline constexpr double kDefaultMemoryBudgetMb = 2048.0;
inline constexpr int kMaxCovarianceSites = 100;

struct SweepConfig {
  Model model = Model::Static;
  ChainParams chain;
  Axis gamma_axis;  // static
  Axis h_axis;      // static
  Axis a_axis;      // kicked and bands
  Axis tau_axis;    // kicked and bands
  RangeSpec range;
  DistanceConvention convention = DistanceConvention::Site;
  Observable observable = Observable::Fermionic;
  LocalPairing pairing = LocalPairing::UpperTriangle;
  KickOrder kick_order = KickOrder::FreeThenKick;
  LyapunovMethod method = LyapunovMethod::Kronecker;
  bool spectral_gap = false;
  int band_grid = 10000;
  int workers = 1;
  double memory_budget_mb = kDefaultMemoryBudgetMb;
  std::string output = "sweep";
  std::vector<int> n_list;
  std::vector<std::string> notes;
  nlohmann::ordered_json echo;  // normalized config with defaults filled in
};

struct ConfigResult {
  std::optional<SweepConfig> config;
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

/// Rough peak bytes of one dense kicked-full evaluation: a handful of
/// 4^N x 4^N complex matrices for the exponential and the LU.
inline double kicked_full_job_bytes(int n_sites) {
  return 96.0 * std::pow(16.0, n_sites);
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

// Collects type and range errors while reading a JSON object, and flags any
// key that was never looked at.
class Reader {
 public:
  Reader(const nlohmann::json& obj, std::string path, std::vector<std::string>& errors)
      : obj_(obj), path_(std::move(path)), errors_(errors) {}

  bool has(const std::string& key) {
    seen_.push_back(key);
    return obj_.contains(key);
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  std::optional<double> number(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) errors_.push_back("missing required field '" + name(key) + "'");
      return std::nullopt;
    }
    const auto& v = obj_.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      errors_.push_back("'" + name(key) + "' must be a finite number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<int> integer(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) errors_.push_back("missing required field '" + name(key) + "'");
      return std::nullopt;
    }
    const auto& v = obj_.at(key);
    if (!v.is_number_integer()) {
      errors_.push_back("'" + name(key) + "' must be an integer");
      return std::nullopt;
    }
    return v.get<int>();
  }

  std::optional<std::string> text(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) errors_.push_back("missing required field '" + name(key) + "'");
      return std::nullopt;
    }
    const auto& v = obj_.at(key);
    if (!v.is_string()) {
      errors_.push_back("'" + name(key) + "' must be a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<bool> flag(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const auto& v = obj_.at(key);
    if (!v.is_boolean()) {
      errors_.push_back("'" + name(key) + "' must be true or false");
      return std::nullopt;
    }
    return v.get<bool>();
  }

  const nlohmann::json* object(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) errors_.push_back("missing required field '" + name(key) + "'");
      return nullptr;
    }
    const auto& v = obj_.at(key);
    if (!v.is_object()) {
      errors_.push_back("'" + name(key) + "' must be an object");
      return nullptr;
    }
    return &v;
  }

  template <typename T>
  std::optional<T> choice(const std::string& key,
                          const std::vector<std::pair<std::string, T>>& options, bool required) {
    const auto s = text(key, required);
    if (!s) return std::nullopt;
    for (const auto& [label, value] : options) {
      if (label == *s) return value;
    }
    std::string allowed;
    for (const auto& o : options) allowed += (allowed.empty() ? "" : ", ") + o.first;
    errors_.push_back("'" + name(key) + "' has unknown value '" + *s + "' (allowed: " + allowed + ")");
    return std::nullopt;
  }

  void reject_unknown() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
        errors_.push_back("unknown key '" + name(it.key()) + "'");
      }
    }
  }

 private:
  const nlohmann::json& obj_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::vector<std::string> seen_;
};

inline std::optional<Axis> read_axis(const nlohmann::json& grid, const std::string& key,
                                     std::vector<std::string>& errors) {
  Reader r(grid, "grid", errors);
  const nlohmann::json* obj = r.object(key, true);
  if (!obj) return std::nullopt;
  Reader a(*obj, "grid." + key, errors);
  const auto lo = a.number("min", true);
  const auto hi = a.number("max", true);
  const auto steps = a.integer("steps", true);
  a.reject_unknown();
  if (!lo || !hi || !steps) return std::nullopt;
  if (*steps < 1) {
    errors.push_back("'grid." + key + ".steps' must be >= 1 (got " + std::to_string(*steps) + ")");
    return std::nullopt;
  }
  if (*hi < *lo) {
    errors.push_back("'grid." + key + "' needs min <= max");
    return std::nullopt;
  }
  return Axis{*lo, *hi, *steps};
}

inline nlohmann::ordered_json axis_json(const Axis& a) {
  return {{"min", a.min}, {"max", a.max}, {"steps", a.steps}};
}

}  // namespace detail

/// Parses and checks a JSON sweep description. All problems are reported, not
/// just the first; defaults are filled in and echoed.
inline ConfigResult validate_config(std::string_view raw) {
  ConfigResult out;
  auto& errors = out.errors;
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::parse_error& e) {
    errors.push_back(std::string("config is not valid JSON: ") + e.what());
    return out;
  }
  if (root.is_null()) root = nlohmann::json::object();
  if (!root.is_object()) {
    errors.push_back("config must be a JSON object");
    return out;
  }

  SweepConfig cfg;
  detail::Reader top(root, "", errors);
  const auto model = top.choice<Model>("model",
                                       {{"static", Model::Static},
                                        {"kicked-cov", Model::KickedCov},
                                        {"kicked-full", Model::KickedFull},
                                        {"bands", Model::Bands}},
                                       true);
  if (model) cfg.model = *model;

  // chain
  const nlohmann::json* chain = top.object("chain", true);
  const bool static_model = model && *model == Model::Static;
  if (chain) {
    detail::Reader c(*chain, "chain", errors);
    // a cut takes its chain lengths from n_list; bands describe the infinite chain
    const bool bands = model && *model == Model::Bands;
    if (const auto n = c.integer("n_sites", !root.contains("n_list") && !bands)) cfg.chain.n_sites = *n;
    // the static grid may sweep gamma and h instead
    if (const auto g = c.number("gamma", !static_model)) cfg.chain.gamma = *g;
    if (const auto h = c.number("h", false)) cfg.chain.h = *h;
    if (const nlohmann::json* bath = c.object("bath", false)) {
      detail::Reader b(*bath, "chain.bath", errors);
      if (const auto v = b.number("gamma_1L", false)) cfg.chain.bath.gamma_1L = *v;
      if (const auto v = b.number("gamma_2L", false)) cfg.chain.bath.gamma_2L = *v;
      if (const auto v = b.number("gamma_1R", false)) cfg.chain.bath.gamma_1R = *v;
      if (const auto v = b.number("gamma_2R", false)) cfg.chain.bath.gamma_2R = *v;
      b.reject_unknown();
    }
    c.reject_unknown();
  } else if (!root.contains("chain")) {
    errors.push_back("missing required field 'chain.n_sites'");
    if (!static_model) errors.push_back("missing required field 'chain.gamma'");
  }

  // grid
  const nlohmann::json* grid = top.object("grid", true);
  if (grid && model) {
    detail::Reader g(*grid, "grid", errors);
    if (*model == Model::Static) {
      if (g.has("gamma")) {
        if (auto a = detail::read_axis(*grid, "gamma", errors)) cfg.gamma_axis = *a;
      } else {
        cfg.gamma_axis = {cfg.chain.gamma, cfg.chain.gamma, 1};
        if (chain && !chain->contains("gamma")) {
          errors.push_back("missing required field 'grid.gamma' (or 'chain.gamma')");
        }
      }
      if (g.has("h")) {
        if (auto a = detail::read_axis(*grid, "h", errors)) cfg.h_axis = *a;
      } else {
        cfg.h_axis = {cfg.chain.h, cfg.chain.h, 1};
      }
    } else {
      g.has("a");
      g.has("tau");
      if (auto a = detail::read_axis(*grid, "a", errors)) cfg.a_axis = *a;
      if (auto t = detail::read_axis(*grid, "tau", errors)) cfg.tau_axis = *t;
    }
    g.reject_unknown();
  }

  if (const nlohmann::json* range = top.object("range", false)) {
    detail::Reader r(*range, "range", errors);
    const auto kind = r.choice<RangeSpec::Kind>(
        "kind", {{"nearest-neighbor", RangeSpec::Kind::NearestNeighbor},
                 {"power-law", RangeSpec::Kind::PowerLaw}},
        true);
    if (kind) cfg.range.kind = *kind;
    if (const auto alpha = r.number("alpha", kind && *kind == RangeSpec::Kind::PowerLaw)) {
      cfg.range.alpha = *alpha;
    }
    r.reject_unknown();
  }
  if (auto v = top.choice<DistanceConvention>(
          "convention", {{"site", DistanceConvention::Site}, {"majorana", DistanceConvention::Majorana}},
          false)) {
    cfg.convention = *v;
  }
  if (auto v = top.choice<Observable>("observable",
                                      {{"fermionic", Observable::Fermionic},
                                       {"local", Observable::Local},
                                       {"both", Observable::Both}},
                                      false)) {
    cfg.observable = *v;
  }
  if (auto v = top.choice<LocalPairing>(
          "local_pairing",
          {{"upper", LocalPairing::UpperTriangle}, {"symmetrized", LocalPairing::Symmetrized}}, false)) {
    cfg.pairing = *v;
  }
  if (auto v = top.choice<KickOrder>(
          "kick_order",
          {{"free-then-kick", KickOrder::FreeThenKick}, {"kick-then-free", KickOrder::KickThenFree}},
          false)) {
    cfg.kick_order = *v;
  }
  if (auto v = top.choice<LyapunovMethod>(
          "lyapunov", {{"kronecker", LyapunovMethod::Kronecker}, {"schur", LyapunovMethod::Schur}},
          false)) {
    cfg.method = *v;
  }
  if (auto v = top.flag("spectral_gap")) cfg.spectral_gap = *v;
  if (auto v = top.integer("band_grid", false)) cfg.band_grid = *v;
  if (auto v = top.integer("workers", false)) cfg.workers = *v;
  if (auto v = top.number("memory_budget_mb", false)) cfg.memory_budget_mb = *v;
  if (auto v = top.text("output", false)) cfg.output = *v;
  if (top.has("n_list")) {
    const auto& nl = root.at("n_list");
    bool good = nl.is_array() && !nl.empty();
    if (good) {
      for (const auto& v : nl) {
        if (!v.is_number_integer()) {
          good = false;
          break;
        }
        cfg.n_list.push_back(v.get<int>());
      }
    }
    if (!good) errors.push_back("'n_list' must be a non-empty array of integers");
  }
  top.reject_unknown();

  // cross-field checks
  const int n = cfg.chain.n_sites;
  auto check_sites = [&](int sites, const std::string& where) {
    if (sites < 2) errors.push_back(where + " must be >= 2 (got " + std::to_string(sites) + ")");
    if (model && (*model == Model::Static || *model == Model::KickedCov) &&
        sites > kMaxCovarianceSites) {
      errors.push_back(where + " must be <= " + std::to_string(kMaxCovarianceSites));
    }
    if (model && *model == Model::KickedFull) {
      const double need_mb = kicked_full_job_bytes(sites) / (1024.0 * 1024.0);
      if (sites > kMaxDenseSites || need_mb > cfg.memory_budget_mb) {
        errors.push_back(where + " = " + std::to_string(sites) +
                         " exceeds the kicked-full memory budget (needs about " +
                         std::to_string(static_cast<long long>(need_mb)) + " MB of " +
                         std::to_string(static_cast<long long>(cfg.memory_budget_mb)) +
                         " MB; dense limit N <= " + std::to_string(kMaxDenseSites) + ")");
      }
    }
  };
  if (chain && chain->contains("n_sites")) check_sites(n, "'chain.n_sites'");
  for (int sites : cfg.n_list) check_sites(sites, "'n_list' entry");

  auto check_unit = [&](double v, const std::string& what) {
    if (v < 0.0 || v > 1.0) errors.push_back(what + " must lie in [0, 1] (got " + std::to_string(v) + ")");
  };
  if (model && *model == Model::Static) {
    check_unit(cfg.gamma_axis.min, "'grid.gamma.min'");
    check_unit(cfg.gamma_axis.max, "'grid.gamma.max'");
  } else if (chain && chain->contains("gamma")) {
    check_unit(cfg.chain.gamma, "'chain.gamma'");
  }
  const BathRates& b = cfg.chain.bath;
  if (!b.all_nonnegative()) {
    errors.push_back("bath rates must be >= 0");
  } else if (!b.any_positive()) {
    errors.push_back("all bath rates are zero: no unique steady state possible");
  }
  if (model && *model != Model::Static) {
    if (cfg.tau_axis.min <= 0.0) {
      errors.push_back("'grid.tau.min' must be > 0 (got " + std::to_string(cfg.tau_axis.min) + ")");
    }
    const double quarter = std::numbers::pi / 2;
    if (cfg.a_axis.min < 0.0 || cfg.a_axis.max >= quarter) {
      cfg.notes.push_back("kick strength a outside [0, pi/2) is folded modulo pi/2");
    }
  }
  if (cfg.range.kind == RangeSpec::Kind::PowerLaw) {
    if (!(cfg.range.alpha > 0.0)) errors.push_back("'range.alpha' must be > 0");
    if (model && *model != Model::KickedFull) {
      errors.push_back("power-law range requires model 'kicked-full'");
    }
  }
  if (cfg.observable != Observable::Fermionic && model && *model != Model::KickedFull) {
    errors.push_back("local observables require model 'kicked-full'");
  }
  if (cfg.band_grid < 1000) errors.push_back("'band_grid' must be >= 1000");
  if (cfg.workers < 1) errors.push_back("'workers' must be >= 1");
  if (!(cfg.memory_budget_mb > 0.0)) errors.push_back("'memory_budget_mb' must be > 0");
  if (cfg.output.empty() || cfg.output.find('/') != std::string::npos) {
    errors.push_back("'output' must be a plain file stem");
  }

  if (!errors.empty()) return out;

  // echo
  auto& e = cfg.echo;
  e["model"] = std::string(to_string(cfg.model));
  e["chain"] = {{"n_sites", cfg.chain.n_sites},
                {"gamma", cfg.chain.gamma},
                {"h", cfg.chain.h},
                {"bath",
                 {{"gamma_1L", b.gamma_1L},
                  {"gamma_2L", b.gamma_2L},
                  {"gamma_1R", b.gamma_1R},
                  {"gamma_2R", b.gamma_2R}}}};
  if (cfg.model == Model::Static) {
    e["grid"] = {{"gamma", detail::axis_json(cfg.gamma_axis)}, {"h", detail::axis_json(cfg.h_axis)}};
  } else {
    e["grid"] = {{"a", detail::axis_json(cfg.a_axis)}, {"tau", detail::axis_json(cfg.tau_axis)}};
  }
  e["range"] = cfg.range.kind == RangeSpec::Kind::PowerLaw
                   ? nlohmann::ordered_json{{"kind", "power-law"}, {"alpha", cfg.range.alpha}}
                   : nlohmann::ordered_json{{"kind", "nearest-neighbor"}};
  e["convention"] = cfg.convention == DistanceConvention::Site ? "site" : "majorana";
  e["observable"] = cfg.observable == Observable::Fermionic ? "fermionic"
                    : cfg.observable == Observable::Local   ? "local"
                                                            : "both";
  e["local_pairing"] = cfg.pairing == LocalPairing::UpperTriangle ? "upper" : "symmetrized";
  e["kick_order"] = cfg.kick_order == KickOrder::FreeThenKick ? "free-then-kick" : "kick-then-free";
  e["lyapunov"] = cfg.method == LyapunovMethod::Kronecker ? "kronecker" : "schur";
  e["spectral_gap"] = cfg.spectral_gap;
  e["band_grid"] = cfg.band_grid;
  e["memory_budget_mb"] = cfg.memory_budget_mb;
  e["output"] = cfg.output;
  if (!cfg.n_list.empty()) e["n_list"] = cfg.n_list;
  out.config = std::move(cfg);
  return out;
}

/// Digest of the normalized config. Worker count is excluded since it never
/// changes results.
inline std::string config_digest(const SweepConfig& cfg) {
  return detail::hex64(detail::fnv1a(cfg.echo.dump()));
}

struct SweepRecord {
  Model model = Model::Static;
  int n_sites = 0;  // 0 for the infinite-chain band model
  double gamma = 0.0;
  std::optional<double> alpha;  // empty for nearest-neighbour
  std::optional<double> a;
  std::optional<double> tau;
  double h = 0.0;
  std::string observable;
  std::optional<double> value;  // empty when masked
  std::optional<double> residual;
  std::optional<double> gap;
  std::string status = "ok";  // ok, refined, or an error code
  double wall_seconds = 0.0;
};

struct SweepDataset {
  std::vector<SweepRecord> records;
  std::string digest;
  std::vector<std::string> notes;
  double wall_seconds = 0.0;

  int masked() const {
    int m = 0;
    for (const auto& r : records) m += !r.value.has_value();
    return m;
  }
};

namespace detail {

inline std::vector<std::string> observable_names(Observable o) {
  switch (o) {
    case Observable::Fermionic: return {"C_res"};
    case Observable::Local: return {"C_res_loc"};
    case Observable::Both: return {"C_res", "C_res_loc"};
  }
  return {};
}

// Fills every record of one grid point; failures mask the value and keep the code.
template <typename Fn>
void evaluate_point(std::vector<SweepRecord>& slots, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  try {
    fn(slots);
  } catch (const Error& e) {
    for (auto& r : slots) {
      r.value.reset();
      r.residual.reset();
      r.gap.reset();
      r.status = std::string(to_string(e.code()));
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (auto& r : slots) r.wall_seconds = secs / static_cast<double>(slots.size());
}

// Runs task(i) for i in [0, count) on up to `workers` threads. Results must be
// written by index so ordering never depends on scheduling.
template <typename Task>
void parallel_for(int count, int workers, Task&& task) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

/// Evaluates the whole grid of a validated config. Records follow grid order
/// (first axis outer) with observables innermost, whatever the worker count.
inline SweepDataset run_sweep(const SweepConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  SweepDataset ds;
  ds.digest = config_digest(cfg);
  ds.notes = cfg.notes;
  const int n = cfg.chain.n_sites;
  const std::vector<std::string> obs =
      cfg.model == Model::Bands ? std::vector<std::string>{"half_count"} : detail::observable_names(cfg.observable);
  const auto n_obs = obs.size();
  const bool kicked = cfg.model != Model::Static;
  const std::vector<double> first = kicked ? cfg.a_axis.values() : cfg.gamma_axis.values();
  const std::vector<double> second = kicked ? cfg.tau_axis.values() : cfg.h_axis.values();
  const std::size_t n1 = first.size(), n2 = second.size();

  ds.records.resize(n1 * n2 * n_obs);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      for (std::size_t o = 0; o < n_obs; ++o) {
        SweepRecord& r = ds.records[(i * n2 + j) * n_obs + o];
        r.model = cfg.model;
        r.n_sites = cfg.model == Model::Bands ? 0 : n;
        r.observable = obs[o];
        if (cfg.range.kind == RangeSpec::Kind::PowerLaw) r.alpha = cfg.range.alpha;
        if (kicked) {
          r.gamma = cfg.chain.gamma;
          r.a = first[i];
          r.tau = second[j];
          r.h = first[i] / second[j];
        } else {
          r.gamma = first[i];
          r.h = second[j];
        }
      }
    }
  }
  auto slots_of = [&](std::size_t i, std::size_t j) {
    return std::vector<SweepRecord>(ds.records.begin() + static_cast<std::ptrdiff_t>((i * n2 + j) * n_obs),
                                    ds.records.begin() + static_cast<std::ptrdiff_t>((i * n2 + j + 1) * n_obs));
  };
  auto store = [&](std::size_t i, std::size_t j, const std::vector<SweepRecord>& slots) {
    std::copy(slots.begin(), slots.end(),
              ds.records.begin() + static_cast<std::ptrdiff_t>((i * n2 + j) * n_obs));
  };

  const PipelineOptions popts{cfg.method, cfg.kick_order};
  ChainParams base = cfg.chain;

  if (cfg.model == Model::KickedFull) {
    // one dense free propagator per tau column, reused for every a
    const double budget = cfg.memory_budget_mb * 1024.0 * 1024.0;
    const int admitted = std::max(1, static_cast<int>(budget / kicked_full_job_bytes(n)));
    const int workers = std::min(cfg.workers, admitted);
    detail::parallel_for(static_cast<int>(n2), workers, [&](int jj) {
      const auto j = static_cast<std::size_t>(jj);
      std::optional<Superoperator> free;
      std::optional<Error> free_error;
      try {
        free = free_propagator(base, cfg.range, second[j]);
      } catch (const Error& e) {
        free_error = e;
      }
      for (std::size_t i = 0; i < n1; ++i) {
        std::vector<SweepRecord> slots = slots_of(i, j);
        detail::evaluate_point(slots, [&](std::vector<SweepRecord>& out) {
          if (free_error) throw *free_error;
          const Superoperator map = compose_kick(*free, n, fold_kick(first[i]), cfg.kick_order);
          const FullStateResult fp = floquet_fixed_point(map, n, cfg.spectral_gap);
          if (fp.residual > kFixedPointTolerance) {
            fail(ErrorCode::NumericalInconsistency, "Floquet fixed-point residual above tolerance");
          }
          validate_density(fp.state);
          for (auto& r : out) {
            r.residual = fp.residual;
            if (cfg.spectral_gap) r.gap = fp.gap;
            if (r.observable == "C_res") {
              r.value = residual_correlation(majorana_correlations_full(fp.state), n, cfg.convention);
            } else {
              r.value = local_residual(local_correlators(fp.state), n, cfg.pairing);
            }
          }
        });
        store(i, j, slots);
      }
    });
  } else {
    detail::parallel_for(static_cast<int>(n1 * n2), cfg.workers, [&](int idx) {
      const auto i = static_cast<std::size_t>(idx) / n2;
      const auto j = static_cast<std::size_t>(idx) % n2;
      std::vector<SweepRecord> slots = slots_of(i, j);
      detail::evaluate_point(slots, [&](std::vector<SweepRecord>& out) {
        SweepRecord& r = out.front();
        if (cfg.model == Model::Static) {
          ChainParams p = base;
          p.gamma = first[i];
          p.h = second[j];
          const CovarianceResult res = static_ness_detailed(p, popts);
          r.value = residual_correlation(res.corr, n, cfg.convention);
          r.residual = res.residual;
        } else if (cfg.model == Model::KickedCov) {
          const CovarianceResult res = kicked_floquet_detailed(base, {first[i], second[j]}, popts);
          r.value = residual_correlation(res.corr, n, cfg.convention);
          r.residual = res.residual;
        } else {
          const StationaryCount sc =
              count_stationary_points(base.gamma, first[i] / second[j], second[j], cfg.band_grid);
          r.value = sc.half_count;
          if (sc.refined) r.status = "refined";
        }
      });
      store(i, j, slots);
    });
  }
  ds.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return ds;
}

/// Runs the same grid for each chain length in n_list and concatenates the
/// records in n_list order.
inline SweepDataset run_cut(const SweepConfig& cfg, const std::vector<int>& n_list) {
  require(!n_list.empty(), "n_list must not be empty");
  SweepDataset out;
  out.digest = config_digest(cfg);
  out.notes = cfg.notes;
  for (int n : n_list) {
    SweepConfig one = cfg;
    one.chain.n_sites = n;
    SweepDataset part = run_sweep(one);
    out.records.insert(out.records.end(), part.records.begin(), part.records.end());
    out.wall_seconds += part.wall_seconds;
  }
  return out;
}

inline constexpr std::string_view kCsvHeader =
    "model,N,gamma,alpha,a,tau,h,observable,value,residual,gap,status,config_digest";

namespace detail {

// shortest text that reads back to the same double
inline std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::InvalidArgument, "cannot write output file " + tmp.string());
    f << content;
    f.flush();
    if (!f) fail(ErrorCode::InvalidArgument, "failed writing output file " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::InvalidArgument, "cannot move output into place at " + path.string());
  }
}

}  // namespace detail

inline std::string dataset_csv(const SweepDataset& ds) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& r : ds.records) {
    os << to_string(r.model) << ',' << (r.n_sites > 0 ? std::to_string(r.n_sites) : std::string()) << ',' << detail::fmt(r.gamma) << ','
       << (r.alpha ? detail::fmt(*r.alpha) : std::string("NN")) << ',' << detail::fmt(r.a) << ','
       << detail::fmt(r.tau) << ',' << detail::fmt(r.h) << ',' << r.observable << ','
       << detail::fmt(r.value) << ',' << detail::fmt(r.residual) << ',' << detail::fmt(r.gap) << ','
       << r.status << ',' << ds.digest << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json dataset_metadata(const SweepConfig& cfg, const SweepDataset& ds,
                                               int workers, std::optional<long long> seed = {}) {
  nlohmann::ordered_json m;
  m["config"] = cfg.echo;
  m["config_digest"] = ds.digest;
  m["version"] = XYCHAIN_VERSION;
  m["columns"] = kCsvHeader;
  m["tolerances"] = {{"stability", kStabilityTolerance},
                     {"lyapunov_residual", kLyapunovResidualTolerance},
                     {"real_storage_cutoff", kRealStorageCutoff},
                     {"density", kDensityTolerance},
                     {"positivity", kPositivityTolerance},
                     {"fixed_point", kFixedPointTolerance},
                     {"arccos_slack", kArccosSlack}};
  m["notes"] = ds.notes;
  m["records"] = ds.records.size();
  m["masked"] = ds.masked();
  m["workers"] = workers;
  m["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json(nullptr);
  std::vector<double> per;
  per.reserve(ds.records.size());
  for (const auto& r : ds.records) per.push_back(r.wall_seconds);
  m["timing"] = {{"total_seconds", ds.wall_seconds}, {"record_seconds", per}};
  return m;
}

/// Writes <dir>/<stem>.csv and <dir>/<stem>.json, each via rename.
inline void write_dataset(const std::filesystem::path& dir, const SweepConfig& cfg,
                          const SweepDataset& ds, int workers, std::optional<long long> seed = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir)) {
    fail(ErrorCode::InvalidArgument, "output directory " + dir.string() + " is not usable");
  }
  detail::write_atomic(dir / (cfg.output + ".csv"), dataset_csv(ds));
  detail::write_atomic(dir / (cfg.output + ".json"), dataset_metadata(cfg, ds, workers, seed).dump(2) + "\n");
}

}  // namespace xychain
