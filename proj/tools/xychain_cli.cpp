// Command-line driver for xychain sweeps.
//
//   xychain static-sweep --config configs/fig1d_static_n17.json --out results
//   xychain validate --config my.json
//
// Exit codes: 0 success, 1 config error, 2 runtime error, 3 finished with masked cells.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "xychain/sweep.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitPartial = 3;

struct Options {
  std::string config;
  std::string out = ".";
  int workers = 0;
  long long seed = 0;
  bool seed_given = false;
  std::vector<int> n_list;
};

int load(const std::string& path, std::optional<xychain::SweepConfig>& cfg) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot read config file " << path << "\n";
    return kExitConfig;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  xychain::ConfigResult res = xychain::validate_config(buf.str());
  if (!res.ok()) {
    std::cerr << "config " << path << " has " << res.errors.size() << " error(s):\n";
    for (const auto& e : res.errors) std::cerr << "  - " << e << "\n";
    return kExitConfig;
  }
  cfg = std::move(res.config);
  return kExitOk;
}

int run(const Options& opt, std::optional<xychain::Model> expected, bool cut) {
  std::optional<xychain::SweepConfig> cfg;
  if (int rc = load(opt.config, cfg); rc != kExitOk) return rc;
  if (expected && cfg->model != *expected) {
    std::cerr << "error: this subcommand expects model '" << xychain::to_string(*expected)
              << "' but the config has '" << xychain::to_string(cfg->model) << "'\n";
    return kExitConfig;
  }
  if (opt.workers > 0) cfg->workers = opt.workers;
  for (const auto& note : cfg->notes) std::cerr << "note: " << note << "\n";
  try {
    xychain::SweepDataset ds;
    if (cut) {
      const std::vector<int> n_list = opt.n_list.empty() ? cfg->n_list : opt.n_list;
      if (n_list.empty()) {
        std::cerr << "error: cut needs 'n_list' in the config or --n-list\n";
        return kExitConfig;
      }
      ds = xychain::run_cut(*cfg, n_list);
    } else {
      ds = xychain::run_sweep(*cfg);
    }
    std::optional<long long> seed;
    if (opt.seed_given) seed = opt.seed;
    xychain::write_dataset(opt.out, *cfg, ds, cfg->workers, seed);
    std::cerr << "wrote " << ds.records.size() << " records to "
              << (std::filesystem::path(opt.out) / (cfg->output + ".csv")).string() << " ("
              << ds.masked() << " masked, " << ds.wall_seconds << " s)\n";
    return ds.masked() > 0 ? kExitPartial : kExitOk;
  } catch (const xychain::Error& e) {
    std::cerr << "error [" << xychain::to_string(e.code()) << "]: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual-correlation and band-count sweeps for boundary-driven XY chains"};
  app.set_version_flag("--version", XYCHAIN_VERSION);
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON sweep description")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--workers", opt.workers, "worker threads (overrides the config)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", opt.seed, "reserved; every algorithm is deterministic")
        ->each([&opt](const std::string&) { opt.seed_given = true; });
  };

  struct Entry {
    const char* name;
    const char* help;
    std::optional<xychain::Model> model;
    bool cut;
  };
  const std::vector<Entry> entries = {
      {"static-sweep", "static chain over a (gamma, h) grid", xychain::Model::Static, false},
      {"kicked-sweep", "kicked chain, covariance path, over an (a, tau) grid", xychain::Model::KickedCov, false},
      {"kicked-full-sweep", "kicked chain, full master equation, over an (a, tau) grid",
       xychain::Model::KickedFull, false},
      {"band-map", "stationary-point counts over an (a, tau) grid", xychain::Model::Bands, false},
      {"cut", "the config's grid repeated for several chain lengths", std::nullopt, true},
  };
  std::vector<CLI::App*> subs;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common(sub);
    if (e.cut) sub->add_option("--n-list", opt.n_list, "chain lengths (overrides the config)");
    subs.push_back(sub);
  }
  CLI::App* validate = app.add_subcommand("validate", "check a config and print it with defaults");
  validate->add_option("--config", opt.config, "JSON sweep description")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (validate->parsed()) {
    std::optional<xychain::SweepConfig> cfg;
    if (int rc = load(opt.config, cfg); rc != kExitOk) return rc;
    for (const auto& note : cfg->notes) std::cerr << "note: " << note << "\n";
    std::cout << cfg->echo.dump(2) << "\n";
    return kExitOk;
  }
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (subs[k]->parsed()) return run(opt, entries[k].model, entries[k].cut);
  }
  return kExitConfig;
}
