// Command-line front end: simulation runs, table sweeps, deterministic
// routers, the baseline formula and verification suites.
//
// Exit codes: 0 success, 1 validation, 2 invariant violation, 3 I/O.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pops/analysis.hpp"
#include "pops/errors.hpp"
#include "pops/experiment.hpp"
#include "pops/offline_router.hpp"
#include "pops/permutation.hpp"
#include "pops/rng.hpp"
#include "pops/sorting_network.hpp"

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kInvariant = 2, kIo = 3 };

struct Options {
  std::uint32_t d = 4;
  std::uint32_t g = 4;
  std::uint32_t runs = 1;
  std::string seed = "1";
  std::string protocol = "paper5";
  std::string schedule = "fixed";
  std::string perm = "uniform";
  std::string perm_file;
  std::string out;
  std::string format = "csv";
  std::string loss_policy = "abort";
  double c_eps = 4.0;
  bool immediate_exit = false;
  unsigned jobs = 0;
  // sweep
  std::uint32_t ratio = 1;
  std::uint32_t min_n = 4;
  std::uint32_t max_n = 262144;
  // offline / sort
  std::string dump;
  // verify
  std::string suite;
  std::uint32_t budget = 0;
};

pops::Permutation make_perm(const Options& o, const pops::NetworkConfig& cfg,
                            std::uint64_t seed) {
  const auto source = pops::parse_perm_source(o.perm);
  if (source == pops::PermSource::File) return pops::load_permutation(o.perm_file, cfg.n());
  return pops::generate_permutation(source, cfg, seed);
}

pops::ExperimentSpec make_spec(const Options& o, const pops::NetworkConfig& cfg) {
  pops::ExperimentSpec spec;
  spec.cfg = cfg;
  spec.protocol = pops::parse_protocol(o.protocol);
  spec.schedule.mode = pops::parse_schedule(o.schedule);
  spec.schedule.c_eps = o.c_eps;
  spec.perm_source = pops::parse_perm_source(o.perm);
  spec.perm_file = o.perm_file;
  spec.runs = o.runs;
  spec.seed = pops::parse_seed(o.seed);
  if (o.loss_policy == "abort") {
    spec.loss_policy = pops::LossPolicy::Abort;
  } else if (o.loss_policy == "repair") {
    spec.loss_policy = pops::LossPolicy::Repair;
  } else {
    throw pops::ValidationError("loss policy must be abort or repair");
  }
  spec.immediate_exit = o.immediate_exit;
  spec.jobs = o.jobs;
  return spec;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw pops::IoError("cannot write " + path);
}

int cmd_simulate(const Options& o) {
  const pops::NetworkConfig cfg(o.d, o.g);
  const auto report = pops::run_experiment(make_spec(o, cfg));
  pops::emit_report(report.rows, pops::parse_format(o.format), o.out);
  return kOk;
}

int cmd_sweep(const Options& o) {
  std::vector<pops::ReportRow> rows;
  for (std::uint64_t n = o.min_n; n <= o.max_n; n *= 4) {
    if (n % o.ratio != 0) continue;
    const auto g = static_cast<std::uint32_t>(std::llround(std::sqrt(double(n / o.ratio))));
    if (g == 0 || std::uint64_t{g} * g * o.ratio != n) continue;
    const pops::NetworkConfig cfg(g * o.ratio, g);
    const auto report = pops::run_experiment(make_spec(o, cfg));
    rows.insert(rows.end(), report.rows.begin(), report.rows.end());
    std::fprintf(stderr, "n=%llu d=%u g=%u mean iterations %.2f\n",
                 static_cast<unsigned long long>(n), cfg.d(), cfg.g(),
                 report.aggregate.iterations.mean);
  }
  pops::emit_report(rows, pops::parse_format(o.format), o.out);
  return kOk;
}

int cmd_offline(const Options& o) {
  const pops::NetworkConfig cfg(o.d, o.g);
  const auto perm = make_perm(o, cfg, pops::parse_seed(o.seed));
  const auto result = pops::route_offline(perm, cfg);
  std::printf("n=%u d=%u g=%u slots=%llu conflicts=0 delivered=%u\n", cfg.n(), cfg.d(), cfg.g(),
              static_cast<unsigned long long>(result.stats.slots), cfg.n());
  if (!o.dump.empty()) write_text(o.dump, pops::schedule_to_json(result.schedule));
  return kOk;
}

int cmd_sort(const Options& o, bool d_given) {
  const pops::NetworkConfig cfg(d_given ? o.d : o.g, o.g);
  const std::uint64_t seed = pops::parse_seed(o.seed);
  std::vector<pops::KeyedRecord> records(cfg.n());
  for (std::uint32_t i = 0; i < cfg.n(); ++i) {
    const auto key = pops::derive_uniform(pops::RandomKey{seed, i, 1, pops::Purpose::Keys},
                                          std::uint64_t{4} * cfg.n());
    records[i] = {static_cast<std::int64_t>(key), i};
  }
  const auto sorted = pops::sort_on_pops(records, cfg);
  bool ok = true;
  for (std::size_t i = 1; i < sorted.records.size(); ++i) {
    ok = ok && sorted.records[i - 1].key <= sorted.records[i].key;
  }
  std::printf("n=%u g=%u stages=%zu slots=%llu sorted=%s\n", cfg.n(), cfg.g(),
              pops::batcher_network(cfg.n()).stages.size(),
              static_cast<unsigned long long>(sorted.slots), ok ? "yes" : "no");
  if (!o.dump.empty()) write_text(o.dump, pops::network_to_json(pops::batcher_network(cfg.n())));
  return ok ? kOk : kInvariant;
}

int cmd_route_sort(const Options& o, bool d_given) {
  const pops::NetworkConfig cfg(d_given ? o.d : o.g, o.g);
  const auto perm = make_perm(o, cfg, pops::parse_seed(o.seed));
  const auto result = pops::route_by_sorting(perm, cfg);
  std::printf("n=%u g=%u slots=%llu delivered=%u\n", cfg.n(), cfg.g(),
              static_cast<unsigned long long>(result.stats.slots), cfg.n());
  return kOk;
}

int cmd_baseline(const Options& o, bool table) {
  if (!table) {
    const pops::NetworkConfig cfg(o.d, o.g);
    std::printf("%llu\n", static_cast<unsigned long long>(pops::baseline_ds_slots(cfg)));
    return kOk;
  }
  std::printf("n,d,g,baseline_slots\n");
  for (std::uint64_t n = o.min_n; n <= o.max_n; n *= 4) {
    if (n % o.ratio != 0) continue;
    const auto g = static_cast<std::uint32_t>(std::llround(std::sqrt(double(n / o.ratio))));
    if (g == 0 || std::uint64_t{g} * g * o.ratio != n) continue;
    const pops::NetworkConfig cfg(g * o.ratio, g);
    std::printf("%llu,%u,%u,%llu\n", static_cast<unsigned long long>(n), cfg.d(), cfg.g(),
                static_cast<unsigned long long>(pops::baseline_ds_slots(cfg)));
  }
  return kOk;
}

int cmd_verify(const Options& o, bool shape_given) {
  pops::VerifyOptions vo;
  if (shape_given) vo.cfg = pops::NetworkConfig(o.d, o.g);
  vo.budget = o.budget;
  vo.seed = pops::parse_seed(o.seed);
  const auto rep = pops::verify_suite(o.suite, vo);
  std::printf("%s: %s (%llu checks)\n", rep.suite.c_str(), rep.passed() ? "PASS" : "FAIL",
              static_cast<unsigned long long>(rep.checks));
  for (const auto& f : rep.failures) std::printf("  %s\n", f.c_str());
  return rep.passed() ? kOk : kInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"POPS(d,g) permutation routing simulator"};
  app.set_config("--config", "", "key=value file; command-line flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  auto* d_opt = app.add_option("--d", o.d, "processors per group");
  auto* g_opt = app.add_option("--g", o.g, "number of groups");
  app.add_option("--runs", o.runs, "seeded runs");
  app.add_option("--seed", o.seed, "64-bit seed, decimal or 0x-hex");
  app.add_option("--protocol", o.protocol, "paper5 | reversal6");
  app.add_option("--schedule", o.schedule, "fixed | adaptive");
  app.add_option("--perm", o.perm, "uniform | identity | reversal | stress | file");
  app.add_option("--perm-file", o.perm_file, "destination list for --perm file");
  app.add_option("--out", o.out, "output path (stdout when omitted)");
  app.add_option("--format", o.format, "csv | json");
  app.add_option("--loss-policy", o.loss_policy, "abort | repair");
  app.add_option("--c-eps", o.c_eps, "schedule constant c + eps(g)");
  app.add_flag("--immediate-exit", o.immediate_exit, "delivered packets leave at once");
  app.add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
  app.add_option("--ratio", o.ratio, "d/g for sweep and baseline tables");
  app.add_option("--min-n", o.min_n, "smallest n of a sweep");
  app.add_option("--max-n", o.max_n, "largest n of a sweep");
  app.add_option("--dump", o.dump, "write the offline schedule / sorting network as JSON");
  app.add_option("--budget", o.budget, "run budget of a verification suite");

  auto* simulate = app.add_subcommand("simulate", "route random permutations, one row per run");
  auto* sweep = app.add_subcommand("sweep", "simulate over n = 4^k at a fixed d/g ratio");
  auto* offline = app.add_subcommand("offline", "deterministic offline routing");
  auto* sort = app.add_subcommand("sort", "sort random keys on POPS(g,g)");
  auto* route_sort = app.add_subcommand("route-sort", "route a permutation by sorting");
  auto* baseline = app.add_subcommand("baseline", "slot count of the comparator baseline");
  bool table = false;
  baseline->add_flag("--table", table, "print the formula over a sweep of n");
  auto* verify = app.add_subcommand("verify", "run an invariant verification suite");
  verify->add_option("suite", o.suite, "prop1 | offline | sorting | buffers | exactly-once")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*sweep) return cmd_sweep(o);
    if (*offline) return cmd_offline(o);
    if (*sort) return cmd_sort(o, d_opt->count() > 0);
    if (*route_sort) return cmd_route_sort(o, d_opt->count() > 0);
    if (*baseline) return cmd_baseline(o, table);
    if (*verify) return cmd_verify(o, d_opt->count() > 0 || g_opt->count() > 0);
  } catch (const pops::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const pops::InvariantViolation& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return kInvariant;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  }
  return kOk;
}
