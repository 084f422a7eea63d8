#include "pops/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "pops/errors.hpp"
#include "pops/offline_router.hpp"
#include "pops/rng.hpp"
#include "pops/sorting_network.hpp"

namespace pops {

StepProtocol parse_protocol(std::string_view name) {
  if (name == "paper5") return StepProtocol::Paper5;
  if (name == "reversal6") return StepProtocol::Reversal6;
  throw ValidationError("unknown protocol '" + std::string(name) + "'");
}

std::string_view to_string(StepProtocol protocol) noexcept {
  return protocol == StepProtocol::Paper5 ? "paper5" : "reversal6";
}

ScheduleMode parse_schedule(std::string_view name) {
  if (name == "fixed") return ScheduleMode::Fixed;
  if (name == "adaptive") return ScheduleMode::Adaptive;
  throw ValidationError("unknown schedule '" + std::string(name) + "'");
}

std::string_view to_string(ScheduleMode mode) noexcept {
  return mode == ScheduleMode::Fixed ? "fixed" : "adaptive";
}

OutputFormat parse_format(std::string_view name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  throw ValidationError("unknown output format '" + std::string(name) + "'");
}

std::uint64_t parse_seed(std::string_view text) {
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    text.remove_prefix(2);
    base = 16;
  }
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ValidationError("seed must be a 64-bit unsigned integer (decimal or 0x-hex)");
  }
  return value;
}

void validate(const ExperimentSpec& spec) {
  if (spec.runs == 0) throw ValidationError("an experiment needs at least one run");
  if (spec.cfg.d() < spec.cfg.g()) {
    throw ValidationError("randomized routing needs d >= g");
  }
  if (spec.perm_source == PermSource::Stress && spec.cfg.d() <= spec.cfg.g()) {
    throw ValidationError("stress permutations need d > g");
  }
  if (spec.perm_source == PermSource::File && spec.perm_file.empty()) {
    throw ValidationError("file permutation source needs a path");
  }
  if (!(spec.schedule.c_eps > 0.0)) throw ValidationError("c+eps must be positive");
}

// ---------------------------------------------------------------------------

namespace {

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_number(std::string_view s) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ValidationError("malformed numeric field '" + std::string(s) + "'");
  }
  return v;
}

ReportRow make_row(const ExperimentSpec& spec, std::string index) {
  ReportRow row;
  row.n = spec.cfg.n();
  row.d = spec.cfg.d();
  row.g = spec.cfg.g();
  row.protocol = std::string(to_string(spec.protocol));
  row.seed_index = std::move(index);
  return row;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  std::optional<Permutation> fixed_perm;
  if (spec.perm_source == PermSource::File) {
    fixed_perm = load_permutation(spec.perm_file, spec.cfg.n());
  }

  RouterOptions options;
  options.protocol = spec.protocol;
  options.schedule = spec.schedule;
  options.loss_policy = spec.loss_policy;
  options.state.immediate_exit = spec.immediate_exit;

  ExperimentReport report;
  report.runs.resize(spec.runs);
  report.wall_ms.resize(spec.runs);

  auto run_one = [&](std::uint32_t index) {
    const std::uint64_t run_seed = derive_run_seed(spec.seed, index);
    const auto start = std::chrono::steady_clock::now();
    const Permutation perm =
        fixed_perm ? *fixed_perm : generate_permutation(spec.perm_source, spec.cfg, run_seed);
    report.runs[index] = route_randomized(perm, spec.cfg, options, run_seed);
    const auto stop = std::chrono::steady_clock::now();
    report.wall_ms[index] = std::chrono::duration<double, std::milli>(stop - start).count();
  };

  unsigned jobs = spec.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : spec.jobs;
  jobs = std::min<unsigned>(jobs, spec.runs);
  if (jobs <= 1) {
    for (std::uint32_t i = 0; i < spec.runs; ++i) run_one(i);
  } else {
    std::atomic<std::uint32_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::uint32_t i = next++; i < spec.runs; i = next++) {
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = spec.runs;
          }
        }
      });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  for (std::uint32_t i = 0; i < spec.runs; ++i) {
    const RunStats& r = report.runs[i];
    ReportRow row = make_row(spec, std::to_string(i));
    row.iterations = r.iterations;
    row.slots = static_cast<double>(r.slots);
    row.conflicts_s1 = static_cast<double>(r.conflicts_slot1);
    row.conflicts_s2 = static_cast<double>(r.conflicts_slot2);
    row.conflicts_ack = static_cast<double>(r.conflicts_ack);
    row.conflicts_delivery = static_cast<double>(r.conflicts_delivery);
    row.wall_ms = report.wall_ms[i];
    report.rows.push_back(std::move(row));
  }

  report.aggregate = aggregate_stats(report.runs);
  const Summary wall = summarize(report.wall_ms);
  const auto& a = report.aggregate;
  auto pick = [](const Summary& s, int which) {
    return which == 0 ? s.mean : which == 1 ? s.sigma : s.max;
  };
  const char* labels[] = {"mean", "sigma", "max"};
  for (int k = 0; k < 3; ++k) {
    ReportRow row = make_row(spec, labels[k]);
    row.iterations = pick(a.iterations, k);
    row.slots = pick(a.slots, k);
    row.conflicts_s1 = pick(a.conflicts_slot1, k);
    row.conflicts_s2 = pick(a.conflicts_slot2, k);
    row.conflicts_ack = pick(a.conflicts_ack, k);
    row.conflicts_delivery = pick(a.conflicts_delivery, k);
    row.wall_ms = pick(wall, k);
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------

void write_csv(const std::vector<ReportRow>& rows, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.n << ',' << r.d << ',' << r.g << ',' << r.protocol << ',' << r.seed_index << ','
        << format_number(r.iterations) << ',' << format_number(r.slots) << ','
        << format_number(r.conflicts_s1) << ',' << format_number(r.conflicts_s2) << ','
        << format_number(r.conflicts_ack) << ',' << format_number(r.conflicts_delivery) << ','
        << format_number(r.wall_ms) << '\n';
  }
}

void write_json(const std::vector<ReportRow>& rows, std::ostream& out) {
  auto doc = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json rec;
    rec["n"] = r.n;
    rec["d"] = r.d;
    rec["g"] = r.g;
    rec["protocol"] = r.protocol;
    rec["seed_index"] = r.seed_index;
    rec["iterations"] = r.iterations;
    rec["slots"] = r.slots;
    rec["conflicts_s1"] = r.conflicts_s1;
    rec["conflicts_s2"] = r.conflicts_s2;
    rec["conflicts_ack"] = r.conflicts_ack;
    rec["conflicts_delivery"] = r.conflicts_delivery;
    rec["wall_ms"] = r.wall_ms;
    doc.push_back(std::move(rec));
  }
  out << doc.dump(2) << '\n';
}

std::string format_report(const std::vector<ReportRow>& rows, OutputFormat format) {
  std::ostringstream out;
  if (format == OutputFormat::Csv) {
    write_csv(rows, out);
  } else {
    write_json(rows, out);
  }
  return out.str();
}

void emit_report(const std::vector<ReportRow>& rows, OutputFormat format,
                 const std::filesystem::path& path) {
  const std::string text = format_report(rows, format);
  if (path.empty()) {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<ReportRow> parse_csv(std::string_view text) {
  std::vector<ReportRow> rows;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (header) {
      if (line != kCsvHeader) throw ValidationError("unexpected CSV header");
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (f.size() != 12) throw ValidationError("CSV row must have 12 fields");
    ReportRow r;
    r.n = static_cast<std::uint32_t>(parse_number(f[0]));
    r.d = static_cast<std::uint32_t>(parse_number(f[1]));
    r.g = static_cast<std::uint32_t>(parse_number(f[2]));
    r.protocol = std::string(f[3]);
    r.seed_index = std::string(f[4]);
    r.iterations = parse_number(f[5]);
    r.slots = parse_number(f[6]);
    r.conflicts_s1 = parse_number(f[7]);
    r.conflicts_s2 = parse_number(f[8]);
    r.conflicts_ack = parse_number(f[9]);
    r.conflicts_delivery = parse_number(f[10]);
    r.wall_ms = parse_number(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ReportRow> parse_json(std::string_view text) {
  const auto doc = nlohmann::json::parse(text);
  std::vector<ReportRow> rows;
  for (const auto& rec : doc) {
    ReportRow r;
    r.n = rec.at("n").get<std::uint32_t>();
    r.d = rec.at("d").get<std::uint32_t>();
    r.g = rec.at("g").get<std::uint32_t>();
    r.protocol = rec.at("protocol").get<std::string>();
    r.seed_index = rec.at("seed_index").get<std::string>();
    r.iterations = rec.at("iterations").get<double>();
    r.slots = rec.at("slots").get<double>();
    r.conflicts_s1 = rec.at("conflicts_s1").get<double>();
    r.conflicts_s2 = rec.at("conflicts_s2").get<double>();
    r.conflicts_ack = rec.at("conflicts_ack").get<double>();
    r.conflicts_delivery = rec.at("conflicts_delivery").get<double>();
    r.wall_ms = rec.at("wall_ms").get<double>();
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Verification suites

namespace {

void fail(VerifyReport& rep, std::string what) {
  if (rep.failures.size() < 50) rep.failures.push_back(std::move(what));
}

VerifyReport verify_prop1(const VerifyOptions& opt) {
  VerifyReport rep{"prop1", 0, {}};
  const NetworkConfig cfg = opt.cfg.value_or(NetworkConfig{8, 8});
  if (cfg.d() != cfg.g()) throw ValidationError("prop1 applies to d = g");
  const std::uint32_t runs = opt.budget ? opt.budget : 200;
  RouterOptions ro;
  ro.protocol = StepProtocol::Paper5;
  ro.loss_policy = LossPolicy::Repair;
  for (std::uint32_t k = 0; k < runs; ++k) {
    const std::uint64_t seed = derive_run_seed(opt.seed, k);
    const RunStats stats = route_randomized(uniform_permutation(cfg.n(), seed), cfg, ro, seed);
    for (const auto& m : stats.per_step) {
      ++rep.checks;
      if (m.conflicts[2] || m.conflicts[3] || m.conflicts[4]) {
        fail(rep, "run " + std::to_string(k) + " step " + std::to_string(m.step) +
                      ": conflict in slots 3-5");
      }
      if (m.losses || m.unacked_deliveries) {
        fail(rep, "run " + std::to_string(k) + " step " + std::to_string(m.step) +
                      ": deletion and delivery disagree");
      }
    }
  }
  return rep;
}

VerifyReport verify_offline(const VerifyOptions& opt) {
  VerifyReport rep{"offline", 0, {}};
  const NetworkConfig cfg = opt.cfg.value_or(NetworkConfig{2, 2});
  const std::uint32_t n = cfg.n();
  const std::uint64_t expected_slots = cfg.d() == 1 ? 1 : 2 * ((cfg.d() + cfg.g() - 1) / cfg.g());
  auto check = [&](const Permutation& perm) {
    ++rep.checks;
    try {
      const OfflineResult r = route_offline(perm, cfg);
      if (r.stats.slots != expected_slots) {
        fail(rep, "offline routing used " + std::to_string(r.stats.slots) + " slots");
      }
    } catch (const InvariantViolation& e) {
      fail(rep, e.what());
    }
  };
  if (n <= 8) {
    Permutation perm = identity_permutation(n);
    do {
      check(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    const std::uint32_t runs = opt.budget ? opt.budget : 1000;
    for (std::uint32_t k = 0; k < runs; ++k) {
      check(uniform_permutation(n, derive_run_seed(opt.seed, k)));
    }
  }
  return rep;
}

VerifyReport verify_sorting(const VerifyOptions& opt) {
  VerifyReport rep{"sorting", 0, {}};
  const NetworkConfig cfg = opt.cfg.value_or(NetworkConfig{2, 2});
  const std::uint32_t n = cfg.n();
  const std::uint64_t expected_slots = sort_slot_count(cfg);
  auto check = [&](std::vector<KeyedRecord> input) {
    ++rep.checks;
    std::vector<std::int64_t> want;
    for (const auto& r : input) want.push_back(r.key);
    std::sort(want.begin(), want.end());
    const SortResult out = sort_on_pops(std::move(input), cfg);
    for (std::uint32_t i = 0; i < n; ++i) {
      if (out.records[i].key != want[i]) {
        fail(rep, "unsorted output at position " + std::to_string(i));
        break;
      }
    }
    if (out.slots != expected_slots) fail(rep, "unexpected slot count");
  };
  if (n <= 16) {
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      std::vector<KeyedRecord> input(n);
      for (std::uint32_t i = 0; i < n; ++i) input[i] = {(mask >> i) & 1, i};
      check(std::move(input));
    }
  } else {
    const std::uint32_t runs = opt.budget ? opt.budget : 1000;
    for (std::uint32_t k = 0; k < runs; ++k) {
      std::vector<KeyedRecord> input(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        const auto key = derive_uniform(RandomKey{opt.seed + k, i, 1, Purpose::Keys}, 4 * n);
        input[i] = {static_cast<std::int64_t>(key), i};
      }
      check(std::move(input));
    }
  }
  return rep;
}

VerifyReport verify_buffers(const VerifyOptions& opt) {
  VerifyReport rep{"buffers", 0, {}};
  const std::uint32_t runs = opt.budget ? opt.budget : 50;
  std::vector<NetworkConfig> configs;
  if (opt.cfg) {
    configs.push_back(*opt.cfg);
  } else {
    configs = {NetworkConfig{8, 8}, NetworkConfig{16, 4}};
  }
  for (const auto& cfg : configs) {
    for (StepProtocol protocol : {StepProtocol::Paper5, StepProtocol::Reversal6}) {
      for (bool immediate : {false, true}) {
        RouterOptions ro;
        ro.protocol = protocol;
        ro.loss_policy = LossPolicy::Repair;
        ro.state.immediate_exit = immediate;
        const std::uint32_t bound = immediate ? 2 : 3;
        for (std::uint32_t k = 0; k < runs; ++k) {
          ++rep.checks;
          const std::uint64_t seed = derive_run_seed(opt.seed, k);
          try {
            const RunStats s =
                route_randomized(uniform_permutation(cfg.n(), seed), cfg, ro, seed);
            if (s.max_buffer_occupancy > bound) fail(rep, "buffer bound exceeded");
          } catch (const InvariantViolation& e) {
            fail(rep, e.what());
          }
        }
      }
    }
  }
  return rep;
}

VerifyReport verify_exactly_once(const VerifyOptions& opt) {
  VerifyReport rep{"exactly-once", 0, {}};
  const NetworkConfig cfg = opt.cfg.value_or(NetworkConfig{16, 4});
  const std::uint32_t runs = opt.budget ? opt.budget : 100;
  const Permutation perm =
      cfg.d() > cfg.g() ? stress_permutation(cfg) : uniform_permutation(cfg.n(), opt.seed);
  RouterOptions ro;
  ro.protocol = StepProtocol::Reversal6;
  for (std::uint32_t k = 0; k < runs; ++k) {
    ++rep.checks;
    const std::uint64_t seed = derive_run_seed(opt.seed, k);
    try {
      RoutingState state(cfg, perm);
      const RunStats s = route_randomized(state, ro, seed);
      if (s.duplicates || s.losses) fail(rep, "duplicate or lost packet");
      for (ProcessorId j = 0; j < cfg.n(); ++j) {
        const auto got = state.received_at(j);
        if (!got || perm[*got] != j) {
          fail(rep, "processor " + std::to_string(j) + " holds the wrong packet");
          break;
        }
      }
    } catch (const InvariantViolation& e) {
      fail(rep, e.what());
    }
  }
  return rep;
}

}  // namespace

std::vector<std::string_view> verify_suite_names() {
  return {"prop1", "offline", "sorting", "buffers", "exactly-once"};
}

VerifyReport verify_suite(std::string_view name, const VerifyOptions& options) {
  if (name == "prop1") return verify_prop1(options);
  if (name == "offline") return verify_offline(options);
  if (name == "sorting") return verify_sorting(options);
  if (name == "buffers") return verify_buffers(options);
  if (name == "exactly-once") return verify_exactly_once(options);
  throw ValidationError("unknown verification suite '" + std::string(name) + "'");
}

}  // namespace pops
