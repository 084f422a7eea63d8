#pragma once

// Seeded experiment runs, report emission and invariant verification suites
// behind the command-line front end.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pops/analysis.hpp"
#include "pops/network.hpp"
#include "pops/permutation.hpp"
#include "pops/randomized_router.hpp"

namespace pops {

enum class OutputFormat : std::uint8_t { Csv, Json };

StepProtocol parse_protocol(std::string_view name);
std::string_view to_string(StepProtocol protocol) noexcept;
ScheduleMode parse_schedule(std::string_view name);
std::string_view to_string(ScheduleMode mode) noexcept;
OutputFormat parse_format(std::string_view name);

// Decimal or 0x-prefixed hexadecimal 64-bit unsigned. Throws ValidationError.
std::uint64_t parse_seed(std::string_view text);

struct ExperimentSpec {
  NetworkConfig cfg{1, 1};
  StepProtocol protocol = StepProtocol::Paper5;
  ParticipationSchedule schedule;
  PermSource perm_source = PermSource::Uniform;
  std::filesystem::path perm_file;
  std::uint32_t runs = 1;
  std::uint64_t seed = 0;
  LossPolicy loss_policy = LossPolicy::Abort;
  bool immediate_exit = false;
  unsigned jobs = 1;  // worker threads; 0 picks the hardware concurrency
};

// Throws ValidationError for runs == 0 and for unusable shapes.
void validate(const ExperimentSpec& spec);

inline constexpr std::string_view kCsvHeader =
    "n,d,g,protocol,seed_index,iterations,slots,conflicts_s1,conflicts_s2,"
    "conflicts_ack,conflicts_delivery,wall_ms";

// One line of the report. Per-run rows carry their run index in seed_index;
// the three aggregate rows carry "mean", "sigma" and "max" and hold the
// corresponding statistic in every numeric column.
struct ReportRow {
  std::uint32_t n = 0;
  std::uint32_t d = 0;
  std::uint32_t g = 0;
  std::string protocol;
  std::string seed_index;
  double iterations = 0;
  double slots = 0;
  double conflicts_s1 = 0;
  double conflicts_s2 = 0;
  double conflicts_ack = 0;
  double conflicts_delivery = 0;
  double wall_ms = 0;

  bool operator==(const ReportRow&) const = default;
};

struct ExperimentReport {
  std::vector<RunStats> runs;  // ordered by run index
  std::vector<double> wall_ms;
  RunAggregate aggregate;
  std::vector<ReportRow> rows;  // per-run rows followed by mean/sigma/max
};

ExperimentReport run_experiment(const ExperimentSpec& spec);

void write_csv(const std::vector<ReportRow>& rows, std::ostream& out);
void write_json(const std::vector<ReportRow>& rows, std::ostream& out);
std::string format_report(const std::vector<ReportRow>& rows, OutputFormat format);

// Writes to `path`, or to stdout when path is empty. Throws IoError.
void emit_report(const std::vector<ReportRow>& rows, OutputFormat format,
                 const std::filesystem::path& path);

std::vector<ReportRow> parse_csv(std::string_view text);
std::vector<ReportRow> parse_json(std::string_view text);

struct VerifyOptions {
  std::optional<NetworkConfig> cfg;  // suite default when unset
  std::uint32_t budget = 0;          // suite default when 0
  std::uint64_t seed = 1;
};

struct VerifyReport {
  std::string suite;
  std::uint64_t checks = 0;
  std::vector<std::string> failures;

  bool passed() const noexcept { return failures.empty(); }
};

// Suites: prop1, offline, sorting, buffers, exactly-once. Throws
// ValidationError for an unknown name.
VerifyReport verify_suite(std::string_view name, const VerifyOptions& options = {});

std::vector<std::string_view> verify_suite_names();

}  // namespace pops
