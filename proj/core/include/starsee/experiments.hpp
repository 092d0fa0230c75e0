#pragma once

#include "starsee/channel.hpp"
#include "starsee/optimizer.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace starsee::exp {

enum class SweepAxis { None, PMax, M, N, KappaG, RisX };
const char* to_string(SweepAxis a);
SweepAxis axis_from_string(const std::string& s);

// A run label: one of ES, MS, SF, TS, optionally prefixed with "OMA-".
struct RunKind {
  Protocol protocol = Protocol::ES;
  bool oma = false;
  std::string label() const;
  static RunKind parse(const std::string& s);
};

struct ExperimentConfig {
  SystemParams params;
  Geometry geometry;
  UncertaintyConfig uncertainty;
  std::vector<RunKind> runs;
  SweepAxis axis = SweepAxis::None;
  // In display units: dBm for PMax, squared kappa for KappaG, metres for RisX.
  std::vector<double> values{0.0};
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "results";
  int workers = 1;
  bool traces = false;
  AOConfig ao;

  void validate() const;
};

// JSON with sections system, geometry, uncertainty, sweep, run. Powers and
// gains are strings with a unit ("40 dBm", "10 dBW", "3 dB", "0.5 W").
// Throws std::invalid_argument naming the offending field.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// "40 dBm" -> 10 W; "3 dB" -> 1.995 (ratio); "-30 dB" -> 1e-3.
double parse_power(const std::string& s, const std::string& field);
double parse_ratio(const std::string& s, const std::string& field);

// desk: N=3, M=8, seeds 1..5; full: N=5, M=20.
void apply_profile(ExperimentConfig& cfg, const std::string& profile);

// Parameters of one sweep point.
void apply_sweep_value(SweepAxis axis, double value, SystemParams& p, Geometry& g, UncertaintyConfig& u);

struct ResultRow {
  std::string protocol;
  std::string axis;
  double value = 0.0;
  std::uint64_t seed = 0;
  double see = 0.0;
  double ssr = 0.0;
  double power = 0.0;
  int iterations = 0;
  bool converged = false;
  bool feasible = false;
  std::vector<double> beta_r;
  std::vector<double> beta_t;
  double millis = 0.0;  // not written to the results file
  std::string note;

  std::string key() const;  // protocol|value|seed
};

// Fixed column order of results.csv.
const std::vector<std::string>& csv_columns();
std::string csv_header();
std::string to_csv(const ResultRow& r);
ResultRow from_csv(const std::string& line);
std::vector<ResultRow> read_csv(const std::string& path);

// Runs one (kind, sweep value, seed) cell. Trace lines go to `trace` when non-null.
ResultRow run_cell(const ExperimentConfig& cfg, const RunKind& kind, double value, std::uint64_t seed,
                   std::vector<TraceRecord>* trace = nullptr);

// Writes out_dir/results.csv (deterministic bytes, canonical row order) and
// out_dir/timing.csv. Rows already present in results.csv are skipped.
// The callback sees each row once it is written.
std::vector<ResultRow> run_campaign(const ExperimentConfig& cfg,
                                    const std::function<void(const ResultRow&)>& on_row = {});

struct SummaryEntry {
  std::string protocol;
  double value = 0.0;
  int runs = 0;
  int feasible = 0;
  double mean = 0.0;  // SEE over feasible runs
  double se = 0.0;
};

struct AmplitudeReport {
  std::vector<double> beta_r;  // per element, mean over converged ES rows
  std::vector<double> beta_t;
  double mean_r = 0.0;
  double mean_t = 0.0;
  int rows = 0;
};

double mean(const std::vector<double>& v);
double standard_error(const std::vector<double>& v);

std::vector<SummaryEntry> summarize(const std::vector<ResultRow>& rows);
AmplitudeReport amplitude_report(const std::vector<ResultRow>& rows);

// summary.csv, see.svg (one curve per protocol) and amplitudes.svg into dir.
void write_summary(const std::vector<ResultRow>& rows, const std::string& dir);

void write_trace(const std::vector<TraceRecord>& trace, const std::string& path);

}  // namespace starsee::exp
