#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "seqbench/mechanisms.hpp"
#include "seqbench/rng.hpp"

namespace seqbench {

struct BenchConfig {
  std::vector<std::pair<MechanismKind, ExecutionMode>> targets;
  std::vector<std::size_t> lengths;  // strictly ascending
  std::size_t dim = 256;
  std::size_t heads = 4;
  std::size_t slots = 64;
  std::size_t repeats = 5;
  std::size_t warmup = 2;
  std::uint64_t seed = 42;
  std::size_t max_length_cap = 0;  // 0 = uncapped

  void validate() const;
};

struct BenchRecord {
  MechanismKind mechanism;
  ExecutionMode mode;
  std::size_t seq_len = 0;
  std::size_t model_dim = 0;
  std::size_t heads = 0;
  std::size_t repeat = 0;
  double latency_s = 0.0;
  std::size_t peak_bytes = 0;
};

struct SweepResult {
  std::vector<BenchRecord> records;
  std::vector<std::string> failures;  // lengths skipped after allocation failure
};

enum class ScalingClass { Linear, Quadratic, Indeterminate };
const char* to_string(ScalingClass c);

struct ScalingFit {
  MechanismKind mechanism;
  ExecutionMode mode;
  double slope = 0.0;
  double r2 = 0.0;
  ScalingClass classification = ScalingClass::Indeterminate;
};

// Timed forwards on fresh seeded inputs; warmups are unmeasured. Only the
// seq2seq forward is inside the timed region.
std::vector<double> measure_latency(const MechanismParams& params, ExecutionMode mode,
                                    std::size_t seq_len, std::size_t repeats,
                                    std::size_t warmup, const Rng& workload_rng);

// High-water mark of accounted scratch bytes over one forward; parameters
// and the input/output tensors are excluded.
std::size_t measure_peak_memory(const MechanismParams& params, ExecutionMode mode,
                                std::size_t seq_len, const Rng& workload_rng);

SweepResult run_sweep(const BenchConfig& config);

// OLS slope of log(latency) vs log(L); needs at least 4 points.
// slope <= 1.25 -> linear, slope >= 1.6 -> quadratic, else indeterminate.
ScalingFit fit_scaling_exponent(const std::vector<std::size_t>& lengths,
                                const std::vector<double>& median_latencies);

double median(std::vector<double> values);

// Per (mechanism, mode): length -> median latency seconds, in record order.
using SeriesKey = std::pair<MechanismKind, ExecutionMode>;
std::map<SeriesKey, std::map<std::size_t, double>> median_latencies(
    const std::vector<BenchRecord>& records);
std::map<SeriesKey, std::map<std::size_t, std::size_t>> peak_memory_series(
    const std::vector<BenchRecord>& records);

// Fits for every series with >= 4 lengths.
std::vector<ScalingFit> compute_fits(const std::vector<BenchRecord>& records);

struct CsvError : std::runtime_error {
  std::size_t line;
  CsvError(const std::string& msg, std::size_t line_)
      : std::runtime_error(msg), line(line_) {}
};

void emit_csv(const std::vector<BenchRecord>& records, const std::vector<ScalingFit>& fits,
              const std::string& path);
std::vector<BenchRecord> load_csv(const std::string& path);

// Four panel files (<stem>_panel_{a,b,c,d}.dat): latency/memory vs length,
// full set and the same with sa excluded.
void emit_plot_data(const std::vector<BenchRecord>& records, const std::string& stem);

}  // namespace seqbench
