#include "seqbench/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <new>
#include <sstream>
#include <tuple>

#include "seqbench/pipeline.hpp"

namespace seqbench {

namespace {

// Keyed workload stream so two sweeps with the same seed see identical inputs.
Rng workload_stream(const Rng& base, MechanismKind kind, std::size_t seq_len,
                    std::size_t repeat) {
  const std::uint64_t tag = (static_cast<std::uint64_t>(kind) << 48) ^
                            (static_cast<std::uint64_t>(seq_len) << 16) ^ repeat;
  return base.child(tag);
}

std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

int record_order(const BenchRecord& r) { return static_cast<int>(r.mechanism); }

}  // namespace

const char* to_string(ScalingClass c) {
  switch (c) {
    case ScalingClass::Linear: return "linear";
    case ScalingClass::Quadratic: return "quadratic";
    case ScalingClass::Indeterminate: return "indeterminate";
  }
  return "?";
}

void BenchConfig::validate() const {
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 1) throw ContractViolation("bench: lengths must be >= 1");
    if (i > 0 && lengths[i] <= lengths[i - 1])
      throw ContractViolation("bench: lengths must be strictly ascending");
  }
  if (repeats < 3) throw ContractViolation("bench: repeats must be >= 3");
  if (dim == 0 || heads == 0 || dim % heads != 0)
    throw ContractViolation("bench: dim must be positive and divisible by heads");
  for (const auto& [kind, mode] : targets) {
    if (!supports(kind, mode))
      throw ContractViolation(std::string("bench: ") + to_string(kind) +
                              " does not support " + to_string(mode) + " mode");
  }
}

std::vector<double> measure_latency(const MechanismParams& params, ExecutionMode mode,
                                    std::size_t seq_len, std::size_t repeats,
                                    std::size_t warmup, const Rng& workload_rng) {
  using clock = std::chrono::steady_clock;
  std::vector<double> latencies;
  latencies.reserve(repeats);
  for (std::size_t rep = 0; rep < warmup + repeats; ++rep) {
    Rng r = workload_stream(workload_rng, params.kind, seq_len, rep);
    SequenceTensor u = synth_features(r, seq_len, params.config.model_dim);
    const auto t0 = clock::now();
    SequenceTensor h = forward(params, u, mode);
    const auto t1 = clock::now();
    if (rep >= warmup)
      latencies.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  return latencies;
}

std::size_t measure_peak_memory(const MechanismParams& params, ExecutionMode mode,
                                std::size_t seq_len, const Rng& workload_rng) {
  Rng r = workload_stream(workload_rng, params.kind, seq_len, 0);
  SequenceTensor u = synth_features(r, seq_len, params.config.model_dim);
  accountant().reset_peak();
  const std::size_t before = accountant().current;
  SequenceTensor h = forward(params, u, mode);
  return accountant().peak - before;
}

SweepResult run_sweep(const BenchConfig& config) {
  config.validate();
  SweepResult result;
  const Rng base(config.seed);
  for (const auto& [kind, mode] : config.targets) {
    MechanismConfig mc;
    mc.model_dim = config.dim;
    mc.num_heads = config.heads;
    mc.slots = config.slots;
    mc.seed = Rng(config.seed).child(static_cast<std::uint64_t>(kind)).seed();
    const MechanismParams params = make_params(kind, mc);
    for (std::size_t L : config.lengths) {
      if (config.max_length_cap > 0 && L > config.max_length_cap) {
        result.failures.push_back(std::string(to_string(kind)) + "/" + to_string(mode) +
                                  " L=" + std::to_string(L) + ": above length cap, skipped");
        continue;
      }
      try {
        const std::size_t peak = measure_peak_memory(params, mode, L, base);
        const std::vector<double> lats =
            measure_latency(params, mode, L, config.repeats, config.warmup, base);
        for (std::size_t rep = 0; rep < lats.size(); ++rep) {
          result.records.push_back(
              {kind, mode, L, config.dim, config.heads, rep, lats[rep], peak});
        }
      } catch (const std::bad_alloc&) {
        result.failures.push_back(std::string(to_string(kind)) + "/" + to_string(mode) +
                                  " L=" + std::to_string(L) +
                                  ": allocation failure, sweep continues");
      }
    }
  }
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const BenchRecord& a, const BenchRecord& b) {
                     return std::tuple(record_order(a), static_cast<int>(a.mode), a.seq_len,
                                       a.repeat) < std::tuple(record_order(b),
                                                              static_cast<int>(b.mode),
                                                              b.seq_len, b.repeat);
                   });
  return result;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractViolation("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ScalingFit fit_scaling_exponent(const std::vector<std::size_t>& lengths,
                                const std::vector<double>& median_latencies) {
  if (lengths.size() < 4)
    throw ContractViolation("fit_scaling_exponent: need at least 4 points");
  if (lengths.size() != median_latencies.size())
    throw ContractViolation("fit_scaling_exponent: size mismatch");
  const std::size_t n = lengths.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (lengths[i] < 1 || median_latencies[i] <= 0.0)
      throw ContractViolation("fit_scaling_exponent: points must be positive");
    x[i] = std::log(static_cast<double>(lengths[i]));
    y[i] = std::log(median_latencies[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  if (fit.slope <= 1.25)
    fit.classification = ScalingClass::Linear;
  else if (fit.slope >= 1.6)
    fit.classification = ScalingClass::Quadratic;
  else
    fit.classification = ScalingClass::Indeterminate;
  return fit;
}

std::map<SeriesKey, std::map<std::size_t, double>> median_latencies(
    const std::vector<BenchRecord>& records) {
  std::map<SeriesKey, std::map<std::size_t, std::vector<double>>> grouped;
  for (const BenchRecord& r : records)
    grouped[{r.mechanism, r.mode}][r.seq_len].push_back(r.latency_s);
  std::map<SeriesKey, std::map<std::size_t, double>> out;
  for (auto& [key, by_len] : grouped)
    for (auto& [len, lats] : by_len) out[key][len] = median(std::move(lats));
  return out;
}

std::map<SeriesKey, std::map<std::size_t, std::size_t>> peak_memory_series(
    const std::vector<BenchRecord>& records) {
  std::map<SeriesKey, std::map<std::size_t, std::size_t>> out;
  for (const BenchRecord& r : records) out[{r.mechanism, r.mode}][r.seq_len] = r.peak_bytes;
  return out;
}

std::vector<ScalingFit> compute_fits(const std::vector<BenchRecord>& records) {
  std::vector<ScalingFit> fits;
  for (const auto& [key, by_len] : median_latencies(records)) {
    if (by_len.size() < 4) continue;
    std::vector<std::size_t> lengths;
    std::vector<double> medians;
    for (const auto& [len, lat] : by_len) {
      lengths.push_back(len);
      medians.push_back(lat);
    }
    ScalingFit fit = fit_scaling_exponent(lengths, medians);
    fit.mechanism = key.first;
    fit.mode = key.second;
    fits.push_back(fit);
  }
  return fits;
}

void emit_csv(const std::vector<BenchRecord>& records, const std::vector<ScalingFit>& fits,
              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot open for writing: " + path, 0);
  out << "mechanism,mode,seq_len,model_dim,heads,repeat,latency_ms,peak_bytes\n";
  for (const BenchRecord& r : records) {
    out << to_string(r.mechanism) << ',' << to_string(r.mode) << ',' << r.seq_len << ','
        << r.model_dim << ',' << r.heads << ',' << r.repeat << ','
        << format_g6(r.latency_s * 1e3) << ',' << r.peak_bytes << '\n';
  }
  if (!out) throw CsvError("write failure: " + path, 0);

  const std::string fits_path = path.size() > 4 && path.ends_with(".csv")
                                    ? path.substr(0, path.size() - 4) + "_fits.csv"
                                    : path + "_fits.csv";
  std::ofstream fout(fits_path);
  if (!fout) throw CsvError("cannot open for writing: " + fits_path, 0);
  fout << "mechanism,mode,slope,r2,class\n";
  for (const ScalingFit& f : fits) {
    fout << to_string(f.mechanism) << ',' << to_string(f.mode) << ',' << format_g6(f.slope)
         << ',' << format_g6(f.r2) << ',' << to_string(f.classification) << '\n';
  }
}

std::vector<BenchRecord> load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open: " + path, 0);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw CsvError("empty file: " + path, 0);
  ++lineno;
  if (line != "mechanism,mode,seq_len,model_dim,heads,repeat,latency_ms,peak_bytes")
    throw CsvError("unexpected header", lineno);
  std::vector<BenchRecord> records;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 8) throw CsvError("expected 8 fields", lineno);
    BenchRecord r;
    auto kind = mechanism_from_string(fields[0]);
    auto mode = mode_from_string(fields[1]);
    if (!kind) throw CsvError("unknown mechanism '" + fields[0] + "'", lineno);
    if (!mode) throw CsvError("unknown mode '" + fields[1] + "'", lineno);
    r.mechanism = *kind;
    r.mode = *mode;
    try {
      r.seq_len = std::stoull(fields[2]);
      r.model_dim = std::stoull(fields[3]);
      r.heads = std::stoull(fields[4]);
      r.repeat = std::stoull(fields[5]);
      r.latency_s = std::stod(fields[6]) * 1e-3;
      r.peak_bytes = std::stoull(fields[7]);
    } catch (const std::exception&) {
      throw CsvError("malformed numeric field", lineno);
    }
    if (r.latency_s <= 0.0) throw CsvError("latency must be positive", lineno);
    records.push_back(r);
  }
  return records;
}

void emit_plot_data(const std::vector<BenchRecord>& records, const std::string& stem) {
  const auto lat = median_latencies(records);
  const auto mem = peak_memory_series(records);

  auto write_panel = [&](char panel, bool memory, bool exclude_sa) {
    const std::string path = stem + "_panel_" + panel + ".dat";
    std::ofstream out(path);
    if (!out) throw CsvError("cannot open for writing: " + path, 0);
    out << "# panel " << panel << ": " << (memory ? "peak scratch bytes" : "median latency (ms)")
        << " vs sequence length" << (exclude_sa ? ", sa excluded" : "") << "\n";
    bool any = false;
    for (const auto& [key, by_len] : lat) {
      if (exclude_sa && key.first == MechanismKind::SA) continue;
      any = true;
      out << "# mechanism=" << to_string(key.first) << " mode=" << to_string(key.second)
          << "\n";
      for (const auto& [len, latency] : by_len) {
        if (memory) {
          out << len << ' ' << mem.at(key).at(len) << '\n';
        } else {
          out << len << ' ' << format_g6(latency * 1e3) << '\n';
        }
      }
      out << '\n';
    }
    if (!any) out << "# no matching records for this panel\n";
  };

  write_panel('a', false, false);
  write_panel('b', true, false);
  write_panel('c', false, true);
  write_panel('d', true, true);
}

}  // namespace seqbench
