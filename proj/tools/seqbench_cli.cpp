#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seqbench/bench.hpp"
#include "seqbench/pipeline.hpp"
#include "seqbench/verify.hpp"

namespace {

using namespace seqbench;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::vector<MechanismKind> parse_mechanism_list(const std::string& arg) {
  std::vector<MechanismKind> kinds;
  for (const std::string& name : split_csv(arg)) {
    auto k = mechanism_from_string(name);
    if (!k) throw UsageError("--mechanisms: unknown mechanism '" + name + "'");
    kinds.push_back(*k);
  }
  if (kinds.empty()) throw UsageError("--mechanisms: empty list");
  return kinds;
}

std::vector<std::size_t> parse_length_list(const std::string& arg) {
  std::vector<std::size_t> lengths;
  for (const std::string& item : split_csv(arg)) {
    try {
      lengths.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw UsageError("--lengths: malformed value '" + item + "'");
    }
  }
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 1) throw UsageError("--lengths: values must be >= 1");
    if (i > 0 && lengths[i] <= lengths[i - 1])
      throw UsageError("--lengths: values must be strictly ascending");
  }
  return lengths;
}

std::string csv_stem(const std::string& path) {
  return path.size() > 4 && path.ends_with(".csv") ? path.substr(0, path.size() - 4) : path;
}

void print_fit_table(const std::vector<ScalingFit>& fits) {
  std::printf("%-10s %-10s %8s %8s %s\n", "mechanism", "mode", "slope", "r2", "class");
  for (const ScalingFit& f : fits) {
    std::printf("%-10s %-10s %8.3f %8.4f %s\n", to_string(f.mechanism), to_string(f.mode),
                f.slope, f.r2, to_string(f.classification));
  }
}

struct BenchFlags {
  std::string mechanisms = "sa,retnet,lightnet,gsa,fox,kda";
  std::string mode;
  std::string lengths = "512,1024,2048,4096,8192,16384";
  std::size_t dim = 256, heads = 4, slots = 64, repeats = 5, warmup = 2;
  std::uint64_t seed = 42;
  std::string out = "results.csv";
  std::size_t max_length_cap = 0;
  std::string config_file;
};

struct DemoFlags {
  std::string mechanism = "sa";
  std::string mode;
  std::uint64_t seed = 7;
  std::size_t speech_len = 200, text_len = 30, dim = 128, heads = 4, slots = 64;
  std::string config_file;
};

int run_bench(const BenchFlags& flags) {
  BenchConfig cfg;
  for (MechanismKind kind : parse_mechanism_list(flags.mechanisms)) {
    ExecutionMode mode = default_mode(kind);
    if (!flags.mode.empty()) {
      auto m = mode_from_string(flags.mode);
      if (!m) throw UsageError("--mode: unknown mode '" + flags.mode + "'");
      if (!supports(kind, *m))
        throw UsageError(std::string("--mode: ") + to_string(kind) + " does not support " +
                         to_string(*m) + " mode");
      mode = *m;
    }
    cfg.targets.emplace_back(kind, mode);
  }
  cfg.lengths = parse_length_list(flags.lengths);
  cfg.dim = flags.dim;
  cfg.heads = flags.heads;
  cfg.slots = flags.slots;
  cfg.repeats = flags.repeats;
  cfg.warmup = flags.warmup;
  cfg.seed = flags.seed;
  cfg.max_length_cap = flags.max_length_cap;
  try {
    cfg.validate();
  } catch (const ContractViolation& e) {
    throw UsageError(e.what());
  }

  SweepResult result = run_sweep(cfg);
  const std::vector<ScalingFit> fits = compute_fits(result.records);
  emit_csv(result.records, fits, flags.out);
  emit_plot_data(result.records, csv_stem(flags.out));
  std::printf("wrote %zu records to %s\n", result.records.size(), flags.out.c_str());
  for (const std::string& f : result.failures) std::printf("note: %s\n", f.c_str());
  print_fit_table(fits);
  return kExitOk;
}

int run_verify(const std::string& mechanism) {
  std::optional<MechanismKind> filter;
  if (!mechanism.empty()) {
    filter = mechanism_from_string(mechanism);
    if (!filter) throw UsageError("--mechanism: unknown mechanism '" + mechanism + "'");
  }
  const std::vector<PropertyResult> results = run_properties(filter);
  bool all_pass = true;
  for (const PropertyResult& r : results) {
    all_pass = all_pass && r.pass;
    std::printf("%s %-45s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
  }
  std::printf("%zu properties, %s\n", results.size(), all_pass ? "all passed" : "FAILURES");
  return all_pass ? kExitOk : kExitVerifyFail;
}

int run_demo(const DemoFlags& flags) {
  PipelineConfig cfg;
  auto kind = mechanism_from_string(flags.mechanism);
  if (!kind) throw UsageError("--mechanism: unknown mechanism '" + flags.mechanism + "'");
  cfg.mechanism = *kind;
  cfg.seed = flags.seed;
  cfg.speech_len = flags.speech_len;
  cfg.text_len = flags.text_len;
  cfg.model_dim = flags.dim;
  cfg.mechanism_config.model_dim = flags.dim;
  cfg.mechanism_config.num_heads = flags.heads;
  cfg.mechanism_config.slots = flags.slots;
  cfg.mode = default_mode(cfg.mechanism);
  if (!flags.mode.empty()) {
    auto m = mode_from_string(flags.mode);
    if (!m) throw UsageError("--mode: unknown mode '" + flags.mode + "'");
    if (!supports(cfg.mechanism, *m))
      throw UsageError(std::string("--mode: ") + to_string(cfg.mechanism) +
                       " does not support " + to_string(*m) + " mode");
    cfg.mode = *m;
  }
  try {
    cfg.validate();
  } catch (const ContractViolation& e) {
    throw UsageError(e.what());
  }

  ModelParams params = make_model_params(cfg);
  Rng root(cfg.seed);
  Rng speech_rng = root.child(10), text_rng = root.child(11);
  SequenceTensor speech = synth_features(speech_rng, cfg.speech_len, cfg.model_dim);
  SequenceTensor text =
      cfg.text_len > 0 ? synth_features(text_rng, cfg.text_len, cfg.model_dim) : SequenceTensor(0, cfg.model_dim);
  auto [logits, cls] = model_forward(speech, text, params, cfg.mode);

  std::printf("mechanism=%s mode=%s seed=%llu L=%zu D=%zu\n", to_string(cfg.mechanism),
              to_string(cfg.mode), static_cast<unsigned long long>(cfg.seed),
              cfg.speech_len + cfg.text_len, cfg.model_dim);
  std::printf("logits:");
  for (double v : logits) std::printf(" %.12g", v);
  std::printf("\nclass: %d\n", cls);
  return kExitOk;
}

int run_report(const std::string& path) {
  const std::vector<BenchRecord> records = load_csv(path);
  if (records.empty()) {
    std::printf("no records in %s\n", path.c_str());
    return kExitOk;
  }
  const auto lat = median_latencies(records);
  const auto mem = peak_memory_series(records);
  print_fit_table(compute_fits(records));

  // sa-vs-x ratios at the largest common length
  for (const auto& [sa_key, sa_series] : lat) {
    if (sa_key.first != MechanismKind::SA) continue;
    for (const auto& [key, series] : lat) {
      if (key.first == MechanismKind::SA) continue;
      std::size_t common = 0;
      for (const auto& [len, lat_x] : series)
        if (sa_series.count(len)) common = std::max(common, len);
      if (common == 0) continue;
      std::printf("sa/%s at L=%zu: latency x%.2f, peak memory x%.2f\n", to_string(key.first),
                  common, sa_series.at(common) / series.at(common),
                  static_cast<double>(mem.at(sa_key).at(common)) /
                      static_cast<double>(mem.at(key).at(common)));
    }
  }
  bool has_fox = false;
  for (const BenchRecord& r : records) has_fox = has_fox || r.mechanism == MechanismKind::FoX;
  if (has_fox) {
    std::printf(
        "note: fox runs as a naive quadratic kernel here (time and memory); fused\n"
        "implementations of the same operator scale linearly in memory instead.\n");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal sequence-operator library and efficiency benchmark"};
  app.require_subcommand(1);

  BenchFlags bench_flags;
  CLI::App* bench = app.add_subcommand("bench", "run the latency/memory sweep");
  bench->add_option("--mechanisms", bench_flags.mechanisms, "comma list of mechanisms");
  bench->add_option("--mode", bench_flags.mode, "force parallel|recurrent for all mechanisms");
  bench->add_option("--lengths", bench_flags.lengths, "comma list, strictly ascending");
  bench->add_option("--dim", bench_flags.dim, "model dimension");
  bench->add_option("--heads", bench_flags.heads, "attention heads");
  bench->add_option("--slots", bench_flags.slots, "gsa slot count");
  bench->add_option("--repeats", bench_flags.repeats, "timed repeats per length");
  bench->add_option("--warmup", bench_flags.warmup, "unmeasured warmup runs");
  bench->add_option("--seed", bench_flags.seed, "workload seed");
  bench->add_option("--out", bench_flags.out, "output CSV path");
  bench->add_option("--max-length-cap", bench_flags.max_length_cap,
                    "skip lengths above this cap (0 = uncapped)");
  bench->add_option("--config", bench_flags.config_file, "key=value config file");

  std::string verify_mechanism;
  CLI::App* verify = app.add_subcommand("verify", "run the property suite");
  verify->add_option("--mechanism", verify_mechanism, "restrict to one mechanism's properties");

  DemoFlags demo_flags;
  CLI::App* demo = app.add_subcommand("demo", "one end-to-end forward pass");
  demo->add_option("--mechanism", demo_flags.mechanism, "seq2seq mechanism");
  demo->add_option("--mode", demo_flags.mode, "parallel|recurrent");
  demo->add_option("--seed", demo_flags.seed, "master seed");
  demo->add_option("--speech-len", demo_flags.speech_len, "speech feature rows");
  demo->add_option("--text-len", demo_flags.text_len, "text feature rows (0 = speech only)");
  demo->add_option("--dim", demo_flags.dim, "model dimension");
  demo->add_option("--heads", demo_flags.heads, "attention heads");
  demo->add_option("--slots", demo_flags.slots, "gsa slot count");
  demo->add_option("--config", demo_flags.config_file, "key=value config file");

  std::string report_in;
  CLI::App* report = app.add_subcommand("report", "summarize an existing results CSV");
  report->add_option("--in", report_in, "CSV produced by bench")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    // config file values fill in flags the user did not pass explicitly
    auto merge_config = [](CLI::App* sub, const std::string& path) {
      const KeyValueConfig kv = parse_key_value_file(path);
      return [sub, kv](const char* flag, const char* key, auto& target) {
        auto it = kv.find(key);
        if (it == kv.end() || sub->count(flag) > 0) return;
        std::istringstream(it->second) >> target;
      };
    };
    if (bench->parsed() && !bench_flags.config_file.empty()) {
      auto fill = merge_config(bench, bench_flags.config_file);
      fill("--mechanisms", "mechanism", bench_flags.mechanisms);
      fill("--mode", "mode", bench_flags.mode);
      fill("--lengths", "lengths", bench_flags.lengths);
      fill("--dim", "dim", bench_flags.dim);
      fill("--heads", "heads", bench_flags.heads);
      fill("--slots", "slots", bench_flags.slots);
      fill("--repeats", "repeats", bench_flags.repeats);
      fill("--warmup", "warmup", bench_flags.warmup);
      fill("--seed", "seed", bench_flags.seed);
      fill("--out", "out", bench_flags.out);
    }
    if (demo->parsed() && !demo_flags.config_file.empty()) {
      auto fill = merge_config(demo, demo_flags.config_file);
      fill("--mechanism", "mechanism", demo_flags.mechanism);
      fill("--mode", "mode", demo_flags.mode);
      fill("--seed", "seed", demo_flags.seed);
      fill("--speech-len", "speech_len", demo_flags.speech_len);
      fill("--text-len", "text_len", demo_flags.text_len);
      fill("--dim", "dim", demo_flags.dim);
      fill("--heads", "heads", demo_flags.heads);
      fill("--slots", "slots", demo_flags.slots);
    }
    if (bench->parsed()) return run_bench(bench_flags);
    if (verify->parsed()) return run_verify(verify_mechanism);
    if (demo->parsed()) return run_demo(demo_flags);
    if (report->parsed()) return run_report(report_in);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const CsvError& e) {
    if (e.line > 0)
      std::fprintf(stderr, "error: %s (line %zu)\n", e.what(), e.line);
    else
      std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
