// flashpuf: command-line front end for the flash PUF simulator.
//
// Exit status: 0 success, 1 runtime error, 2 usage error, 3 key
// reconstruction failure (helper data and response do not agree).

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "flashpuf/calibration.hpp"
#include "flashpuf/dump_file.hpp"
#include "flashpuf/errors.hpp"
#include "flashpuf/experiment.hpp"
#include "flashpuf/json_io.hpp"
#include "flashpuf/keyforge.hpp"
#include "flashpuf/metrics.hpp"
#include "flashpuf/plan.hpp"
#include "flashpuf/plot_data.hpp"

namespace fs = std::filesystem;
using namespace flashpuf;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitReconstructionFailure = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("malformed JSON in " + path + ": " + e.what());
  }
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xF]);
  }
  return out;
}

struct ResponseSource {
  std::string raw;
  std::string dump;
  std::size_t trial = 0;
  std::size_t page = 0;  // 0 selects the whole block response

  void add_options(CLI::App* app) {
    app->add_option("--response", raw, "Raw response bytes");
    app->add_option("--dump", dump, "FPUF dump to take the response from");
    app->add_option("--trial", trial, "Trial within the dump");
    app->add_option("--page", page, "Victim page within the dump (default: whole block)");
  }

  void check() const {
    if (raw.empty() == dump.empty()) throw UsageError("give exactly one of --response or --dump");
  }

  std::vector<std::uint8_t> load() const {
    check();
    if (!raw.empty()) return dump::read_bytes(raw);
    const auto set = dump::read_file(dump);
    if (trial >= set.trials_per_condition) throw UsageError("--trial outside the dump");
    if (page == 0) return block_response(set, trial);
    if (!is_victim_page(set.geometry, page)) throw UsageError("--page is not a victim page");
    return set.at(trial, page).payload;
  }

  std::vector<double> stability() const {
    if (dump.empty()) throw UsageError("--stability needs --dump");
    const auto set = dump::read_file(dump);
    auto map = bit_stability_map(set);
    if (page == 0) return map;
    if (!is_victim_page(set.geometry, page)) throw UsageError("--page is not a victim page");
    const std::size_t bits = set.geometry.bits_per_page();
    const auto first = map.begin() + static_cast<std::ptrdiff_t>((page / 2) * bits);
    return {first, first + static_cast<std::ptrdiff_t>(bits)};
  }
};

void print_header(const dump::DumpHeader& h) {
  const auto cond = from_fixed_point(h.condition);
  std::cout << "format_version: " << h.version << '\n'
            << "geometry: " << h.geometry.pages_per_block << " pages/block, "
            << h.geometry.bytes_per_page << " bytes/page, " << h.geometry.blocks_per_device
            << " block(s)\n"
            << "block: " << h.block << '\n'
            << "device_seed: " << h.device_seed << '\n'
            << "temperature_c: " << fixed6(cond.temperature_celsius) << '\n'
            << "supply_voltage_v: " << fixed6(cond.supply_voltage) << '\n'
            << "regulator: " << (cond.regulator_enabled ? "on" : "off") << '\n'
            << "trials: " << h.trial_count << '\n'
            << "payload_bytes: " << h.payload_bytes() << '\n'
            << "halt_cycles:";
  for (auto c : h.halt_cycles) std::cout << ' ' << c;
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NAND flash program-disturb PUF simulator and evaluation workbench", "flashpuf"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<unsigned> threads;
  bool quiet = false;
  auto common = [&](CLI::App* cmd, bool with_seed) {
    cmd->add_flag("--quiet", quiet, "Suppress progress output");
    if (with_seed) cmd->add_option("--seed", seed, "Seed override (beats config and FLASHPUF_SEED)");
  };

  auto* simulate = app.add_subcommand("simulate", "Run one experiment plan");
  simulate->add_option("--config", config, "JSON experiment plan")->required();
  simulate->add_option("--out", out, "Output directory (overrides output_dir)");
  simulate->add_option("--trials", trials, "Trials per condition");
  simulate->add_option("--threads", threads, "Worker threads");
  common(simulate, true);

  auto* calibrate_cmd = app.add_subcommand("calibrate", "Search model parameters for the targets");
  calibrate_cmd->add_option("--config", config, "JSON with optional \"targets\" and \"search\"");
  calibrate_cmd->add_option("--out", out, "Output directory")->required();
  calibrate_cmd->add_option("--trials", trials, "Trials per simulated measurement");
  calibrate_cmd->add_option("--threads", threads, "Worker threads");
  common(calibrate_cmd, true);

  std::vector<std::string> inputs;
  double bias_threshold = kDefaultBiasThreshold;
  auto* metrics_cmd = app.add_subcommand("metrics", "Recompute reports from FPUF dumps");
  metrics_cmd->add_option("inputs", inputs, "Dump files or directories")->required();
  metrics_cmd->add_option("--out", out, "Output directory")->required();
  metrics_cmd->add_option("--bias-threshold", bias_threshold, "Per-page bias flag threshold");
  common(metrics_cmd, false);

  auto* plot_cmd = app.add_subcommand("plotdata", "Emit plot-ready CSV series from reports");
  plot_cmd->add_option("inputs", inputs, "Report files or directories")->required();
  plot_cmd->add_option("--out", out, "Output directory")->required();
  common(plot_cmd, false);

  ResponseSource source;
  unsigned repetition = 9;
  unsigned key_bits = 128;
  bool use_stability = false;
  auto* enroll_cmd = app.add_subcommand("enroll", "Derive a key and helper data from a response");
  source.add_options(enroll_cmd);
  enroll_cmd->add_option("--repetition", repetition, "Repetition factor (odd)");
  enroll_cmd->add_option("--key-bits", key_bits, "Key length in bits");
  enroll_cmd->add_flag("--stability", use_stability, "Pick stable bits using the dump's trials");
  enroll_cmd->add_option("--out", out, "Output directory for helper.fphd and key.hex")->required();
  common(enroll_cmd, true);

  std::string helper_path;
  auto* reconstruct_cmd = app.add_subcommand("reconstruct", "Recover a key from helper data");
  source.add_options(reconstruct_cmd);
  reconstruct_cmd->add_option("--helper", helper_path, "Helper data file")->required();
  reconstruct_cmd->add_option("--out", out, "Directory to write key.hex to");
  common(reconstruct_cmd, false);

  std::string dump_path;
  auto* info_cmd = app.add_subcommand("dump-info", "Print the header of an FPUF dump");
  info_cmd->add_option("dump", dump_path, "Dump file")->required();

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
    if (*simulate) {
      ExperimentPlan plan = plan_from_json(load_json(config));
      apply_seed_overrides(plan, seed, seed_from_environment());
      if (!out.empty()) plan.output_dir = out;
      if (trials) plan.trials_per_condition = *trials;
      if (threads) plan.threads = *threads;
      const auto result = run_plan(plan, !quiet);
      if (!quiet) {
        std::cout << "wrote " << result.dumps.size() << " dumps, " << result.reports.size()
                  << " reports, " << result.summary_csv.string() << '\n';
      }
    } else if (*calibrate_cmd) {
      CalibrationTargets targets;
      CalibrationSearch search;
      if (!config.empty()) {
        const auto j = load_json(config);
        json_io::require_object(j, "calibration");
        json_io::reject_unknown_keys(j, "calibration", {"targets", "search"});
        if (j.contains("targets")) targets = targets_from_json(j.at("targets"));
        if (j.contains("search")) search = search_from_json(j.at("search"));
      }
      if (seed) search.seeds = {*seed};
      if (trials) search.trials = *trials;
      if (threads) search.threads = *threads;
      const auto result = calibrate(targets, search, !quiet);
      ensure_directory(out);
      const fs::path path = fs::path(out) / "calibrated_params.json";
      write_text(path, calibration_artifact(result, targets, search).dump(2) + "\n");
      if (!quiet) std::cout << "wrote " << path.string() << '\n';
    } else if (*metrics_cmd) {
      std::vector<fs::path> dumps;
      for (const auto& in : inputs) {
        for (auto& p : list_files(in, ".fpuf")) dumps.push_back(p);
      }
      AnalysisOptions options;
      options.bias_threshold = bias_threshold;
      const auto result = recompute_metrics(dumps, out, options);
      if (!quiet) std::cout << "wrote " << result.reports.size() << " reports\n";
    } else if (*plot_cmd) {
      std::vector<fs::path> reports;
      for (const auto& in : inputs) {
        for (auto& p : list_files(in, ".json")) reports.push_back(p);
      }
      const auto files = emit_plot_data(reports, out);
      if (!quiet) std::cout << "wrote plot data to " << files.temperature_fhw.parent_path() << '\n';
    } else if (*enroll_cmd) {
      const auto response = source.load();
      std::optional<std::vector<double>> stability;
      if (use_stability) stability = source.stability();
      if (!seed) seed = seed_from_environment();
      std::optional<std::span<const double>> stability_view;
      if (stability) stability_view = std::span<const double>(*stability);
      const auto enrollment =
          keyforge::enroll(response, stability_view, {repetition, key_bits}, seed);
      ensure_directory(out);
      dump::write_bytes(fs::path(out) / "helper.fphd", enrollment.helper.serialize());
      write_text(fs::path(out) / "key.hex", to_hex(enrollment.key.key) + "\n");
      if (!quiet) std::cout << to_hex(enrollment.key.key) << '\n';
    } else if (*reconstruct_cmd) {
      const auto helper = keyforge::HelperData::parse(dump::read_bytes(helper_path));
      const auto response = source.load();
      const auto key = keyforge::reconstruct(response, helper);
      if (!key) {
        std::cerr << "flashpuf: reconstruction failure: response does not match helper data\n";
        return kExitReconstructionFailure;
      }
      if (!out.empty()) {
        ensure_directory(out);
        write_text(fs::path(out) / "key.hex", to_hex(key->key) + "\n");
      }
      if (!quiet) std::cout << to_hex(key->key) << '\n';
    } else if (*info_cmd) {
      print_header(dump::read_header(dump_path));
    }
  } catch (const UsageError& e) {
    std::cerr << "flashpuf: usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "flashpuf: config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "flashpuf: header-parse error: " << e.what() << '\n';
    return kExitError;
  } catch (const CalibrationError& e) {
    std::cerr << "flashpuf: " << e.what() << "\nbest found: " << e.best_report() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "flashpuf: error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}
