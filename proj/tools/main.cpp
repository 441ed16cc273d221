// sectorcast CLI: synthetic data generation, per-sector/aggregated
// training, frozen-model forward backtests, and report extraction.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sectorcast/pipeline.hpp"
#include "sectorcast/synthetic.hpp"

namespace {

using nlohmann::json;
using namespace sectorcast;

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitConfigError = 2;

YearQuarter parse_quarter_flag(const std::string& text) {
  auto q = parse_year_quarter(text);
  if (!q) throw ConfigError("cannot parse quarter '" + text + "' (want e.g. 2009Q1)");
  return *q;
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  if (j.contains("input")) config.input_path = j["input"].get<std::string>();
  if (j.contains("mode")) {
    const auto mode = j["mode"].get<std::string>();
    if (mode == "per_sector") config.mode = RunMode::per_sector;
    else if (mode == "aggregated") config.mode = RunMode::aggregated;
    else throw ConfigError("config: unknown mode '" + mode + "'");
  }
  if (j.contains("train_fraction")) config.train_fraction = j["train_fraction"].get<double>();
  if (j.contains("gamma_grid")) config.gamma_grid = j["gamma_grid"].get<std::vector<double>>();
  if (j.contains("rvm_threshold")) config.rvm_threshold = j["rvm_threshold"].get<double>();
  if (j.contains("rvm_threshold_overrides"))
    for (const auto& [sector, thr] : j["rvm_threshold_overrides"].items()) {
      auto code = parse_sector(sector);
      if (!code) throw ConfigError("config: unknown sector '" + sector + "'");
      config.rvm_threshold_overrides[*code] = thr.get<double>();
    }
  if (j.contains("relief_top_m")) {
    config.relief_policy.top_m = j["relief_top_m"].get<int>();
    config.relief_policy.threshold.reset();
  }
  if (j.contains("relief_threshold")) {
    config.relief_policy.threshold = j["relief_threshold"].get<double>();
    config.relief_policy.top_m.reset();
  }
  if (j.contains("relief_k")) config.relief_k = j["relief_k"].get<int>();
  if (j.contains("min_sector_records")) config.min_sector_records = j["min_sector_records"].get<int>();
  if (j.contains("forest_max_trees")) config.forest_max_trees = j["forest_max_trees"].get<int>();
  if (j.contains("knn_members")) config.knn_members = j["knn_members"].get<int>();
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("workers")) config.workers = j["workers"].get<int>();
  if (j.contains("output_dir")) config.output_dir = j["output_dir"].get<std::string>();
}

void parse_threshold_overrides(RunConfig& config,
                               const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--rvm-threshold expects SECTOR=VALUE, got '" + item + "'");
    auto sector = parse_sector(item.substr(0, eq));
    if (!sector) throw ConfigError("unknown sector '" + item.substr(0, eq) + "'");
    try {
      config.rvm_threshold_overrides[*sector] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad threshold in '" + item + "'");
    }
  }
}

void print_run_summary(const EvaluationReport& report) {
  std::printf("%-26s %8s %8s %8s %8s %10s %10s\n", "sector", "forest", "svm",
              "rvm", "knn", "train", "test");
  for (const auto& s : report.sectors) {
    if (s.skipped) {
      std::printf("%-26s skipped: %s\n", s.sector_name.c_str(),
                  s.skip_reason.c_str());
      continue;
    }
    std::printf("%-26s %7.2f%% %7.2f%% %7.2f%% %7.2f%% %9.2f%% %9.2f%%%s\n",
                s.sector_name.c_str(), 100 * s.forest.test_error,
                100 * s.svm.test_error, 100 * s.rvm.test_error,
                100 * s.knn.test_error, 100 * s.committee_train_error,
                100 * s.committee_test_error,
                s.overfit_warning ? "  [overfit warning]" : "");
    if (!s.forward_series.empty()) {
      std::printf("  forward:");
      for (const auto& q : s.forward_series) {
        if (q.error)
          std::printf(" %s=%.2f%%", to_string(q.quarter).c_str(), 100 * *q.error);
        else
          std::printf(" %s=absent", to_string(q.quarter).c_str());
      }
      std::printf("\n");
    }
  }
  for (const auto& w : report.warnings)
    std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int run_report_command(const std::string& input, const std::string& csv_dir) {
  std::ifstream in(input);
  if (!in) {
    std::fprintf(stderr, "error: cannot open %s\n", input.c_str());
    return kExitInputError;
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: %s is not valid JSON: %s\n", input.c_str(), e.what());
    return kExitInputError;
  }
  auto problems = report_schema_errors(j);
  if (!problems.empty()) {
    for (const auto& p : problems) std::fprintf(stderr, "schema: %s\n", p.c_str());
    return kExitInputError;
  }
  std::printf("mode=%s seed=%llu sectors=%zu wall=%.2fs\n",
              j["mode"].get<std::string>().c_str(),
              static_cast<unsigned long long>(j["seed"].get<std::uint64_t>()),
              j["sectors"].size(), j["total_wall_seconds"].get<double>());
  std::printf("%-26s %8s %8s %8s %8s %10s %10s\n", "sector", "forest", "svm",
              "rvm", "knn", "train", "test");
  for (const auto& s : j["sectors"]) {
    if (s.value("skipped", false)) {
      std::printf("%-26s skipped: %s\n",
                  s["sector_name"].get<std::string>().c_str(),
                  s.value("skip_reason", "").c_str());
      continue;
    }
    const auto& l = s["learners"];
    std::printf("%-26s %7.2f%% %7.2f%% %7.2f%% %7.2f%% %9.2f%% %9.2f%%\n",
                s["sector_name"].get<std::string>().c_str(),
                100 * l["forest"]["test_error"].get<double>(),
                100 * l["svm"]["test_error"].get<double>(),
                100 * l["rvm"]["test_error"].get<double>(),
                100 * l["knn"]["test_error"].get<double>(),
                100 * s["committee"]["train_error"].get<double>(),
                100 * s["committee"]["test_error"].get<double>());
  }
  if (!csv_dir.empty()) {
    // Rehydrate the curves from JSON and emit the plot-ready extracts.
    namespace fs = std::filesystem;
    fs::create_directories(csv_dir);
    for (const auto& s : j["sectors"]) {
      if (s.value("skipped", false)) continue;
      const std::string tag = std::to_string(s["sector"].get<int>());
      {
        std::ofstream out(fs::path(csv_dir) / ("relief_" + tag + ".csv"));
        out << "feature,raw_weight,normalized_weight\n";
        const auto& r = s["relief"];
        for (std::size_t i = 0; i < r["schema"].size(); ++i)
          out << r["schema"][i].get<std::string>() << ','
              << r["raw"][i].get<double>() << ','
              << r["normalized"][i].get<double>() << '\n';
      }
      {
        std::ofstream out(fs::path(csv_dir) / ("oob_" + tag + ".csv"));
        out << "trees,oob_error\n";
        const auto& curve = s["forest_detail"]["oob_curve"];
        for (std::size_t i = 0; i < curve.size(); ++i)
          out << (i + 1) << ',' << curve[i].get<double>() << '\n';
      }
      {
        std::ofstream out(fs::path(csv_dir) / ("kcurve_" + tag + ".csv"));
        out << "k,cv_error\n";
        const auto& curve = s["knn_detail"]["cv_curve"];
        for (std::size_t i = 0; i < curve.size(); ++i)
          out << (i + 1) << ',' << curve[i].get<double>() << '\n';
      }
    }
    std::printf("csv extracts written to %s\n", csv_dir.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ensemble committee pipeline for quarterly stock return classification"};
  app.require_subcommand(1);

  // --- generate ---
  auto* generate = app.add_subcommand("generate", "write a synthetic quarterly CSV");
  SyntheticSpec spec;
  std::string generate_output = "synthetic.csv";
  std::string first_quarter = "2009Q1", last_quarter = "2009Q1", shift_quarter;
  generate->add_option("--sectors", spec.sectors, "number of GICS sectors (1-10)");
  generate->add_option("--per-sector", spec.per_sector, "rows per sector");
  generate->add_option("--informative", spec.informative, "planted informative features");
  generate->add_option("--noise", spec.label_noise, "label flip probability");
  generate->add_option("--margin", spec.margin, "minimum |teacher score|");
  generate->add_option("--first-quarter", first_quarter, "first quarter stamp, e.g. 2009Q1");
  generate->add_option("--last-quarter", last_quarter, "last quarter stamp");
  generate->add_option("--shift-quarter", shift_quarter, "quarter at which the teacher shifts");
  generate->add_option("--seed", spec.seed, "generator seed");
  generate->add_option("-o,--output", generate_output, "output CSV path");

  // --- shared train/backtest flags ---
  RunConfig config;
  std::string config_path, mode_flag, output_dir;
  std::vector<std::string> threshold_overrides;
  int relief_top_m = 0;
  double relief_threshold = -1.0;

  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("-i,--input", config.input_path, "input CSV");
    cmd->add_option("--config", config_path, "JSON config file (flags override)");
    cmd->add_option("--mode", mode_flag, "per_sector | aggregated");
    cmd->add_option("--train-fraction", config.train_fraction, "training fraction");
    cmd->add_option("--gamma-grid", config.gamma_grid, "kernel width candidates");
    cmd->add_option("--rvm-threshold-default", config.rvm_threshold,
                    "default RVM decision threshold");
    cmd->add_option("--rvm-threshold", threshold_overrides,
                    "per-sector override, e.g. 'Health Care=0.5' or 35=0.5");
    cmd->add_option("--relief-top-m", relief_top_m, "keep the m best features");
    cmd->add_option("--relief-threshold", relief_threshold,
                    "keep features with normalized weight >= threshold");
    cmd->add_option("--min-sector-records", config.min_sector_records,
                    "critical-mass floor");
    cmd->add_option("--forest-max-trees", config.forest_max_trees, "forest growth cap");
    cmd->add_option("--knn-members", config.knn_members, "k-NN committee size");
    cmd->add_option("--seed", config.seed, "master seed");
    cmd->add_option("--workers", config.workers, "parallel sector workers");
    cmd->add_option("-o,--output-dir", output_dir, "report + CSV output directory");
  };

  auto* train = app.add_subcommand("train", "train and evaluate per sector");
  add_run_options(train);

  auto* backtest = app.add_subcommand("backtest", "frozen-model forward evaluation");
  add_run_options(backtest);
  std::string train_quarter_flag = "2009Q1", horizon_flag = "2009Q4";
  backtest->add_option("--train-quarter", train_quarter_flag,
                       "training quarter (models learn this quarter's records)");
  backtest->add_option("--horizon-end", horizon_flag, "last evaluated quarter");

  auto* report_cmd = app.add_subcommand("report", "summarize a report.json");
  std::string report_input, report_csv_dir;
  report_cmd->add_option("-i,--input", report_input, "report.json path")->required();
  report_cmd->add_option("--csv-dir", report_csv_dir, "write CSV extracts here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (*generate) {
      spec.first_quarter = parse_quarter_flag(first_quarter);
      spec.last_quarter = parse_quarter_flag(last_quarter);
      if (!shift_quarter.empty())
        spec.shift_at = parse_quarter_flag(shift_quarter);
      generate_synthetic(spec, generate_output);
      std::printf("wrote %s (%d sectors x %d rows)\n", generate_output.c_str(),
                  spec.sectors, spec.per_sector);
      return kExitOk;
    }

    if (*train || *backtest) {
      if (!config_path.empty()) {
        // Flags override the config file: fields whose flags were not
        // given on the command line take the file's values.
        CLI::App* cmd = *train ? train : backtest;
        RunConfig file_config;
        apply_config_file(file_config, config_path);
        auto absent = [&](const char* flag) { return cmd->count(flag) == 0; };
        if (absent("--input") && !file_config.input_path.empty())
          config.input_path = file_config.input_path;
        if (mode_flag.empty()) config.mode = file_config.mode;
        if (absent("--train-fraction")) config.train_fraction = file_config.train_fraction;
        if (absent("--gamma-grid")) config.gamma_grid = file_config.gamma_grid;
        if (absent("--rvm-threshold-default")) config.rvm_threshold = file_config.rvm_threshold;
        if (relief_top_m <= 0 && relief_threshold < 0.0)
          config.relief_policy = file_config.relief_policy;
        config.relief_k = file_config.relief_k;
        if (absent("--min-sector-records")) config.min_sector_records = file_config.min_sector_records;
        if (absent("--forest-max-trees")) config.forest_max_trees = file_config.forest_max_trees;
        if (absent("--knn-members")) config.knn_members = file_config.knn_members;
        if (absent("--seed")) config.seed = file_config.seed;
        if (absent("--workers")) config.workers = file_config.workers;
        if (output_dir.empty() && !file_config.output_dir.empty())
          config.output_dir = file_config.output_dir;
        for (const auto& [sector, thr] : file_config.rvm_threshold_overrides)
          config.rvm_threshold_overrides.emplace(sector, thr);  // flag wins below
      }
      if (!mode_flag.empty()) {
        if (mode_flag == "per_sector") config.mode = RunMode::per_sector;
        else if (mode_flag == "aggregated") config.mode = RunMode::aggregated;
        else throw ConfigError("unknown mode '" + mode_flag + "'");
      }
      if (!output_dir.empty()) config.output_dir = output_dir;
      parse_threshold_overrides(config, threshold_overrides);
      if (relief_top_m > 0) {
        config.relief_policy.top_m = relief_top_m;
        config.relief_policy.threshold.reset();
      } else if (relief_threshold >= 0.0) {
        config.relief_policy.threshold = relief_threshold;
        config.relief_policy.top_m.reset();
      }
      if (config.input_path.empty()) throw ConfigError("--input is required");
      config.validate();

      EvaluationReport result;
      if (*train) {
        result = run_pipeline(config);
      } else {
        BacktestSpec bt{parse_quarter_flag(train_quarter_flag),
                        parse_quarter_flag(horizon_flag)};
        result = backtest_forward(config, bt);
      }
      print_run_summary(result);
      if (!config.output_dir.empty())
        std::printf("report written to %s/report.json\n", config.output_dir.c_str());
      return kExitOk;
    }

    if (*report_cmd) return run_report_command(report_input, report_csv_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfigError;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInputError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInputError;
  }
  return kExitOk;
}
