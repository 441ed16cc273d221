#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sectorcast/model_io.hpp"
#include "sectorcast/pipeline.hpp"
#include "sectorcast/synthetic.hpp"

using namespace sectorcast;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_config(const std::string& input) {
  RunConfig config;
  config.input_path = input;
  config.min_sector_records = 40;
  config.forest_max_trees = 60;
  config.knn_members = 30;
  config.seed = 5;
  return config;
}

struct TempCsv {
  std::string path;
  explicit TempCsv(const SyntheticSpec& spec, const std::string& name)
      : path("pipe_" + name + ".csv") {
    generate_synthetic(spec, path);
  }
  ~TempCsv() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("generate_synthetic structure and determinism", "[pipeline]") {
  SyntheticSpec spec;
  spec.sectors = 4;
  spec.per_sector = 300;
  spec.informative = 5;
  spec.seed = 9;
  std::ostringstream a, b;
  generate_synthetic(spec, a);
  generate_synthetic(spec, b);
  CHECK(a.str() == b.str());  // byte-identical per seed

  std::istringstream in(a.str());
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("stock_id,gics_sector,year,quarter,ACTQ", 0) == 0);
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1200);

  SECTION("loads back through the dataset module") {
    TempCsv file(spec, "roundtrip");
    auto data = load_csv(file.path, table1_schema());
    CHECK(data.size() == 1200);
    CHECK(data.dim() == 30);
    auto parts = partition_by_sector(data);
    CHECK(parts.size() == 4);
    for (const auto& [sector, part] : parts) CHECK(part.size() == 300);
  }
}

TEST_CASE("noise-free committee recovers the teacher", "[pipeline]") {
  SyntheticSpec spec;
  spec.sectors = 1;
  spec.per_sector = 300;
  spec.informative = 5;
  spec.label_noise = 0.0;
  spec.seed = 31;
  TempCsv file(spec, "noisefree");

  auto config = small_config(file.path);
  config.train_fraction = 0.10;
  auto report = run_pipeline(config);
  REQUIRE(report.sectors.size() == 1);
  REQUIRE_FALSE(report.sectors[0].skipped);
  CHECK(report.sectors[0].committee_test_error <= 0.05);
}

TEST_CASE("per-sector pipeline emits a full report", "[pipeline]") {
  SyntheticSpec spec;
  spec.sectors = 4;
  spec.per_sector = 120;
  spec.seed = 77;
  TempCsv file(spec, "structure");

  auto config = small_config(file.path);
  config.forest_max_trees = 40;
  auto report = run_pipeline(config);
  REQUIRE(report.sectors.size() == 4);
  for (const auto& s : report.sectors) {
    REQUIRE_FALSE(s.skipped);
    CHECK(s.train_size == 12);
    CHECK(s.test_size == 108);
    for (const LearnerReport* lr : {&s.forest, &s.svm, &s.rvm, &s.knn}) {
      CHECK(lr->train_error >= 0.0);
      CHECK(lr->train_error <= 1.0);
      CHECK(lr->test_error >= 0.0);
      CHECK(lr->test_error <= 1.0);
      CHECK(std::isfinite(lr->alpha));
    }
    CHECK(s.selected_features.size() == 10);
    CHECK(s.k_star >= 1);
    CHECK((s.svm_gamma == 0.5 || s.svm_gamma == 1.0 || s.svm_gamma == 2.0 ||
           s.svm_gamma == 4.0));
    CHECK(s.tree_count >= 1);
    CHECK(s.tree_count <= 40);
  }

  SECTION("report JSON passes the schema check and reruns agree") {
    auto j = report_to_json(report);
    CHECK(report_schema_errors(j).empty());

    auto again = run_pipeline(config);
    auto ja = report_to_json(again);
    for (std::size_t i = 0; i < report.sectors.size(); ++i) {
      // Decision fields reproduce exactly; wall-clock may differ.
      CHECK(j["sectors"][i]["svm_detail"]["gamma"] ==
            ja["sectors"][i]["svm_detail"]["gamma"]);
      CHECK(j["sectors"][i]["rvm_detail"]["gamma"] ==
            ja["sectors"][i]["rvm_detail"]["gamma"]);
      CHECK(j["sectors"][i]["knn_detail"]["k_star"] ==
            ja["sectors"][i]["knn_detail"]["k_star"]);
      CHECK(j["sectors"][i]["forest_detail"]["tree_count"] ==
            ja["sectors"][i]["forest_detail"]["tree_count"]);
      CHECK(j["sectors"][i]["committee"]["test_error"] ==
            ja["sectors"][i]["committee"]["test_error"]);
      CHECK(j["sectors"][i]["learners"] == ja["sectors"][i]["learners"]);
    }
  }
}

TEST_CASE("below-critical-mass sectors are skipped, not fatal", "[pipeline]") {
  SyntheticSpec spec;
  spec.sectors = 2;
  spec.per_sector = 120;
  spec.seed = 3;
  TempCsv file(spec, "skip");

  auto config = small_config(file.path);
  config.min_sector_records = 150;  // above every sector's size
  auto report = run_pipeline(config);
  REQUIRE(report.sectors.size() == 2);
  for (const auto& s : report.sectors) {
    CHECK(s.skipped);
    CHECK(s.skip_reason.find("critical mass") != std::string::npos);
  }
  CHECK(report.warnings.size() >= 2);
  CHECK(report_schema_errors(report_to_json(report)).empty());
}

TEST_CASE("aggregated mode produces a single entry", "[pipeline]") {
  SyntheticSpec spec;
  spec.sectors = 2;
  spec.per_sector = 150;
  spec.seed = 21;
  TempCsv file(spec, "agg");

  auto config = small_config(file.path);
  config.mode = RunMode::aggregated;
  auto report = run_pipeline(config);
  REQUIRE(report.sectors.size() == 1);
  CHECK(report.sectors[0].sector == kAggregatedSector);
  CHECK(report.sectors[0].sector_name == "Aggregated");
  CHECK(report.sectors[0].record_count == 300);
}

TEST_CASE("overfit warning flags memorization", "[pipeline]") {
  // The predicate itself: near-zero training error with a test error that
  // trails the coin flip.
  SectorReport s;
  s.committee_train_error = 0.01;
  s.committee_test_error = 0.35;
  s.overfit_warning =
      s.committee_train_error < 0.02 && s.committee_test_error > 0.30;
  CHECK(s.overfit_warning);
  s.committee_train_error = 0.10;
  s.overfit_warning =
      s.committee_train_error < 0.02 && s.committee_test_error > 0.30;
  CHECK_FALSE(s.overfit_warning);
}

TEST_CASE("report files are written", "[pipeline]") {
  SyntheticSpec spec;
  spec.sectors = 1;
  spec.per_sector = 100;
  spec.seed = 13;
  TempCsv file(spec, "files");

  auto config = small_config(file.path);
  config.output_dir = "pipe_outdir";
  auto report = run_pipeline(config);
  namespace fs = std::filesystem;
  CHECK(fs::exists("pipe_outdir/report.json"));
  CHECK(fs::exists("pipe_outdir/relief_10.csv"));
  CHECK(fs::exists("pipe_outdir/oob_10.csv"));
  CHECK(fs::exists("pipe_outdir/kcurve_10.csv"));
  CHECK(fs::exists("pipe_outdir/gamma_svm_10.csv"));
  CHECK(fs::exists("pipe_outdir/gamma_rvm_10.csv"));

  auto weights_csv = read_file("pipe_outdir/relief_10.csv");
  CHECK(weights_csv.rfind("feature,raw_weight,normalized_weight", 0) == 0);
  fs::remove_all("pipe_outdir");
}

TEST_CASE("backtest produces a frozen forward series", "[pipeline]") {
  SyntheticSpec spec;
  spec.sectors = 1;
  spec.per_sector = 400;
  spec.label_noise = 0.05;
  spec.first_quarter = {2009, 1};
  spec.last_quarter = {2009, 4};
  spec.seed = 17;
  TempCsv file(spec, "backtest");

  auto config = small_config(file.path);
  BacktestSpec bt{{2009, 1}, {2009, 4}};

  auto report = backtest_forward(config, bt);
  REQUIRE(report.sectors.size() == 1);
  const auto& s = report.sectors[0];
  REQUIRE_FALSE(s.skipped);
  REQUIRE(s.forward_series.size() == 3);  // 2009Q2..2009Q4
  for (const auto& q : s.forward_series) {
    REQUIRE(q.error.has_value());
    CHECK(*q.error >= 0.0);
    CHECK(*q.error <= 1.0);
  }
  CHECK(s.fingerprint_before == s.fingerprint_after);

  SECTION("reruns reproduce the series exactly") {
    auto again = backtest_forward(config, bt);
    REQUIRE(again.sectors.size() == 1);
    for (std::size_t i = 0; i < s.forward_series.size(); ++i)
      CHECK(*again.sectors[0].forward_series[i].error ==
            *s.forward_series[i].error);
  }
  SECTION("single-quarter horizon gives a one-entry series") {
    BacktestSpec one{{2009, 1}, {2009, 2}};
    auto short_report = backtest_forward(config, one);
    REQUIRE(short_report.sectors.size() == 1);
    CHECK(short_report.sectors[0].forward_series.size() == 1);
  }
}

TEST_CASE("backtest marks missing quarters absent and continues", "[pipeline]") {
  SyntheticSpec spec;
  spec.sectors = 1;
  spec.per_sector = 300;
  spec.first_quarter = {2009, 1};
  spec.last_quarter = {2009, 2};
  spec.seed = 23;
  TempCsv file(spec, "gap");

  auto config = small_config(file.path);
  BacktestSpec bt{{2009, 1}, {2009, 3}};  // 2009Q3 has no records
  auto report = backtest_forward(config, bt);
  REQUIRE(report.sectors.size() == 1);
  const auto& series = report.sectors[0].forward_series;
  REQUIRE(series.size() == 2);
  CHECK(series[0].error.has_value());
  CHECK_FALSE(series[1].error.has_value());
  CHECK(series[1].record_count == 0);
  CHECK(report_schema_errors(report_to_json(report)).empty());
}

TEST_CASE("svm and rvm models round-trip through JSON", "[pipeline]") {
  SyntheticSpec spec;
  spec.sectors = 1;
  spec.per_sector = 80;
  spec.seed = 41;
  TempCsv file(spec, "modelio");
  auto data = load_csv(file.path, table1_schema());
  auto [train, test] = split_train_test(data, 0.5, 1);
  auto [train_std, test_std] = standardize(train, test);

  auto svm = train_svm(train_std, 1.0);
  auto svm2 = svm_from_json(to_json(svm));
  auto rvm = train_rvm(train_std, 1.0);
  auto rvm2 = rvm_from_json(to_json(rvm));
  for (const auto& rec : test_std.records) {
    CHECK(svm_predict(svm, rec.features) == svm_predict(svm2, rec.features));
    CHECK(rvm_probability(rvm, rec.features) ==
          Catch::Approx(rvm_probability(rvm2, rec.features)).margin(1e-12));
  }
  CHECK_THROWS_AS(svm_from_json(to_json(rvm)), ConfigError);
}

TEST_CASE("config validation", "[pipeline]") {
  RunConfig config;
  config.input_path = "whatever.csv";
  config.train_fraction = 1.5;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.train_fraction = 0.1;
  config.rvm_threshold_overrides[35] = 1.5;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.rvm_threshold_overrides[35] = 0.5;
  config.gamma_grid = {};
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.gamma_grid = {0.5, 1.0};
  CHECK_NOTHROW(config.validate());
}
