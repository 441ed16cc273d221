#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sectorcast/committee.hpp"
#include "sectorcast/dataset.hpp"
#include "sectorcast/errors.hpp"
#include "sectorcast/forest.hpp"
#include "sectorcast/knn.hpp"
#include "sectorcast/model_io.hpp"
#include "sectorcast/modelsel.hpp"
#include "sectorcast/relief.hpp"
#include "sectorcast/rng.hpp"
#include "sectorcast/rvm.hpp"
#include "sectorcast/svm.hpp"

namespace sectorcast {

enum class RunMode { per_sector, aggregated };

inline std::string to_string(RunMode mode) {
  return mode == RunMode::per_sector ? "per_sector" : "aggregated";
}

struct RunConfig {
  std::string input_path;
  RunMode mode = RunMode::per_sector;
  double train_fraction = 0.10;
  std::vector<double> gamma_grid{0.5, 1.0, 2.0, 4.0};
  double rvm_threshold = 0.8;
  std::map<int, double> rvm_threshold_overrides;  // sector code -> threshold
  SelectionPolicy relief_policy{.top_m = 10, .threshold = std::nullopt};
  int relief_k = 10;
  int relief_iterations = 0;  // 0 -> min(n, 200)
  int min_sector_records = 40;
  int forest_max_trees = 200;
  int knn_members = 100;
  int knn_k_max = 100;
  int cv_folds = 5;
  int knn_cv_folds = 10;
  std::uint64_t seed = 42;
  int workers = 1;
  std::string output_dir;  // empty -> nothing written

  double sector_threshold(int sector) const {
    auto it = rvm_threshold_overrides.find(sector);
    return it != rvm_threshold_overrides.end() ? it->second : rvm_threshold;
  }

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw ConfigError("train_fraction must be inside (0,1)");
    if (!(rvm_threshold > 0.0 && rvm_threshold < 1.0))
      throw ConfigError("rvm threshold must be inside (0,1)");
    for (const auto& [sector, thr] : rvm_threshold_overrides)
      if (!(thr > 0.0 && thr < 1.0))
        throw ConfigError("rvm threshold override for sector " +
                          std::to_string(sector) + " must be inside (0,1)");
    if (gamma_grid.empty()) throw ConfigError("gamma grid must be nonempty");
    for (double g : gamma_grid)
      if (g <= 0.0) throw ConfigError("gamma grid entries must be positive");
    if (!relief_policy.top_m && !relief_policy.threshold)
      throw ConfigError("relief policy must set top_m or threshold");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (forest_max_trees < 1) throw ConfigError("forest_max_trees must be >= 1");
    if (knn_members < 1) throw ConfigError("knn_members must be >= 1");
  }
};

struct LearnerReport {
  double train_error = 0.0;
  double test_error = 0.0;
  double epsilon = 0.0;  // training error behind the boosting weight
  double alpha = 0.0;
};

struct QuarterError {
  YearQuarter quarter;
  std::optional<double> error;  // absent when the quarter has no records
  int record_count = 0;
};

struct SectorReport {
  int sector = kAggregatedSector;
  std::string sector_name;
  bool skipped = false;
  std::string skip_reason;
  int record_count = 0;
  int train_size = 0;
  int test_size = 0;

  ReliefWeights relief;
  std::vector<int> selected_features;

  LearnerReport forest, svm, rvm, knn;
  int tree_count = 0;
  std::vector<double> oob_curve;
  double svm_gamma = 0.0;
  std::vector<double> svm_grid_errors;
  double rvm_gamma = 0.0;
  std::vector<double> rvm_grid_errors;
  double rvm_threshold = 0.8;
  int relevance_vector_count = 0;
  bool rvm_converged = true;
  bool svm_converged = true;
  int k_star = 0;
  std::vector<double> knn_cv_curve;

  double committee_train_error = 0.0;
  double committee_test_error = 0.0;
  double committee_test_mean_abs_margin = 0.0;
  bool overfit_warning = false;
  double wall_seconds = 0.0;

  std::vector<QuarterError> forward_series;
  std::uint64_t fingerprint_before = 0;
  std::uint64_t fingerprint_after = 0;
};

struct EvaluationReport {
  std::string mode;
  double train_fraction = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> gamma_grid;
  bool backtest = false;
  std::optional<YearQuarter> train_quarter;
  std::optional<YearQuarter> horizon_end;
  std::vector<SectorReport> sectors;
  std::vector<std::string> warnings;
  double total_wall_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Sector training
// ---------------------------------------------------------------------------

/// Everything fitted for one sector; immutable once trained.
struct SectorModels {
  Standardization standardization;
  std::vector<int> selected;  // raw-schema feature indices
  ReliefWeights relief;
  std::shared_ptr<const ForestModel> forest;
  std::vector<double> oob_curve;
  int tree_count = 0;
  std::shared_ptr<const SvmModel> svm;
  GridResult svm_grid;
  std::shared_ptr<const RvmModel> rvm;
  GridResult rvm_grid;
  SelectKResult knn_selection;
  std::shared_ptr<const KnnCommittee> knn;
  CommitteeModel committee;
  Dataset train_restricted;  // standardized + feature-restricted train set

  /// Maps raw-schema records into the committee's feature space.
  Dataset prepare(const Dataset& raw) const {
    Dataset out = raw;
    apply_standardization(out, standardization);
    return restrict_features(out, selected);
  }

  std::uint64_t fingerprint_models() const {
    return fingerprint({to_json(*forest), to_json(*svm), to_json(*rvm),
                        to_json(*knn),
                        nlohmann::json{{"alphas", committee.alphas},
                                       {"epsilons", committee.epsilons}}});
  }
};

namespace detail {

struct SeedStream {
  std::uint64_t base;
  std::uint64_t operator()(std::uint64_t stream) const {
    return derive_seed(base, stream);
  }
};

inline std::vector<int> true_labels(const Dataset& data) {
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& rec : data.records) labels.push_back(rec.label);
  return labels;
}

template <typename Predict>
std::vector<int> predict_all(const Dataset& data, Predict&& predict) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& rec : data.records) out.push_back(predict(rec.features));
  return out;
}

}  // namespace detail

/// Fits Relief-F selection, the four constituent learners (with their CV
/// procedures), and the boosting committee on a raw-feature training set.
inline SectorModels train_sector_models(const Dataset& train_raw,
                                        const RunConfig& config, int sector,
                                        std::uint64_t sector_seed) {
  detail::SeedStream seeds{sector_seed};
  SectorModels models;

  // Standardize on train only.
  Dataset train_std = train_raw;
  models.standardization = fit_standardization(train_raw);
  apply_standardization(train_std, models.standardization);

  // Supervised feature selection ahead of every learner.
  {
    int pos = 0, neg = 0;
    for (const auto& rec : train_std.records) (rec.label > 0 ? pos : neg) += 1;
    const int min_class = std::min(pos, neg);
    const int k = std::max(1, std::min(config.relief_k, min_class - 1));
    const int iterations =
        config.relief_iterations > 0
            ? config.relief_iterations
            : std::min<int>(static_cast<int>(train_std.size()), 200);
    models.relief = relieff(train_std, k, iterations, seeds(2));
    models.selected = select_features(models.relief, config.relief_policy);
  }
  Dataset train = restrict_features(train_std, models.selected);
  models.train_restricted = train;

  // Random forest with OOB-driven size selection.
  {
    ForestModel full = train_forest(train, config.forest_max_trees, seeds(3));
    models.oob_curve = full.oob_curve;
    models.tree_count =
        static_cast<int>(full.trees.size()) >= 20
            ? select_tree_count(full.oob_curve)
            : static_cast<int>(full.trees.size());
    full.trees.resize(static_cast<std::size_t>(models.tree_count));
    full.in_bag.resize(static_cast<std::size_t>(models.tree_count));
    full.oob_curve.resize(static_cast<std::size_t>(models.tree_count));
    models.forest = std::make_shared<const ForestModel>(std::move(full));
  }

  // SVM: five-fold gamma selection, then the final fit at C=2.
  {
    auto trainer = [&](const Dataset& data, double gamma, std::uint64_t) {
      auto model = std::make_shared<const SvmModel>(train_svm(data, gamma));
      return Predictor([model](const std::vector<double>& x) {
        return svm_predict(*model, x);
      });
    };
    models.svm_grid = grid_search_gamma(trainer, train, config.gamma_grid,
                                        config.cv_folds, seeds(4));
    models.svm = std::make_shared<const SvmModel>(
        train_svm(train, models.svm_grid.chosen));
  }

  // RVM: same grid procedure, sector-specific decision threshold.
  {
    const double threshold = config.sector_threshold(sector);
    RvmTrainOptions rvm_options;
    rvm_options.threshold = threshold;
    auto trainer = [&](const Dataset& data, double gamma, std::uint64_t) {
      auto model =
          std::make_shared<const RvmModel>(train_rvm(data, gamma, rvm_options));
      return Predictor([model](const std::vector<double>& x) {
        return rvm_predict(*model, x);
      });
    };
    models.rvm_grid = grid_search_gamma(trainer, train, config.gamma_grid,
                                        config.cv_folds, seeds(5));
    models.rvm = std::make_shared<const RvmModel>(
        train_rvm(train, models.rvm_grid.chosen, rvm_options));
  }

  // k-NN committee with cross-validated k*.
  {
    models.knn_selection =
        select_k(train, config.knn_k_max, config.knn_cv_folds, seeds(6));
    models.knn = std::make_shared<const KnnCommittee>(train_committee(
        train, config.knn_members, models.knn_selection.k_star, seeds(7)));
  }

  // Boosting committee over the four constituents.
  {
    auto forest_model = models.forest;
    auto svm_model = models.svm;
    auto rvm_model = models.rvm;
    auto knn_model = models.knn;
    std::vector<TrainedLearner> learners;
    learners.push_back({"forest", [forest_model](const std::vector<double>& x) {
                          return forest_decide(*forest_model, x);
                        }});
    learners.push_back({"svm", [svm_model](const std::vector<double>& x) {
                          return svm_predict(*svm_model, x);
                        }});
    learners.push_back({"rvm", [rvm_model](const std::vector<double>& x) {
                          return rvm_predict(*rvm_model, x);
                        }});
    learners.push_back({"knn", [knn_model](const std::vector<double>& x) {
                          return committee_predict(*knn_model, x);
                        }});
    models.committee = fit_committee(std::move(learners), train);
  }
  return models;
}

namespace detail {

inline void fill_learner_reports(SectorReport& report,
                                 const SectorModels& models,
                                 const Dataset& train, const Dataset& test) {
  const auto train_truth = true_labels(train);
  const auto test_truth = true_labels(test);

  auto evaluate = [&](const TrainedLearner& learner) {
    LearnerReport lr;
    lr.train_error =
        error_rate(predict_all(train, learner.decide), train_truth);
    lr.test_error = error_rate(predict_all(test, learner.decide), test_truth);
    return lr;
  };
  for (std::size_t i = 0; i < models.committee.learners.size(); ++i) {
    const auto& learner = models.committee.learners[i];
    LearnerReport lr = evaluate(learner);
    lr.epsilon = models.committee.epsilons[i];
    lr.alpha = models.committee.alphas[i];
    if (learner.name == "forest") report.forest = lr;
    else if (learner.name == "svm") report.svm = lr;
    else if (learner.name == "rvm") report.rvm = lr;
    else report.knn = lr;
  }

  auto committee_predictor = [&](const std::vector<double>& x) {
    return committee_decide(models.committee, x);
  };
  report.committee_train_error =
      error_rate(predict_all(train, committee_predictor), train_truth);
  report.committee_test_error =
      error_rate(predict_all(test, committee_predictor), test_truth);
  double margin_sum = 0.0;
  for (const auto& rec : test.records)
    margin_sum += std::abs(committee_margin(models.committee, rec.features));
  report.committee_test_mean_abs_margin =
      test.empty() ? 0.0 : margin_sum / static_cast<double>(test.size());

  report.relief = models.relief;
  report.selected_features = models.selected;
  report.tree_count = models.tree_count;
  report.oob_curve = models.oob_curve;
  report.svm_gamma = models.svm_grid.chosen;
  report.svm_grid_errors = models.svm_grid.mean_errors;
  report.svm_converged = models.svm->converged;
  report.rvm_gamma = models.rvm_grid.chosen;
  report.rvm_grid_errors = models.rvm_grid.mean_errors;
  report.rvm_threshold = models.rvm->threshold;
  report.rvm_converged = models.rvm->converged;
  report.relevance_vector_count =
      static_cast<int>(models.rvm->relevance_vectors.size());
  report.k_star = models.knn_selection.k_star;
  report.knn_cv_curve = models.knn_selection.cv_errors;

  // The memorization diagnosis: near-zero training error paired with a
  // test error that would embarrass a coin flip deserves a flag.
  report.overfit_warning = report.committee_train_error < 0.02 &&
                           report.committee_test_error > 0.30;
}

inline SectorReport process_sector(const Dataset& sector_data,
                                   const RunConfig& config, int sector,
                                   std::uint64_t sector_seed) {
  SectorReport report;
  report.sector = sector;
  report.sector_name = sector_name(sector);
  report.record_count = static_cast<int>(sector_data.size());
  const auto started = std::chrono::steady_clock::now();
  auto finish = [&]() {
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
  };

  if (report.record_count < config.min_sector_records) {
    report.skipped = true;
    report.skip_reason = "below critical mass (" +
                         std::to_string(report.record_count) + " < " +
                         std::to_string(config.min_sector_records) + ")";
    finish();
    return report;
  }
  try {
    auto [train_raw, test_raw] =
        split_train_test(sector_data, config.train_fraction, derive_seed(sector_seed, 1));
    report.train_size = static_cast<int>(train_raw.size());
    report.test_size = static_cast<int>(test_raw.size());
    if (!has_both_classes(train_raw))
      throw SingleClassTrainingError("training split is single-class");

    SectorModels models =
        train_sector_models(train_raw, config, sector, sector_seed);
    Dataset test = models.prepare(test_raw);
    fill_learner_reports(report, models, models.train_restricted, test);
  } catch (const Error& e) {
    report.skipped = true;
    report.skip_reason = e.what();
  }
  finish();
  return report;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const LearnerReport& lr) {
  return {{"train_error", lr.train_error},
          {"test_error", lr.test_error},
          {"epsilon", lr.epsilon},
          {"alpha", lr.alpha}};
}

inline nlohmann::json to_json(const SectorReport& s) {
  nlohmann::json j{{"sector", s.sector},
                   {"sector_name", s.sector_name},
                   {"skipped", s.skipped},
                   {"records", s.record_count},
                   {"wall_seconds", s.wall_seconds}};
  if (s.skipped) {
    j["skip_reason"] = s.skip_reason;
    return j;
  }
  j["train_size"] = s.train_size;
  j["test_size"] = s.test_size;
  j["relief"] = {{"schema", s.relief.schema},
                 {"raw", s.relief.raw},
                 {"normalized", s.relief.normalized}};
  j["selected_features"] = s.selected_features;
  j["learners"] = {{"forest", to_json(s.forest)},
                   {"svm", to_json(s.svm)},
                   {"rvm", to_json(s.rvm)},
                   {"knn", to_json(s.knn)}};
  j["forest_detail"] = {{"tree_count", s.tree_count}, {"oob_curve", s.oob_curve}};
  j["svm_detail"] = {{"gamma", s.svm_gamma},
                     {"grid_errors", s.svm_grid_errors},
                     {"converged", s.svm_converged}};
  j["rvm_detail"] = {{"gamma", s.rvm_gamma},
                     {"grid_errors", s.rvm_grid_errors},
                     {"threshold", s.rvm_threshold},
                     {"relevance_vectors", s.relevance_vector_count},
                     {"converged", s.rvm_converged}};
  j["knn_detail"] = {{"k_star", s.k_star}, {"cv_curve", s.knn_cv_curve}};
  j["committee"] = {{"train_error", s.committee_train_error},
                    {"test_error", s.committee_test_error},
                    {"test_mean_abs_margin", s.committee_test_mean_abs_margin}};
  j["overfit_warning"] = s.overfit_warning;
  if (!s.forward_series.empty()) {
    nlohmann::json series = nlohmann::json::array();
    for (const auto& q : s.forward_series) {
      nlohmann::json entry{{"year", q.quarter.year},
                           {"quarter", q.quarter.quarter},
                           {"records", q.record_count}};
      if (q.error)
        entry["error"] = *q.error;
      else
        entry["error"] = nullptr;
      series.push_back(std::move(entry));
    }
    j["forward_series"] = std::move(series);
    j["fingerprint_before"] = s.fingerprint_before;
    j["fingerprint_after"] = s.fingerprint_after;
  }
  return j;
}

inline nlohmann::json report_to_json(const EvaluationReport& report) {
  nlohmann::json j{{"format_version", 1},
                   {"mode", report.mode},
                   {"train_fraction", report.train_fraction},
                   {"seed", report.seed},
                   {"gamma_grid", report.gamma_grid},
                   {"backtest", report.backtest},
                   {"warnings", report.warnings},
                   {"total_wall_seconds", report.total_wall_seconds}};
  if (report.train_quarter)
    j["train_quarter"] = to_string(*report.train_quarter);
  if (report.horizon_end) j["horizon_end"] = to_string(*report.horizon_end);
  nlohmann::json sectors = nlohmann::json::array();
  for (const auto& s : report.sectors) sectors.push_back(to_json(s));
  j["sectors"] = std::move(sectors);
  return j;
}

/// Structural validation of a serialized report; returns human-readable
/// problems, empty when the document is well-formed.
inline std::vector<std::string> report_schema_errors(const nlohmann::json& j) {
  std::vector<std::string> errors;
  auto need = [&](const nlohmann::json& obj, const char* key, const char* where) {
    if (!obj.contains(key)) errors.push_back(std::string(where) + ": missing " + key);
    return obj.contains(key);
  };
  for (const char* key :
       {"format_version", "mode", "train_fraction", "seed", "gamma_grid",
        "sectors", "warnings", "total_wall_seconds", "backtest"})
    need(j, key, "report");
  if (!j.contains("sectors")) return errors;
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (const auto& s : j.at("sectors")) {
    const std::string where = "sector " + s.value("sector_name", "?");
    for (const char* key : {"sector", "sector_name", "skipped", "records", "wall_seconds"})
      need(s, key, where.c_str());
    if (s.value("skipped", true)) continue;
    for (const char* key :
         {"train_size", "test_size", "relief", "selected_features", "learners",
          "forest_detail", "svm_detail", "rvm_detail", "knn_detail",
          "committee", "overfit_warning"})
      need(s, key, where.c_str());
    if (s.contains("learners"))
      for (const char* learner : {"forest", "svm", "rvm", "knn"}) {
        if (!s["learners"].contains(learner)) {
          errors.push_back(where + ": missing learner " + learner);
          continue;
        }
        for (const char* key : {"train_error", "test_error", "epsilon", "alpha"}) {
          const auto& entry = s["learners"][learner];
          if (!entry.contains(key)) {
            errors.push_back(where + "." + learner + ": missing " + key);
          } else if (std::string(key) != "alpha" &&
                     !in_unit(entry[key].get<double>())) {
            errors.push_back(where + "." + learner + "." + key +
                             " outside [0,1]");
          }
        }
      }
    if (s.contains("committee"))
      for (const char* key : {"train_error", "test_error"})
        if (s["committee"].contains(key) &&
            !in_unit(s["committee"][key].get<double>()))
          errors.push_back(where + ".committee." + key + " outside [0,1]");
    if (s.contains("forward_series")) {
      std::optional<std::pair<int, int>> previous;
      for (const auto& entry : s["forward_series"]) {
        std::pair<int, int> stamp{entry.value("year", 0), entry.value("quarter", 0)};
        if (previous && !(*previous < stamp))
          errors.push_back(where + ": forward series not strictly increasing");
        previous = stamp;
      }
    }
  }
  return errors;
}

// ---------------------------------------------------------------------------
// File emission
// ---------------------------------------------------------------------------

inline void write_forward_csv(const std::vector<QuarterError>& series,
                              std::ostream& out) {
  out << "year,quarter,records,error\n";
  for (const auto& q : series) {
    out << q.quarter.year << ',' << q.quarter.quarter << ',' << q.record_count
        << ',';
    if (q.error)
      out << *q.error;
    else
      out << "absent";
    out << '\n';
  }
}

inline void write_report_files(const EvaluationReport& report,
                               const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "report.json");
    out << report_to_json(report).dump(2) << '\n';
  }
  for (const auto& s : report.sectors) {
    if (s.skipped) continue;
    const std::string tag = std::to_string(s.sector);
    {
      std::ofstream out(fs::path(dir) / ("relief_" + tag + ".csv"));
      write_weights_csv(s.relief, out);
    }
    {
      std::ofstream out(fs::path(dir) / ("oob_" + tag + ".csv"));
      write_oob_csv(s.oob_curve, out);
    }
    {
      std::ofstream out(fs::path(dir) / ("kcurve_" + tag + ".csv"));
      out << "k,cv_error\n";
      for (std::size_t i = 0; i < s.knn_cv_curve.size(); ++i)
        out << (i + 1) << ',' << s.knn_cv_curve[i] << '\n';
    }
    auto write_grid = [&](const std::string& name, double chosen,
                          const std::vector<double>& errors) {
      std::ofstream out(fs::path(dir) / (name + "_" + tag + ".csv"));
      out << "gamma,mean_cv_error,chosen\n";
      for (std::size_t g = 0; g < report.gamma_grid.size() && g < errors.size(); ++g)
        out << report.gamma_grid[g] << ',' << errors[g] << ','
            << (report.gamma_grid[g] == chosen ? 1 : 0) << '\n';
    };
    write_grid("gamma_svm", s.svm_gamma, s.svm_grid_errors);
    write_grid("gamma_rvm", s.rvm_gamma, s.rvm_grid_errors);
    if (!s.forward_series.empty()) {
      std::ofstream out(fs::path(dir) / ("forward_" + tag + ".csv"));
      write_forward_csv(s.forward_series, out);
    }
  }
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

namespace detail {

inline std::map<int, Dataset> arrange_sectors(const Dataset& data,
                                              RunMode mode) {
  if (mode == RunMode::per_sector) return partition_by_sector(data);
  std::map<int, Dataset> single;
  single[kAggregatedSector] = data;
  return single;
}

template <typename Task>
std::vector<SectorReport> run_sector_tasks(
    const std::map<int, Dataset>& sectors, int workers, Task&& task) {
  std::vector<std::pair<int, const Dataset*>> work;
  for (const auto& [sector, data] : sectors) work.emplace_back(sector, &data);
  std::vector<SectorReport> reports(work.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < work.size(); ++i)
      reports[i] = task(work[i].first, *work[i].second);
    return reports;
  }
  std::vector<std::future<SectorReport>> futures(work.size());
  std::size_t next = 0;
  while (next < work.size()) {
    const std::size_t batch =
        std::min<std::size_t>(static_cast<std::size_t>(workers), work.size() - next);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& [sector, data] = work[next + b];
      futures[next + b] = std::async(std::launch::async, task, sector, std::cref(*data));
    }
    for (std::size_t b = 0; b < batch; ++b)
      reports[next + b] = futures[next + b].get();
    next += batch;
  }
  return reports;
}

}  // namespace detail

/// Full training/evaluation pipeline: load, partition (or aggregate),
/// standardize, Relief-F select, train the four learners with their CV
/// procedures, fit the committee, and evaluate. Sectors that fail softly
/// (below critical mass, single-class splits, RVM numerics) are reported
/// as skipped rather than aborting the run.
inline EvaluationReport run_pipeline(const RunConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();

  EvaluationReport report;
  report.mode = to_string(config.mode);
  report.train_fraction = config.train_fraction;
  report.seed = config.seed;
  report.gamma_grid = config.gamma_grid;

  Dataset data = load_csv(config.input_path, table1_schema(), &report.warnings);
  auto sectors = detail::arrange_sectors(data, config.mode);

  report.sectors = detail::run_sector_tasks(
      sectors, config.workers, [&config](int sector, const Dataset& part) {
        return detail::process_sector(
            part, config, sector,
            derive_seed(config.seed, 0x5EC ^ static_cast<std::uint64_t>(sector)));
      });

  for (const auto& s : report.sectors)
    if (s.skipped)
      report.warnings.push_back("sector " + s.sector_name +
                                " skipped: " + s.skip_reason);
  report.total_wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  if (!config.output_dir.empty()) write_report_files(report, config.output_dir);
  return report;
}

struct BacktestSpec {
  YearQuarter train_quarter;  // models learn the (q, q+1) pair
  YearQuarter horizon_end;
};

/// Frozen-model forward backtest: fit once on the training quarter's
/// records, then score every subsequent quarter through the horizon without
/// refitting anything. Missing quarters yield absent entries; model
/// fingerprints before and after the sweep are recorded so immutability is
/// checkable.
inline EvaluationReport backtest_forward(const RunConfig& config,
                                         const BacktestSpec& spec) {
  config.validate();
  if (!(spec.train_quarter < spec.horizon_end))
    throw ConfigError("backtest: horizon_end must follow train_quarter");
  const auto started = std::chrono::steady_clock::now();

  EvaluationReport report;
  report.mode = to_string(config.mode);
  report.train_fraction = config.train_fraction;
  report.seed = config.seed;
  report.gamma_grid = config.gamma_grid;
  report.backtest = true;
  report.train_quarter = spec.train_quarter;
  report.horizon_end = spec.horizon_end;

  Dataset data = load_csv(config.input_path, table1_schema(), &report.warnings);
  auto sectors = detail::arrange_sectors(data, config.mode);

  auto task = [&config, &spec](int sector, const Dataset& part) {
    SectorReport report;
    report.sector = sector;
    report.sector_name = sector_name(sector);
    report.record_count = static_cast<int>(part.size());
    const auto sector_started = std::chrono::steady_clock::now();
    const std::uint64_t sector_seed =
        derive_seed(config.seed, 0xBAC ^ static_cast<std::uint64_t>(sector));

    std::vector<int> train_idx;
    for (int i = 0; i < static_cast<int>(part.size()); ++i)
      if (part.records[static_cast<std::size_t>(i)].quarter == spec.train_quarter)
        train_idx.push_back(i);
    Dataset train_raw = subset(part, train_idx);

    try {
      if (train_raw.empty())
        throw EmptyTrainingError("no records for training quarter " +
                                 to_string(spec.train_quarter));
      if (static_cast<int>(train_raw.size()) < config.min_sector_records)
        throw InsufficientClassDataError(
            "below critical mass (" + std::to_string(train_raw.size()) + " < " +
            std::to_string(config.min_sector_records) + ")");
      if (!has_both_classes(train_raw))
        throw SingleClassTrainingError("training quarter is single-class");

      report.train_size = static_cast<int>(train_raw.size());
      SectorModels models =
          train_sector_models(train_raw, config, sector, sector_seed);
      report.fingerprint_before = models.fingerprint_models();

      // Diagnostics against the training quarter itself; the forward
      // series below carries the real out-of-time errors.
      detail::fill_learner_reports(report, models, models.train_restricted,
                                   models.train_restricted);
      report.test_size = 0;

      for (YearQuarter q = next_quarter(spec.train_quarter);
           !(spec.horizon_end < q); q = next_quarter(q)) {
        std::vector<int> idx;
        for (int i = 0; i < static_cast<int>(part.size()); ++i)
          if (part.records[static_cast<std::size_t>(i)].quarter == q)
            idx.push_back(i);
        QuarterError entry;
        entry.quarter = q;
        entry.record_count = static_cast<int>(idx.size());
        if (!idx.empty()) {
          Dataset quarter_data = models.prepare(subset(part, idx));
          auto predictions = detail::predict_all(
              quarter_data, [&](const std::vector<double>& x) {
                return committee_decide(models.committee, x);
              });
          entry.error =
              error_rate(predictions, detail::true_labels(quarter_data));
        }
        report.forward_series.push_back(entry);
      }
      report.fingerprint_after = models.fingerprint_models();
    } catch (const Error& e) {
      report.skipped = true;
      report.skip_reason = e.what();
    }
    report.wall_seconds = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - sector_started)
                              .count();
    return report;
  };

  report.sectors = detail::run_sector_tasks(sectors, config.workers, task);
  for (const auto& s : report.sectors)
    if (s.skipped)
      report.warnings.push_back("sector " + s.sector_name +
                                " skipped: " + s.skip_reason);
  report.total_wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  if (!config.output_dir.empty()) write_report_files(report, config.output_dir);
  return report;
}

}  // namespace sectorcast
