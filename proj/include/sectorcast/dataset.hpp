#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sectorcast/errors.hpp"
#include "sectorcast/rng.hpp"

namespace sectorcast {

// ---------------------------------------------------------------------------
// GICS taxonomy
// ---------------------------------------------------------------------------

/// Pseudo-sector used when the pipeline runs without a sector partition.
inline constexpr int kAggregatedSector = 0;

struct GicsSector {
  int code;
  const char* name;
};

inline constexpr std::array<GicsSector, 10> kGicsSectors{{
    {10, "Energy"},
    {15, "Materials"},
    {20, "Industrials"},
    {25, "Consumer Discretionary"},
    {30, "Consumer Staples"},
    {35, "Health Care"},
    {40, "Financials"},
    {45, "Information Technology"},
    {50, "Telecommunication Services"},
    {55, "Utilities"},
}};

inline std::string sector_name(int code) {
  if (code == kAggregatedSector) return "Aggregated";
  for (const auto& s : kGicsSectors)
    if (s.code == code) return s.name;
  return "Unknown(" + std::to_string(code) + ")";
}

/// Accepts either the integer GICS code or the canonical sector name
/// (case-insensitive). Returns nullopt for anything else.
inline std::optional<int> parse_sector(std::string_view text) {
  auto lower = [](std::string_view v) {
    std::string out(v);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
  };
  std::string t = lower(text);
  if (t == "aggregated") return kAggregatedSector;
  for (const auto& s : kGicsSectors)
    if (t == lower(s.name)) return s.code;
  try {
    std::size_t pos = 0;
    int code = std::stoi(std::string(text), &pos);
    if (pos != text.size()) return std::nullopt;
    if (code == kAggregatedSector) return code;
    for (const auto& s : kGicsSectors)
      if (s.code == code) return code;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Core record types
// ---------------------------------------------------------------------------

struct YearQuarter {
  int year = 0;
  int quarter = 0;  // 1..4
  auto operator<=>(const YearQuarter&) const = default;
};

inline YearQuarter next_quarter(YearQuarter q) {
  return q.quarter == 4 ? YearQuarter{q.year + 1, 1}
                        : YearQuarter{q.year, q.quarter + 1};
}

inline std::string to_string(YearQuarter q) {
  return std::to_string(q.year) + "Q" + std::to_string(q.quarter);
}

/// Parses "2009Q1" (also accepts lower-case q).
inline std::optional<YearQuarter> parse_year_quarter(std::string_view text) {
  auto pos = text.find_first_of("Qq");
  if (pos == std::string_view::npos) return std::nullopt;
  try {
    std::size_t used = 0;
    int year = std::stoi(std::string(text.substr(0, pos)), &used);
    if (used != pos) return std::nullopt;
    int q = std::stoi(std::string(text.substr(pos + 1)), &used);
    if (used != text.size() - pos - 1) return std::nullopt;
    if (q < 1 || q > 4) return std::nullopt;
    return YearQuarter{year, q};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

struct StockRecord {
  std::string stock_id;
  int sector = kAggregatedSector;
  YearQuarter quarter;
  std::vector<double> features;
  int label = -1;  // +1 or -1
};

/// Per-feature z-score parameters fitted on training data. A stddev of 0
/// marks a constant column whose standardized value is defined as 0.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct Dataset {
  std::vector<std::string> schema;
  std::vector<StockRecord> records;
  std::optional<Standardization> standardization;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  std::size_t dim() const { return schema.size(); }
};

inline bool has_both_classes(const Dataset& data) {
  bool pos = false, neg = false;
  for (const auto& rec : data.records) (rec.label > 0 ? pos : neg) = true;
  return pos && neg;
}

/// The 30 quarterly Compustat mnemonics the pipeline expects by default.
inline const std::vector<std::string>& table1_schema() {
  static const std::vector<std::string> schema{
      "ACTQ",   "CHEQ",   "DLCQ",     "DLTTQ",  "EPSPXQ", "EPSX12",
      "ICAPTQ", "LCTQ",   "LTQ",      "NIQ",    "OEPS12", "OIADPQ",
      "REVTQ",  "SPCE12", "SPCEQ",    "WCAPQ",  "XOPRQ",  "CAPXY",
      "EPSFIY", "IVCHY",  "REVTY",    "SPCEDY", "SPCEEPSPY", "SPCEPY",
      "XOPRY",  "CSHTRQ", "MKVALTQ",  "PRCCQ",  "PRCHQ",  "PRCLQ"};
  return schema;
}

// ---------------------------------------------------------------------------
// Labeling
// ---------------------------------------------------------------------------

/// +1 iff the price rose; a zero shift maps to -1 (no false buy signal).
inline int label_from_prices(double initial_price, double subsequent_price) {
  if (!(initial_price > 0.0) || !(subsequent_price > 0.0))
    throw NonPositivePriceError("prices must be strictly positive");
  return subsequent_price > initial_price ? +1 : -1;
}

// ---------------------------------------------------------------------------
// Partitioning and splitting
// ---------------------------------------------------------------------------

inline std::map<int, Dataset> partition_by_sector(const Dataset& data) {
  std::map<int, Dataset> parts;  // ordered by GICS code
  for (const auto& rec : data.records) {
    auto& part = parts[rec.sector];
    if (part.schema.empty()) {
      part.schema = data.schema;
      part.standardization = data.standardization;
    }
    part.records.push_back(rec);
  }
  return parts;
}

inline Dataset subset(const Dataset& data, const std::vector<int>& indices) {
  Dataset out;
  out.schema = data.schema;
  out.standardization = data.standardization;
  out.records.reserve(indices.size());
  for (int i : indices) out.records.push_back(data.records[static_cast<std::size_t>(i)]);
  return out;
}

/// Random split with |train| = round(fraction * n), at least 1.
inline std::pair<Dataset, Dataset> split_train_test(const Dataset& data,
                                                    double train_fraction,
                                                    std::uint64_t seed) {
  const int n = static_cast<int>(data.size());
  if (n == 0) throw EmptyInputError("split_train_test: empty dataset");
  int n_train = static_cast<int>(
      std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::max(n_train, 1);
  if (n_train >= n)
    throw DegenerateSplitError("split leaves an empty test set (n=" +
                               std::to_string(n) + ")");
  std::mt19937_64 rng(seed);
  auto order = shuffled_indices(n, rng);
  std::vector<int> train_idx(order.begin(), order.begin() + n_train);
  std::vector<int> test_idx(order.begin() + n_train, order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {subset(data, train_idx), subset(data, test_idx)};
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

inline Standardization fit_standardization(const Dataset& train) {
  const std::size_t d = train.dim();
  const std::size_t n = train.size();
  Standardization s;
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  if (n == 0) return s;
  for (const auto& rec : train.records)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += rec.features[j];
  for (std::size_t j = 0; j < d; ++j) s.mean[j] /= static_cast<double>(n);
  if (n > 1) {
    for (const auto& rec : train.records)
      for (std::size_t j = 0; j < d; ++j) {
        double diff = rec.features[j] - s.mean[j];
        s.stddev[j] += diff * diff;
      }
    for (std::size_t j = 0; j < d; ++j)
      s.stddev[j] = std::sqrt(s.stddev[j] / static_cast<double>(n - 1));
  }
  return s;
}

inline void apply_standardization(Dataset& data, const Standardization& s) {
  for (auto& rec : data.records)
    for (std::size_t j = 0; j < s.mean.size(); ++j)
      rec.features[j] = s.stddev[j] > 0.0
                            ? (rec.features[j] - s.mean[j]) / s.stddev[j]
                            : 0.0;
  data.standardization = s;
}

/// Z-score both sets with parameters fitted on train only (sample stddev);
/// zero-variance columns become constant 0.
inline std::pair<Dataset, Dataset> standardize(const Dataset& train,
                                               const Dataset& test) {
  if (train.empty()) throw EmptyInputError("standardize: empty training set");
  Standardization s = fit_standardization(train);
  Dataset train_out = train;
  Dataset test_out = test;
  apply_standardization(train_out, s);
  apply_standardization(test_out, s);
  return {train_out, test_out};
}

/// Keeps only the given feature columns (ascending index order).
inline Dataset restrict_features(const Dataset& data,
                                 const std::vector<int>& keep) {
  Dataset out;
  out.schema.reserve(keep.size());
  for (int j : keep) out.schema.push_back(data.schema[static_cast<std::size_t>(j)]);
  if (data.standardization) {
    Standardization s;
    for (int j : keep) {
      s.mean.push_back(data.standardization->mean[static_cast<std::size_t>(j)]);
      s.stddev.push_back(data.standardization->stddev[static_cast<std::size_t>(j)]);
    }
    out.standardization = s;
  }
  out.records.reserve(data.size());
  for (const auto& rec : data.records) {
    StockRecord r = rec;
    r.features.clear();
    r.features.reserve(keep.size());
    for (int j : keep) r.features.push_back(rec.features[static_cast<std::size_t>(j)]);
    out.records.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view v) {
  std::size_t b = v.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  std::size_t e = v.find_last_not_of(" \t\r\n");
  return std::string(v.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::optional<double> parse_double(const std::string& text) {
  if (text.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    double v = std::stod(text, &pos);
    if (pos != text.size()) return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline std::optional<int> parse_int(const std::string& text) {
  if (text.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    int v = std::stoi(text, &pos);
    if (pos != text.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Loads the quarterly CSV format: header row with stock_id, gics_sector,
/// year, quarter, the schema's feature columns, then either a label column
/// or price_initial/price_subsequent. Blank numeric cells are imputed with
/// the column median; rows with an unparseable sector or quarter are
/// rejected with a diagnostic instead of aborting the load.
inline Dataset load_csv(const std::string& path,
                        const std::vector<std::string>& schema,
                        std::vector<std::string>* diagnostics = nullptr) {
  auto diag = [&](std::string msg) {
    if (diagnostics) diagnostics->push_back(std::move(msg));
  };
  std::ifstream in(path);
  if (!in) throw EmptyFileError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw EmptyFileError(path + " is empty");
  auto header = detail::split_csv_line(line);

  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };

  auto need = [&](const std::string& name) {
    auto c = column(name);
    if (!c) throw MissingColumnError("required column '" + name + "' absent");
    return *c;
  };

  const std::size_t col_id = need("stock_id");
  const std::size_t col_sector = need("gics_sector");
  const std::size_t col_year = need("year");
  const std::size_t col_quarter = need("quarter");
  std::vector<std::size_t> feature_cols;
  feature_cols.reserve(schema.size());
  for (const auto& name : schema) feature_cols.push_back(need(name));

  auto col_label = column("label");
  auto col_pi = column("price_initial");
  auto col_ps = column("price_subsequent");
  const bool from_prices = !col_label && col_pi && col_ps;
  if (!col_label && !from_prices)
    throw MissingColumnError(
        "need a 'label' column or both 'price_initial' and "
        "'price_subsequent'");

  {  // warn once per unexpected column
    std::vector<std::string> known{"stock_id", "gics_sector", "year",
                                   "quarter", "label", "price_initial",
                                   "price_subsequent"};
    known.insert(known.end(), schema.begin(), schema.end());
    for (const auto& h : header)
      if (std::find(known.begin(), known.end(), h) == known.end())
        diag("ignoring unknown column '" + h + "'");
  }

  struct RawRow {
    std::string id;
    int sector;
    YearQuarter quarter;
    std::vector<std::optional<double>> features;
    int label;
  };
  std::vector<RawRow> rows;
  std::vector<std::vector<double>> present(schema.size());

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() < header.size()) {
      throw MalformedRowError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " cells, got " +
                              std::to_string(cells.size()));
    }
    auto sector = parse_sector(cells[col_sector]);
    auto year = detail::parse_int(cells[col_year]);
    auto quarter = detail::parse_int(cells[col_quarter]);
    if (!sector || !year || !quarter || *quarter < 1 || *quarter > 4) {
      diag("line " + std::to_string(line_no) +
           ": rejected (unparseable sector/quarter)");
      continue;
    }
    RawRow row;
    row.id = cells[col_id];
    row.sector = *sector;
    row.quarter = {*year, *quarter};
    row.features.resize(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const std::string& cell = cells[feature_cols[j]];
      if (cell.empty()) continue;  // -> imputed below
      auto v = detail::parse_double(cell);
      if (!v)
        throw MalformedRowError("line " + std::to_string(line_no) +
                                ": non-numeric value '" + cell +
                                "' in column " + schema[j]);
      row.features[j] = *v;
      present[j].push_back(*v);
    }
    if (from_prices) {
      auto pi = detail::parse_double(cells[*col_pi]);
      auto ps = detail::parse_double(cells[*col_ps]);
      if (!pi || !ps)
        throw MalformedRowError("line " + std::to_string(line_no) +
                                ": non-numeric price");
      row.label = label_from_prices(*pi, *ps);
    } else {
      auto lv = detail::parse_int(cells[*col_label]);
      if (!lv || (*lv != 1 && *lv != -1))
        throw MalformedRowError("line " + std::to_string(line_no) +
                                ": label must be +1 or -1");
      row.label = *lv;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyFileError(path + " contains no data rows");

  std::vector<double> medians(schema.size(), 0.0);
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (present[j].empty())
      diag("column " + schema[j] + " is entirely blank; imputing 0");
    medians[j] = detail::median_of(present[j]);
  }

  Dataset data;
  data.schema = schema;
  data.records.reserve(rows.size());
  for (auto& row : rows) {
    StockRecord rec;
    rec.stock_id = std::move(row.id);
    rec.sector = row.sector;
    rec.quarter = row.quarter;
    rec.label = row.label;
    rec.features.resize(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j)
      rec.features[j] = row.features[j] ? *row.features[j] : medians[j];
    data.records.push_back(std::move(rec));
  }
  return data;
}

}  // namespace sectorcast
