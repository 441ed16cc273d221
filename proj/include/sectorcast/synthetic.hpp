#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sectorcast/dataset.hpp"
#include "sectorcast/errors.hpp"
#include "sectorcast/rng.hpp"

namespace sectorcast {

/// Synthetic quarterly dataset with a planted linear teacher per sector.
/// Each sector picks its own informative feature subset so Relief-F has a
/// recoverable ground truth; the remaining columns are pure noise. Feature
/// columns carry heterogeneous dollar-like scales, so standardization is
/// exercised. `label_noise` flips each teacher label independently;
/// `margin` rejects latent points too close to the teacher boundary
/// (larger margin -> easier problem). When `shift_at` is set, records
/// stamped at or after that quarter are labeled by a freshly drawn teacher,
/// planting a distribution shift for frozen-model backtests.
struct SyntheticSpec {
  int sectors = 4;               // uses the first `sectors` GICS codes
  int per_sector = 300;          // rows per sector across the quarter range
  int informative = 5;
  double label_noise = 0.1;
  double margin = 0.5;
  YearQuarter first_quarter{2009, 1};
  YearQuarter last_quarter{2009, 1};
  std::optional<YearQuarter> shift_at;
  std::uint64_t seed = 1;
};

namespace detail {

struct Teacher {
  std::vector<int> informative;  // feature indices
  std::vector<double> weight;    // aligned with informative
};

inline Teacher draw_teacher(int dim, int informative, std::mt19937_64& rng) {
  Teacher t;
  t.informative = sample_without_replacement(dim, informative, rng);
  t.weight.reserve(t.informative.size());
  for (std::size_t j = 0; j < t.informative.size(); ++j)
    t.weight.push_back(uniform_index(rng, 2) == 0 ? -1.0 : 1.0);
  return t;
}

inline double teacher_score(const Teacher& t, const std::vector<double>& z) {
  double s = 0.0;
  for (std::size_t j = 0; j < t.informative.size(); ++j)
    s += t.weight[j] * z[static_cast<std::size_t>(t.informative[j])];
  return s / std::sqrt(static_cast<double>(t.informative.size()));
}

inline void format_cell(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  out += buf;
}

}  // namespace detail

inline void generate_synthetic(const SyntheticSpec& spec, std::ostream& out) {
  const auto& schema = table1_schema();
  const int dim = static_cast<int>(schema.size());
  if (spec.sectors < 1 || spec.sectors > static_cast<int>(kGicsSectors.size()))
    throw ConfigError("generate_synthetic: sectors must be 1..10");
  if (spec.per_sector < 1)
    throw ConfigError("generate_synthetic: per_sector must be >= 1");
  if (spec.informative < 1 || spec.informative > dim)
    throw ConfigError("generate_synthetic: informative must be 1..30");
  if (spec.last_quarter < spec.first_quarter)
    throw ConfigError("generate_synthetic: quarter range is empty");

  std::vector<YearQuarter> quarters;
  for (YearQuarter q = spec.first_quarter;; q = next_quarter(q)) {
    quarters.push_back(q);
    if (q == spec.last_quarter) break;
  }

  // Per-column dollar-like scales and offsets, fixed by column index.
  std::vector<double> scale(static_cast<std::size_t>(dim)),
      offset(static_cast<std::size_t>(dim));
  for (int j = 0; j < dim; ++j) {
    scale[static_cast<std::size_t>(j)] = std::pow(10.0, 1 + j % 4);
    offset[static_cast<std::size_t>(j)] = 50.0 * (1 + j % 7);
  }

  std::string line = "stock_id,gics_sector,year,quarter";
  for (const auto& name : schema) line += "," + name;
  line += ",label\n";
  out << line;

  for (int s = 0; s < spec.sectors; ++s) {
    const int sector_code = kGicsSectors[static_cast<std::size_t>(s)].code;
    std::mt19937_64 teacher_rng(
        derive_seed(spec.seed, 0xA0 + static_cast<std::uint64_t>(s)));
    const detail::Teacher base =
        detail::draw_teacher(dim, spec.informative, teacher_rng);
    const detail::Teacher shifted =
        detail::draw_teacher(dim, spec.informative, teacher_rng);

    std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(s)));
    for (int i = 0; i < spec.per_sector; ++i) {
      const YearQuarter quarter =
          quarters[static_cast<std::size_t>(i) % quarters.size()];
      const detail::Teacher& teacher =
          spec.shift_at && !(quarter < *spec.shift_at) ? shifted : base;

      std::vector<double> z(static_cast<std::size_t>(dim));
      double score = 0.0;
      for (int attempt = 0; attempt < 1000; ++attempt) {
        for (auto& v : z) v = gaussian(rng);
        score = detail::teacher_score(teacher, z);
        if (std::abs(score) >= spec.margin) break;
      }
      int label = score > 0.0 ? +1 : -1;
      if (spec.label_noise > 0.0 && uniform_real(rng) < spec.label_noise)
        label = -label;

      line.clear();
      line += "S" + std::to_string(sector_code) + "_" + std::to_string(i);
      line += "," + std::to_string(sector_code);
      line += "," + std::to_string(quarter.year);
      line += "," + std::to_string(quarter.quarter);
      for (int j = 0; j < dim; ++j) {
        line += ',';
        detail::format_cell(line, offset[static_cast<std::size_t>(j)] +
                                      scale[static_cast<std::size_t>(j)] *
                                          z[static_cast<std::size_t>(j)]);
      }
      line += "," + std::to_string(label);
      line += '\n';
      out << line;
    }
  }
}

inline void generate_synthetic(const SyntheticSpec& spec,
                               const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("generate_synthetic: cannot write " + path);
  generate_synthetic(spec, out);
}

}  // namespace sectorcast
