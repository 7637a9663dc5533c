#pragma once

/** @file data.hpp
 *  Dataset representation and CSV ingestion for right-censored survival data:
 *  a raw string table (Table), the numeric SurvivalDataset consumed by the
 *  estimators, complete-case filtering, per-term transforms, binary/continuous
 *  column detection, and covariate standardization with a scaling record.
 */

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "formula.hpp"
#include "types.hpp"

namespace afttest {

enum class ColumnKind { continuous, binary };

/** Affine record mapping a stored column back to its source scale:
 *  source = center + scale * stored. Identity means untouched. */
struct ColumnScaling {
  double center = 0.0;
  double scale = 1.0;
  bool is_identity() const { return center == 0.0 && scale == 1.0; }
};

/** Fully validated numeric dataset: observed times X_i, event indicators
 *  Delta_i, and the n x p covariate matrix with one row per subject. */
struct SurvivalDataset {
  Vector time;        ///< X_i, strictly positive
  Vector status;      ///< Delta_i in {0, 1}; 1 = event
  Matrix covariates;  ///< Z_i rows, possibly standardized (see scaling)
  std::vector<std::string> names;      ///< one per covariate column
  std::vector<ColumnKind> kinds;       ///< binary columns are never scaled
  std::vector<ColumnScaling> scaling;  ///< per-column scaling applied

  std::size_t rows_read = 0;     ///< data rows in the source file
  std::size_t rows_dropped = 0;  ///< removed by complete-case filtering

  Index n() const { return time.size(); }
  Index p() const { return covariates.cols(); }

  /** Enforce the type invariants; throws on violation. */
  void validate() const {
    if (n() == 0) throw EmptyInput();
    if (n() < 2)
      throw Error("dataset needs at least 2 usable rows, have 1");
    if (status.size() != n() || covariates.rows() != n())
      throw Error("time/status/covariate row counts disagree");
    if (p() < 1) throw Error("dataset needs at least one covariate");
    for (Index i = 0; i < n(); ++i) {
      if (!(time[i] > 0.0))
        throw NonPositiveTime(static_cast<std::size_t>(i) + 1);
      if (status[i] != 0.0 && status[i] != 1.0)
        throw Error("status must be 0 or 1 in row " + std::to_string(i + 1));
    }
    if ((status.array() == 1.0).count() == 0) throw NoEvents();
    for (std::size_t q = 0; q < kinds.size(); ++q) {
      if (kinds[q] != ColumnKind::binary) continue;
      std::set<double> seen;
      for (Index i = 0; i < n(); ++i) seen.insert(covariates(i, q));
      if (seen.size() != 2)
        throw Error("column flagged binary does not take exactly two "
                    "distinct values: " + names[q]);
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool cell_missing(const std::string& cell) {
  return cell.empty() || cell == "NA";
}

inline bool parse_double(const std::string& cell, double& out) {
  const char* first = cell.data();
  const char* last = first + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

/** Shortest round-trip decimal rendering of a double. */
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/** Raw string table: header plus rows of cells; "" or "NA" marks a missing
 *  value. Non-numeric columns are carried verbatim. */
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  /** Column position or -1. */
  std::ptrdiff_t find_column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? -1 : it - columns.begin();
  }

  std::ptrdiff_t require_column(const std::string& name) const {
    const auto idx = find_column(name);
    if (idx < 0) throw MissingColumn(name);
    return idx;
  }

  static Table read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    Table t;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() && in.peek() == std::ifstream::traits_type::eof())
        break;
      std::vector<std::string> cells;
      std::string cell;
      std::istringstream ls(line);
      while (std::getline(ls, cell, ',')) cells.push_back(detail::trim(cell));
      if (!line.empty() && line.back() == ',') cells.push_back("");
      if (header) {
        t.columns = std::move(cells);
        header = false;
        continue;
      }
      if (cells.size() != t.columns.size())
        throw Error("row " + std::to_string(t.rows.size() + 1) + " has " +
                    std::to_string(cells.size()) + " fields, expected " +
                    std::to_string(t.columns.size()));
      t.rows.push_back(std::move(cells));
    }
    if (t.columns.empty()) throw EmptyInput();
    return t;
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    for (std::size_t j = 0; j < columns.size(); ++j)
      out << (j ? "," : "") << columns[j];
    out << "\n";
    for (const auto& row : rows) {
      for (std::size_t j = 0; j < row.size(); ++j)
        out << (j ? "," : "") << row[j];
      out << "\n";
    }
  }
};

/** Build a SurvivalDataset from a table and a parsed model: complete-case
 *  filter on the referenced columns, apply per-term transforms, detect column
 *  kinds (exactly two distinct values => binary, overridable by display
 *  name), and validate. Row numbers in errors are 1-based data rows of the
 *  source table. */
inline SurvivalDataset ingest_table(
    const Table& table, const ModelSpec& spec,
    const std::map<std::string, ColumnKind>& kind_overrides = {}) {
  const std::ptrdiff_t time_idx = table.require_column(spec.time_col);
  const std::ptrdiff_t status_idx = table.require_column(spec.status_col);
  std::vector<std::ptrdiff_t> term_idx;
  for (const Term& t : spec.terms)
    term_idx.push_back(table.require_column(t.source));

  const std::size_t p = spec.terms.size();
  std::vector<double> time_v, status_v;
  std::vector<std::vector<double>> cols(p);
  std::size_t dropped = 0;

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t row_no = r + 1;
    bool missing = detail::cell_missing(row[time_idx]) ||
                   detail::cell_missing(row[status_idx]);
    for (const auto idx : term_idx)
      missing = missing || detail::cell_missing(row[idx]);
    if (missing) {
      ++dropped;
      continue;
    }

    double tval, sval;
    if (!detail::parse_double(row[time_idx], tval))
      throw UnparseableValue(row_no, spec.time_col, "not a number");
    if (!(tval > 0.0)) throw NonPositiveTime(row_no);
    if (!detail::parse_double(row[status_idx], sval))
      throw UnparseableValue(row_no, spec.status_col, "not a number");
    if (sval != 0.0 && sval != 1.0)
      throw UnparseableValue(row_no, spec.status_col, "status must be 0 or 1");

    std::vector<double> z(p);
    for (std::size_t q = 0; q < p; ++q) {
      double v;
      if (!detail::parse_double(row[term_idx[q]], v))
        throw UnparseableValue(row_no, spec.terms[q].source, "not a number");
      if (spec.terms[q].transform == Transform::log_transform) {
        if (!(v > 0.0))
          throw UnparseableValue(row_no, spec.terms[q].source,
                                 "log of non-positive value");
        v = std::log(v);
      }
      z[q] = v;
    }
    time_v.push_back(tval);
    status_v.push_back(sval);
    for (std::size_t q = 0; q < p; ++q) cols[q].push_back(z[q]);
  }

  SurvivalDataset d;
  d.rows_read = table.rows.size();
  d.rows_dropped = dropped;
  const std::size_t n = time_v.size();
  d.time = Eigen::Map<const Vector>(time_v.data(), n);
  d.status = Eigen::Map<const Vector>(status_v.data(), n);
  d.covariates.resize(n, p);
  for (std::size_t q = 0; q < p; ++q)
    d.covariates.col(q) = Eigen::Map<const Vector>(cols[q].data(), n);

  for (std::size_t q = 0; q < p; ++q) {
    d.names.push_back(spec.terms[q].display_name());
    std::set<double> distinct(cols[q].begin(), cols[q].end());
    d.kinds.push_back(distinct.size() == 2 ? ColumnKind::binary
                                           : ColumnKind::continuous);
    d.scaling.push_back(ColumnScaling{});
  }
  for (const auto& [name, kind] : kind_overrides) {
    const auto it = std::find(d.names.begin(), d.names.end(), name);
    if (it == d.names.end()) throw MissingColumn(name);
    d.kinds[it - d.names.begin()] = kind;
  }

  d.validate();
  return d;
}

inline SurvivalDataset ingest_csv(
    const std::string& path, const ModelSpec& spec,
    const std::map<std::string, ColumnKind>& kind_overrides = {}) {
  return ingest_table(Table::read_csv(path), spec, kind_overrides);
}

/** Center each continuous column to mean 0 and scale it to sample standard
 *  deviation 1 (divisor n-1), composing with any scaling already recorded so
 *  the source scale stays recoverable. Binary columns are untouched.
 *  Idempotent up to floating tolerance. */
inline SurvivalDataset standardize_covariates(SurvivalDataset d) {
  const Index n = d.n();
  for (Index q = 0; q < d.p(); ++q) {
    if (d.kinds[q] == ColumnKind::binary) continue;
    auto col = d.covariates.col(q);
    const double mean = col.mean();
    const double sd =
        std::sqrt((col.array() - mean).square().sum() /
                  static_cast<double>(n - 1));
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean)))
      throw ZeroVariance(d.names[q]);
    col = (col.array() - mean) / sd;
    auto& rec = d.scaling[q];
    rec.center = rec.center + rec.scale * mean;
    rec.scale = rec.scale * sd;
  }
  return d;
}

/** Map a coefficient vector from the stored (possibly standardized) covariate
 *  scale back to the source scale: beta_source[q] = beta[q] / scale[q]. The
 *  centering only shifts the error location and does not affect the
 *  coefficients. */
inline Vector unscale_coefficients(const SurvivalDataset& d,
                                   const Vector& beta) {
  Vector out = beta;
  for (Index q = 0; q < d.p(); ++q) out[q] /= d.scaling[q].scale;
  return out;
}

/** Apply the PBC case-study recoding on the raw table: trt (1/2) -> (0/1),
 *  status (0/1/2) -> event indicator (status == 2), and a log_bili column
 *  appended (or overwritten) as log(bili). Missing cells stay missing. */
inline Table recode_pbc(Table table) {
  const std::ptrdiff_t trt = table.require_column("trt");
  const std::ptrdiff_t status = table.require_column("status");
  const std::ptrdiff_t bili = table.require_column("bili");

  std::ptrdiff_t log_bili = table.find_column("log_bili");
  if (log_bili < 0) {
    table.columns.push_back("log_bili");
    log_bili = static_cast<std::ptrdiff_t>(table.columns.size()) - 1;
    for (auto& row : table.rows) row.push_back("");
  }

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    auto& row = table.rows[r];
    const std::size_t row_no = r + 1;
    double v;
    if (!detail::cell_missing(row[trt])) {
      if (!detail::parse_double(row[trt], v))
        throw UnparseableValue(row_no, "trt", "not a number");
      row[trt] = detail::format_double(v - 1.0);
    }
    if (!detail::cell_missing(row[status])) {
      if (!detail::parse_double(row[status], v))
        throw UnparseableValue(row_no, "status", "not a number");
      row[status] = v == 2.0 ? "1" : "0";
    }
    if (!detail::cell_missing(row[bili])) {
      if (!detail::parse_double(row[bili], v))
        throw UnparseableValue(row_no, "bili", "not a number");
      if (!(v > 0.0))
        throw UnparseableValue(row_no, "bili", "log of non-positive value");
      row[log_bili] = detail::format_double(std::log(v));
    } else {
      row[log_bili] = "";
    }
  }
  return table;
}

}  // namespace afttest
