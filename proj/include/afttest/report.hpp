#pragma once

/** @file report.hpp
 *  Result persistence and rendering: a diagnostic-test run serializes to a
 *  self-contained JSON document (estimate, processes, resampled paths,
 *  p-values, the analyzed data, and the invoking call), and a stored
 *  document renders to an SVG figure with a sibling CSV holding the plotted
 *  series at full precision.
 *
 *  Process layout in JSON: link / covform processes are flat length-n arrays
 *  over the ordered anchors; omnibus processes are n x n nested arrays,
 *  outer index = time on the ordered residual grid, inner index = anchor.
 */

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "data.hpp"
#include "errors.hpp"
#include "gof.hpp"
#include "types.hpp"

namespace afttest {

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

inline nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline nlohmann::json rows_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

/** Omnibus processes serialize as nested rows; one-column processes as a
 *  flat array. */
inline nlohmann::json process_to_json(const Matrix& m, bool omnibus) {
  if (omnibus) return rows_to_json(m);
  return vector_to_json(m.col(0));
}

}  // namespace detail

inline nlohmann::json result_to_json(const GofTestResult& r,
                                     const std::string& call) {
  const bool omnibus = r.test.kind == TestKind::omnibus;
  nlohmann::json j;
  j["version"] = kVersion;
  j["call"] = call;
  j["beta"] = detail::vector_to_json(r.beta);
  j["beta_source_scale"] = detail::vector_to_json(r.beta_source_scale);
  j["p_value"] = r.p_value;
  j["p_std_value"] = r.p_std_value;
  j["testType"] = to_string(r.test.kind);
  j["cov_tested"] = r.test.cov_index;
  j["estMethod"] = to_string(r.est_method);
  if (r.eq_type)
    j["eqType"] = to_string(*r.eq_type);
  else
    j["eqType"] = nullptr;
  j["npath"] = r.npath;
  j["npath_effective"] = r.npath_effective;
  j["npathsave"] = r.npathsave;
  j["seed"] = r.seed;

  j["obs_process"] = detail::process_to_json(r.obs_process, omnibus);
  j["obs_std_process"] = detail::process_to_json(r.obs_std_process, omnibus);
  j["SE_process"] = detail::process_to_json(r.SE_process, omnibus);
  nlohmann::json paths = nlohmann::json::array();
  for (const Matrix& w : r.apprx_process)
    paths.push_back(detail::process_to_json(w, omnibus));
  j["apprx_process"] = std::move(paths);
  nlohmann::json paths_std = nlohmann::json::array();
  for (const Matrix& w : r.apprx_std_process)
    paths_std.push_back(detail::process_to_json(w, omnibus));
  j["apprx_std_process"] = std::move(paths_std);

  nlohmann::json data;
  data["time"] = detail::vector_to_json(r.time);
  data["delta"] = detail::vector_to_json(r.delta);
  data["covariates"] = detail::rows_to_json(r.covariates);
  j["data"] = std::move(data);
  j["covariate_names"] = r.cov_names;
  j["time_order"] = r.time_order;
  return j;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << j.dump() << '\n';
  if (!out) throw Error("cannot write " + path);
}

/** Load and validate a stored result document. Anything that is not a
 *  well-formed result produced by this tool is rejected with the same
 *  message, so downstream commands fail predictably. */
inline nlohmann::json load_result(const std::string& path) {
  static const char* kRequired[] = {
      "beta",       "p_value",       "p_std_value",      "SE_process",
      "obs_process", "apprx_process", "obs_std_process",
      "apprx_std_process", "npath",  "npath_effective",  "npathsave",
      "testType",   "estMethod",     "eqType",           "seed",
      "data",       "version",       "call"};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception&) {
    throw Error("Must be afttest class");
  }
  if (!j.is_object()) throw Error("Must be afttest class");
  for (const char* key : kRequired)
    if (!j.contains(key)) throw Error("Must be afttest class");
  const std::string t = j["testType"].is_string() ? j["testType"].get<std::string>() : "";
  if (t != "omnibus" && t != "link" && t != "covform")
    throw Error("Must be afttest class");
  if (!j["obs_process"].is_array() || !j["apprx_process"].is_array() ||
      !j["data"].is_object())
    throw Error("Must be afttest class");
  return j;
}

struct PlotOptions {
  int npath = 50;  ///< paths drawn per panel, capped at what is stored
  bool standardized = true;
  std::vector<double> quantiles = {10, 25, 50, 75, 90};  ///< omnibus panels
};

namespace detail {

struct PlotSeries {
  std::string name;
  std::vector<double> y;
  bool observed = false;
};

struct PlotPanel {
  std::string title;
  std::vector<PlotSeries> series;
};

inline std::vector<double> flat_from_json(const nlohmann::json& a) {
  std::vector<double> v;
  v.reserve(a.size());
  for (const auto& x : a) v.push_back(x.get<double>());
  return v;
}

/** One anchor's time series from a nested (time x anchor) process. */
inline std::vector<double> column_from_json(const nlohmann::json& rows,
                                            std::size_t col) {
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& row : rows) v.push_back(row.at(col).get<double>());
  return v;
}

inline std::string format_coord(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

inline void render_svg(const std::vector<PlotPanel>& panels,
                       const std::string& path) {
  constexpr double W = 680, H = 220;
  constexpr double ml = 52, mr = 16, mt = 26, mb = 24;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  const double total_h = H * panels.size();
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << total_h << "\" viewBox=\"0 0 " << W << " "
      << total_h << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << total_h
      << "\" fill=\"#ffffff\"/>\n";

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const PlotPanel& panel = panels[pi];
    const double top = pi * H;
    const double x0 = ml, x1 = W - mr;
    const double y0 = top + mt, y1 = top + H - mb;
    double lo = 0, hi = 0;
    bool first = true;
    std::size_t npts = 0;
    for (const auto& s : panel.series) {
      npts = std::max(npts, s.y.size());
      for (double v : s.y) {
        if (first) { lo = hi = v; first = false; }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (first) { lo = -1; hi = 1; }
    if (hi - lo < 1e-12) { lo -= 1; hi += 1; }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const auto map_x = [&](std::size_t i) {
      return npts <= 1 ? x0
                       : x0 + (x1 - x0) * static_cast<double>(i) /
                                 static_cast<double>(npts - 1);
    };
    const auto map_y = [&](double v) {
      return y1 - (y1 - y0) * (v - lo) / (hi - lo);
    };

    out << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << x1 - x0
        << "\" height=\"" << y1 - y0
        << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    if (lo < 0 && hi > 0) {
      const double zy = map_y(0);
      out << "<line x1=\"" << x0 << "\" y1=\"" << format_coord(zy)
          << "\" x2=\"" << x1 << "\" y2=\"" << format_coord(zy)
          << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    }
    // draw background paths first, the observed series on top
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& s : panel.series) {
        if (s.observed != (pass == 1)) continue;
        out << "<polyline fill=\"none\" stroke=\""
            << (s.observed ? "#cc0000" : "#bbbbbb") << "\" stroke-width=\""
            << (s.observed ? "1.5" : "1") << "\" points=\"";
        for (std::size_t i = 0; i < s.y.size(); ++i) {
          if (i) out << ' ';
          out << format_coord(map_x(i)) << ',' << format_coord(map_y(s.y[i]));
        }
        out << "\"/>\n";
      }
    }
    out << "<text x=\"" << x0 << "\" y=\"" << top + 17
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#000\">"
        << panel.title << "</text>\n";
    out << "<text x=\"" << x0 - 6 << "\" y=\"" << y0 + 4
        << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#555\" "
           "text-anchor=\"end\">"
        << format_coord(hi) << "</text>\n";
    out << "<text x=\"" << x0 - 6 << "\" y=\"" << y1
        << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#555\" "
           "text-anchor=\"end\">"
        << format_coord(lo) << "</text>\n";
    out << "<text x=\"" << x1 << "\" y=\"" << y1 + 14
        << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#555\" "
           "text-anchor=\"end\">"
        << npts << "</text>\n";
    out << "<text x=\"" << x0 << "\" y=\"" << y1 + 14
        << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#555\">1"
        << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw Error("cannot write " + path);
}

inline void write_series_csv(const std::vector<PlotPanel>& panels,
                             const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "panel,series,x,y\n";
  for (std::size_t pi = 0; pi < panels.size(); ++pi)
    for (const auto& s : panels[pi].series)
      for (std::size_t i = 0; i < s.y.size(); ++i)
        out << pi + 1 << ',' << s.name << ',' << i + 1 << ','
            << format_double(s.y[i]) << '\n';
  if (!out) throw Error("cannot write " + path);
}

}  // namespace detail

/** Render a stored result to `svg_path`; the plotted series are also written
 *  to the sibling CSV (same stem, .csv) as panel,series,x,y rows. Returns
 *  the CSV path. */
inline std::string emit_plot(const nlohmann::json& doc, const PlotOptions& opt,
                             const std::string& svg_path) {
  if (opt.quantiles.size() != 5) throw QuantileCountNotFive(opt.quantiles.size());
  const std::string t = doc.at("testType").get<std::string>();
  const bool omnibus = t == "omnibus";
  const char* obs_key = opt.standardized ? "obs_std_process" : "obs_process";
  const char* path_key = opt.standardized ? "apprx_std_process" : "apprx_process";
  const auto& obs = doc.at(obs_key);
  const auto& paths = doc.at(path_key);
  const int stored = static_cast<int>(paths.size());
  const int shown = std::max(0, std::min(opt.npath, stored));
  const std::size_t n = obs.size();

  std::vector<detail::PlotPanel> panels;
  // Omnibus panels fix one z anchor (`anchor_idx`) and run over the time
  // grid; link/covform have a single panel running over the anchors.
  const auto build_panel = [&](const std::string& title, std::size_t anchor_idx,
                               bool slice_anchor) {
    detail::PlotPanel panel;
    panel.title = title;
    for (int b = 0; b < shown; ++b) {
      detail::PlotSeries s;
      s.name = "path" + std::to_string(b + 1);
      s.y = slice_anchor ? detail::column_from_json(paths.at(b), anchor_idx)
                         : detail::flat_from_json(paths.at(b));
      panel.series.push_back(std::move(s));
    }
    detail::PlotSeries so;
    so.name = "observed";
    so.observed = true;
    so.y = slice_anchor ? detail::column_from_json(obs, anchor_idx)
                        : detail::flat_from_json(obs);
    panel.series.push_back(std::move(so));
    panels.push_back(std::move(panel));
  };

  if (omnibus) {
    for (double q : opt.quantiles) {
      const auto idx = std::min<std::size_t>(
          n, std::max<std::size_t>(
                 1, static_cast<std::size_t>(
                        std::ceil(q * static_cast<double>(n) / 100.0))));
      build_panel("omnibus, z quantile " + detail::format_double(q) + "% (z[" +
                      std::to_string(idx) + "])",
                  idx - 1, true);
    }
  } else if (t == "link") {
    build_panel("link", 0, false);
  } else {
    std::string name = "covariate " + doc.value("cov_tested", nlohmann::json(1)).dump();
    if (doc.contains("covariate_names") && doc.contains("cov_tested")) {
      const int ct = doc["cov_tested"].get<int>();
      const auto& names = doc["covariate_names"];
      if (ct >= 1 && static_cast<std::size_t>(ct) <= names.size())
        name = names.at(ct - 1).get<std::string>();
    }
    build_panel("covform (" + name + ")", 0, false);
  }

  detail::render_svg(panels, svg_path);
  std::filesystem::path csv = svg_path;
  csv.replace_extension(".csv");
  detail::write_series_csv(panels, csv.string());
  return csv.string();
}

}  // namespace afttest
