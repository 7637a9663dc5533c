/** afttest — fit semiparametric accelerated failure time models to
 *  right-censored data and check their adequacy with cumulative-sum
 *  diagnostics under multiplier resampling.
 *
 *  Subcommands: fit, test, plot, simulate. Exit codes: 0 success,
 *  1 runtime failure (bad data, unreadable result, ...), 2 usage error.
 */

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "afttest/afttest.hpp"

namespace {

using namespace afttest;

/** Reconstruct the invocation for the `call` echo in result documents. */
std::string join_call(int argc, char** argv) {
  std::string call;
  for (int i = 0; i < argc; ++i) {
    if (i) call += ' ';
    const std::string a = argv[i];
    const bool needs_quotes = a.find_first_of(" \t\"") != std::string::npos;
    if (!needs_quotes) {
      call += a;
      continue;
    }
    call += '"';
    for (char c : a) {
      if (c == '"') call += '\\';
      call += c;
    }
    call += '"';
  }
  return call;
}

std::vector<double> parse_double_list(const std::string& s,
                                      const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0;
    if (!detail::parse_double(detail::trim(item), v))
      throw Error("cannot parse " + what + " entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error(what + " must not be empty");
  return out;
}

EstMethod parse_est(const std::string& s) {
  if (s == "rr") return EstMethod::rr;
  if (s == "ls") return EstMethod::ls;
  throw Error("unknown --est-method '" + s + "' (expected rr or ls)");
}

EqType parse_eq(const std::string& s) {
  if (s == "ns") return EqType::ns;
  if (s == "is") return EqType::is;
  throw Error("unknown --eq-type '" + s + "' (expected ns or is)");
}

TestKind parse_test_kind(const std::string& s) {
  if (s == "omnibus") return TestKind::omnibus;
  if (s == "link") return TestKind::link;
  if (s == "covform") return TestKind::covform;
  throw Error("unknown --test-type '" + s +
              "' (expected omnibus, link, or covform)");
}

/** Options shared by `fit` and `test`: dataset, model, estimator. */
struct ModelArgs {
  std::string data_path;
  std::string formula;
  std::string est_method = "rr";
  std::string eq_type = "ns";
  std::vector<std::string> cov_kinds;  ///< name=binary|continuous overrides
  bool no_standardize = false;
};

void add_model_flags(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--data", m.data_path, "input CSV with header row")
      ->required();
  cmd->add_option("--formula", m.formula,
                  "model formula, e.g. \"Surv(time,status) ~ age + log(bili)\"")
      ->required();
  cmd->add_option("--est-method", m.est_method,
                  "estimator: rr (rank) or ls (least squares)")
      ->default_val("rr");
  cmd->add_option("--eq-type", m.eq_type,
                  "rank estimating equation: ns or is")
      ->default_val("ns");
  cmd->add_option("--cov-kind", m.cov_kinds,
                  "override automatic kind detection, NAME=binary|continuous "
                  "(repeatable)");
  cmd->add_flag("--no-standardize", m.no_standardize,
                "fit continuous covariates on their source scale");
}

struct PreparedModel {
  ModelSpec spec;
  SurvivalDataset data;
  EstMethod est = EstMethod::rr;
  EqType eq = EqType::ns;
};

PreparedModel prepare(const ModelArgs& m) {
  PreparedModel out;
  out.spec = parse_formula(m.formula);
  out.est = parse_est(m.est_method);
  out.eq = parse_eq(m.eq_type);

  std::map<std::string, ColumnKind> overrides;
  for (const std::string& kv : m.cov_kinds) {
    const auto eq_pos = kv.find('=');
    if (eq_pos == std::string::npos)
      throw Error("--cov-kind expects NAME=binary|continuous, got '" + kv + "'");
    const std::string name = detail::trim(kv.substr(0, eq_pos));
    const std::string kind = detail::trim(kv.substr(eq_pos + 1));
    if (kind == "binary")
      overrides[name] = ColumnKind::binary;
    else if (kind == "continuous")
      overrides[name] = ColumnKind::continuous;
    else
      throw Error("unknown covariate kind '" + kind + "'");
  }

  out.data = ingest_csv(m.data_path, out.spec, overrides);
  if (!m.no_standardize) out.data = standardize_covariates(out.data);
  return out;
}

FitResult fit_model(const PreparedModel& pm, const FitOptions& opt = {}) {
  if (pm.est == EstMethod::rr) return fit_rank(pm.data, pm.eq, opt);
  return fit_ls(pm.data, opt);
}

nlohmann::json fit_to_json(const PreparedModel& pm, const FitResult& fit) {
  nlohmann::json j;
  j["beta"] = detail::vector_to_json(fit.beta_hat);
  j["beta_source_scale"] = detail::vector_to_json(fit.beta_source_scale);
  j["covariate_names"] = pm.data.names;
  j["estMethod"] = to_string(fit.est_method);
  if (fit.eq_type)
    j["eqType"] = to_string(*fit.eq_type);
  else
    j["eqType"] = nullptr;
  j["converged"] = fit.solver.converged || fit.converged_nonsmooth;
  j["iterations"] = fit.solver.iterations;
  j["score_norm"] = fit.solver.f_norm;
  j["oscillated"] = fit.oscillated;
  j["n"] = pm.data.n();
  j["rows_dropped"] = static_cast<std::int64_t>(pm.data.rows_dropped);
  return j;
}

int run_fit(const ModelArgs& margs) {
  const PreparedModel pm = prepare(margs);
  const FitResult fit = fit_model(pm);
  std::cout << fit_to_json(pm, fit).dump(2) << '\n';
  return 0;
}

int run_test(const ModelArgs& margs, const std::string& test_type,
             const std::string& cov_tested, int npath, int npathsave,
             std::uint64_t seed, int threads, const std::string& out_path,
             const std::string& call) {
  const PreparedModel pm = prepare(margs);

  TestType test;
  test.kind = parse_test_kind(test_type);
  if (test.kind == TestKind::covform)
    test.cov_index =
        static_cast<int>(resolve_covariate(pm.spec, cov_tested)) ;

  GofConfig cfg;
  cfg.npath = npath;
  cfg.npathsave = npathsave;
  cfg.seed = seed;
  cfg.threads = threads;

  const FitResult fit = fit_model(pm, cfg.fit);
  const GofTestResult r =
      run_afttest(pm.data, test, pm.est, pm.eq, cfg, &fit);
  write_json(result_to_json(r, call), out_path);

  std::cout << "test: " << to_string(test.kind);
  if (test.kind == TestKind::covform)
    std::cout << " (" << pm.data.names[test.cov_index - 1] << ")";
  std::cout << "\np_value: " << detail::format_double(r.p_value)
            << "\np_std_value: " << detail::format_double(r.p_std_value)
            << "\nnpath_effective: " << r.npath_effective << "\nresult: "
            << out_path << '\n';
  return 0;
}

int run_plot(const std::string& result_path, int npath, bool standardized,
             const std::string& quantiles, const std::string& out_opt) {
  const nlohmann::json doc = load_result(result_path);
  PlotOptions opt;
  opt.npath = npath;
  opt.standardized = standardized;
  if (!quantiles.empty()) opt.quantiles = parse_double_list(quantiles, "--quantiles");

  std::string out = out_opt;
  if (out.empty()) {
    std::filesystem::path p = result_path;
    p.replace_extension(".svg");
    out = p.string();
  }
  const std::string csv = emit_plot(doc, opt, out);
  std::cout << "plot: " << out << "\nseries: " << csv << '\n';
  return 0;
}

int run_simulate(const SimConfig& cfg, const std::string& test_type,
                 int cov_tested, const std::string& out_path) {
  TestType test;
  test.kind = parse_test_kind(test_type);
  test.cov_index = cov_tested;
  const RejectionSummary s = rejection_rate(cfg, test);

  std::ostringstream csv;
  csv << "test,cov,est,eq,n,p,reps,npath,alpha,seed,target_censoring,"
         "achieved_censoring,rate,rate_std\n";
  csv << to_string(test.kind) << ',' << test.cov_index << ','
      << to_string(cfg.est_method) << ',' << to_string(cfg.eq_type) << ','
      << cfg.n << ',' << cfg.beta0.size() << ',' << cfg.replications << ','
      << cfg.npath << ',' << detail::format_double(cfg.alpha) << ',' << cfg.seed
      << ',' << detail::format_double(cfg.target_censoring) << ','
      << detail::format_double(s.achieved_censoring) << ','
      << detail::format_double(s.rate) << ',' << detail::format_double(s.rate_std)
      << '\n';
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw Error("cannot write " + out_path);
    f << csv.str();
    std::cout << "results: " << out_path << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "afttest: semiparametric accelerated failure time fitting and "
      "model-checking"};
  app.require_subcommand(1);
  const std::string call = join_call(argc, argv);

  ModelArgs fit_args;
  CLI::App* fit_cmd =
      app.add_subcommand("fit", "estimate regression coefficients");
  add_model_flags(fit_cmd, fit_args);

  ModelArgs test_args;
  std::string test_type = "omnibus";
  std::string cov_tested = "1";
  int npath = 200;
  int npathsave = 50;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string test_out;
  CLI::App* test_cmd = app.add_subcommand(
      "test", "fit, then run one adequacy test with multiplier resampling");
  add_model_flags(test_cmd, test_args);
  test_cmd->add_option("--test-type", test_type, "omnibus, link, or covform")
      ->default_val("omnibus");
  test_cmd->add_option("--cov-tested", cov_tested,
                       "covform target: covariate name or 1-based index")
      ->default_val("1");
  test_cmd->add_option("--npath", npath, "resampled paths")->default_val(200);
  test_cmd->add_option("--npathsave", npathsave,
                       "paths stored in the result document")
      ->default_val(50);
  test_cmd->add_option("--seed", seed, "resampling seed")->default_val(1);
  test_cmd->add_option("--threads", threads, "worker threads for resampling")
      ->envname("AFTTEST_THREADS")
      ->default_val(1);
  test_cmd->add_option("--out", test_out, "result JSON path")->required();

  std::string plot_result;
  int plot_npath = 50;
  bool plot_std = true;
  std::string plot_quantiles;
  std::string plot_out;
  CLI::App* plot_cmd =
      app.add_subcommand("plot", "render a stored result as SVG + CSV");
  plot_cmd->add_option("result", plot_result, "result JSON from `test`")
      ->required();
  plot_cmd->add_option("--npath", plot_npath,
                       "paths to draw (capped at the stored count)")
      ->default_val(50);
  plot_cmd->add_option("--std", plot_std,
                       "plot standardized processes (true|false)")
      ->default_val(true);
  plot_cmd->add_option("--quantiles", plot_quantiles,
                       "five comma-separated anchor percentiles "
                       "(default 10,25,50,75,90)");
  plot_cmd->add_option("--out", plot_out,
                       "output SVG path (default: result stem + .svg)");

  SimConfig sim;
  std::string sim_beta = "1";
  std::string sim_error = "normal";
  std::string sim_misspec = "none";
  std::string sim_est = "rr";
  std::string sim_eq = "ns";
  std::string sim_test_type = "omnibus";
  int sim_cov_tested = 1;
  std::string sim_out;
  long long sim_n = 100;
  CLI::App* sim_cmd = app.add_subcommand(
      "simulate", "rejection-rate study on synthetic data (CSV out)");
  sim_cmd->add_option("--n", sim_n, "sample size per replication")
      ->default_val(100);
  sim_cmd->add_option("--beta", sim_beta,
                      "true coefficients, comma-separated")
      ->default_val("1");
  sim_cmd->add_option("--error", sim_error,
                      "error distribution: normal or extreme_value")
      ->default_val("normal");
  sim_cmd->add_option("--sigma", sim.sigma, "error scale")->default_val(1.0);
  sim_cmd->add_option("--censoring", sim.target_censoring,
                      "target censoring fraction in [0,1)")
      ->default_val(0.3);
  sim_cmd->add_option("--misspec", sim_misspec,
                      "none, quadratic, or log_link")
      ->default_val("none");
  sim_cmd->add_option("--mis-cov", sim.mis_cov,
                      "covariate carrying the quadratic term (1-based)")
      ->default_val(1);
  sim_cmd->add_option("--mis-a", sim.mis_a, "misspecification amplitude")
      ->default_val(0.0);
  sim_cmd->add_option("--reps", sim.replications, "replications")
      ->default_val(200);
  sim_cmd->add_option("--alpha", sim.alpha, "nominal level")->default_val(0.05);
  sim_cmd->add_option("--npath", sim.npath, "resampled paths per replication")
      ->default_val(100);
  sim_cmd->add_option("--seed", sim.seed, "master seed")->default_val(1);
  sim_cmd->add_option("--est-method", sim_est, "rr or ls")->default_val("rr");
  sim_cmd->add_option("--eq-type", sim_eq, "ns or is")->default_val("ns");
  sim_cmd->add_option("--test-type", sim_test_type,
                      "omnibus, link, or covform")
      ->default_val("omnibus");
  sim_cmd->add_option("--cov-tested", sim_cov_tested,
                      "covform target index (1-based)")
      ->default_val(1);
  sim_cmd->add_option("--threads", sim.threads, "worker threads")
      ->envname("AFTTEST_THREADS")
      ->default_val(1);
  sim_cmd->add_option("--out", sim_out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (test_cmd->parsed())
      return run_test(test_args, test_type, cov_tested, npath, npathsave, seed,
                      threads, test_out, call);
    if (plot_cmd->parsed())
      return run_plot(plot_result, plot_npath, plot_std, plot_quantiles,
                      plot_out);
    if (sim_cmd->parsed()) {
      sim.n = static_cast<afttest::Index>(sim_n);
      const std::vector<double> b = parse_double_list(sim_beta, "--beta");
      sim.beta0 = Eigen::Map<const afttest::Vector>(
          b.data(), static_cast<afttest::Index>(b.size()));
      sim.error_dist =
          sim_error == "normal" ? ErrorDist::normal : ErrorDist::extreme_value;
      if (sim_error != "normal" && sim_error != "extreme_value")
        throw Error("unknown --error '" + sim_error + "'");
      if (sim_misspec == "none")
        sim.misspec = MisspecKind::none;
      else if (sim_misspec == "quadratic")
        sim.misspec = MisspecKind::quadratic;
      else if (sim_misspec == "log_link")
        sim.misspec = MisspecKind::log_link;
      else
        throw Error("unknown --misspec '" + sim_misspec + "'");
      sim.est_method = parse_est(sim_est);
      sim.eq_type = parse_eq(sim_eq);
      return run_simulate(sim, sim_test_type, sim_cov_tested, sim_out);
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
