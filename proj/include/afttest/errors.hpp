#pragma once

/** @file errors.hpp
 *  Exception hierarchy for the AFT model-checking library. Every failure mode
 *  carries the identifying detail (column name, row number, solver norm, ...)
 *  both as structured fields and in the what() string.
 */

#include <cstddef>
#include <stdexcept>
#include <string>

namespace afttest {

/** Base class for all library errors. */
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- data errors

struct MissingColumn : Error {
  std::string column;
  explicit MissingColumn(std::string name)
      : Error("missing column: " + name), column(std::move(name)) {}
};

struct NonPositiveTime : Error {
  std::size_t row;  ///< 1-based data-row number in the source file
  explicit NonPositiveTime(std::size_t r)
      : Error("non-positive time in row " + std::to_string(r)), row(r) {}
};

struct UnparseableValue : Error {
  std::size_t row;  ///< 1-based data-row number in the source file
  std::string column;
  UnparseableValue(std::size_t r, std::string col, const std::string& detail)
      : Error("unparseable value in row " + std::to_string(r) + ", column " +
              col + (detail.empty() ? "" : ": " + detail)),
        row(r), column(std::move(col)) {}
};

struct NoEvents : Error {
  NoEvents() : Error("dataset has no events (all observations censored)") {}
};

struct ZeroVariance : Error {
  std::string column;
  explicit ZeroVariance(std::string col)
      : Error("constant continuous column cannot be standardized: " + col),
        column(std::move(col)) {}
};

struct EmptyInput : Error {
  EmptyInput() : Error("empty input") {}
};

// ------------------------------------------------------------- formula errors

struct FormulaError : Error {
  using Error::Error;
};

struct SyntaxError : FormulaError {
  std::size_t position;  ///< 0-based character offset into the formula text
  std::string expected;
  SyntaxError(std::size_t pos, std::string what_expected)
      : FormulaError("formula syntax error at position " + std::to_string(pos) +
                     ": expected " + what_expected),
        position(pos), expected(std::move(what_expected)) {}
};

struct MissingSurv : FormulaError {
  MissingSurv()
      : FormulaError("formula must start with Surv(time, status)") {}
};

struct EmptyRHS : FormulaError {
  EmptyRHS() : FormulaError("formula has no covariate terms") {}
};

struct UnknownTransform : FormulaError {
  std::string name;
  explicit UnknownTransform(std::string n)
      : FormulaError("unknown transform: " + n + " (only log is supported)"),
        name(std::move(n)) {}
};

struct UnknownCovariate : FormulaError {
  std::string key;
  explicit UnknownCovariate(std::string k)
      : FormulaError("unknown covariate: " + k), key(std::move(k)) {}
};

struct IndexOutOfRange : FormulaError {
  long index;
  IndexOutOfRange(long idx, std::size_t p)
      : FormulaError("covariate index " + std::to_string(idx) +
                     " out of range 1.." + std::to_string(p)),
        index(idx) {}
};

// -------------------------------------------------------------- solver errors

struct NonFiniteEvaluation : Error {
  explicit NonFiniteEvaluation(const std::string& where)
      : Error("estimating function returned NaN/Inf at " + where) {}
};

struct SolverFailure : Error {
  double f_norm;  ///< final scaled residual norm ||F||/sqrt(p)
  explicit SolverFailure(double norm)
      : Error("solver did not reach tolerance; final ||F||/sqrt(p) = " +
              std::to_string(norm)),
        f_norm(norm) {}
};

// ---------------------------------------------------------- estimation errors

struct SingularDesign : Error {
  SingularDesign()
      : Error("centered covariate design is singular; least squares "
              "coefficients are not identified") {}
};

struct KaplanMeierDegenerate : Error {
  KaplanMeierDegenerate()
      : Error("Kaplan-Meier residual distribution is degenerate "
              "(no events)") {}
};

// ---------------------------------------------------------------- test errors

struct BinaryCovariateForCovform : Error {
  std::string column;
  explicit BinaryCovariateForCovform(std::string col)
      : Error("functional form test is not supported for binary covariate: " +
              col),
        column(std::move(col)) {}
};

struct QuantileCountNotFive : Error {
  explicit QuantileCountNotFive(std::size_t got)
      : Error("plot quantiles must contain exactly 5 values, got " +
              std::to_string(got)) {}
};

}  // namespace afttest
