#pragma once

/** @file formula.hpp
 *  Parser for the model-formula mini-language:
 *
 *      Surv(time, status) ~ term + term + ...
 *      term  := ident | log(ident)
 *      ident := [A-Za-z_][A-Za-z0-9_.]*
 *
 *  Whitespace-insensitive. The parse result keeps terms in written order;
 *  covariate indices elsewhere in the library are 1-based positions into that
 *  order.
 */

#include <cctype>
#include <string>
#include <vector>

#include "errors.hpp"

namespace afttest {

enum class Transform { identity, log_transform };

struct Term {
  std::string source;   ///< column name in the input table
  Transform transform = Transform::identity;

  /** Name shown in outputs and matched by resolve_covariate. */
  std::string display_name() const {
    return transform == Transform::identity ? source : "log(" + source + ")";
  }

  friend bool operator==(const Term& a, const Term& b) {
    return a.source == b.source && a.transform == b.transform;
  }
};

struct ModelSpec {
  std::string time_col;
  std::string status_col;
  std::vector<Term> terms;

  /** Canonical rendering; parse(pretty()) reproduces the spec exactly. */
  std::string pretty() const {
    std::string out = "Surv(" + time_col + ", " + status_col + ") ~ ";
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (i) out += " + ";
      out += terms[i].display_name();
    }
    return out;
  }

  friend bool operator==(const ModelSpec& a, const ModelSpec& b) {
    return a.time_col == b.time_col && a.status_col == b.status_col &&
           a.terms == b.terms;
  }
};

namespace detail {

/** Character scanner with 0-based position tracking for error messages. */
class FormulaScanner {
 public:
  explicit FormulaScanner(const std::string& text) : text_(text) {}

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }

  std::size_t position() {
    skip_ws();
    return pos_;
  }

  /** Consume `c` or report what was expected at this position. */
  void expect(char c, const std::string& expected) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c)
      throw SyntaxError(pos_, expected);
    ++pos_;
  }

  bool peek_is(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  /** Consume an identifier or report `expected`. */
  std::string ident(const std::string& expected) {
    skip_ws();
    const std::size_t start = pos_;
    auto head = [](char c) {
      return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
    };
    auto tail = [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
             c == '.';
    };
    if (pos_ >= text_.size() || !head(text_[pos_]))
      throw SyntaxError(pos_, expected);
    ++pos_;
    while (pos_ < text_.size() && tail(text_[pos_])) ++pos_;
    return text_.substr(start, pos_ - start);
  }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/** Parse a formula string into a ModelSpec. Total: every input either parses
 *  or raises a positioned FormulaError. */
inline ModelSpec parse_formula(const std::string& text) {
  detail::FormulaScanner s(text);

  // Response: the formula must open with a Surv(time, status) object.
  ModelSpec spec;
  {
    const std::size_t at = s.position();
    bool surv_head = false;
    try {
      surv_head = s.ident("Surv") == "Surv" && s.peek_is('(');
    } catch (const SyntaxError&) {
      surv_head = false;
    }
    if (!surv_head) throw MissingSurv();
    (void)at;
  }
  s.expect('(', "'('");
  spec.time_col = s.ident("time column identifier");
  s.expect(',', "','");
  spec.status_col = s.ident("status column identifier");
  s.expect(')', "')'");
  s.expect('~', "'~'");

  if (s.at_end()) throw EmptyRHS();

  // Covariate terms, '+'-separated, order-preserving, duplicates rejected.
  while (true) {
    const std::size_t term_at = s.position();
    std::string name = s.ident("covariate term");
    Term term;
    if (s.peek_is('(')) {
      if (name != "log") throw UnknownTransform(name);
      s.expect('(', "'('");
      term.source = s.ident("covariate identifier");
      term.transform = Transform::log_transform;
      s.expect(')', "')'");
    } else {
      term.source = std::move(name);
    }
    for (const Term& seen : spec.terms)
      if (seen == term)
        throw SyntaxError(term_at,
                          "a distinct term (duplicate: " + term.display_name() +
                              ")");
    spec.terms.push_back(std::move(term));

    if (s.at_end()) break;
    s.expect('+', "'+' or end of formula");
  }
  return spec;
}

/** Resolve a covariate reference to its 1-based term index. Integer keys are
 *  range-checked and returned as-is. */
inline int resolve_covariate(const ModelSpec& spec, long index) {
  if (index < 1 || index > static_cast<long>(spec.terms.size()))
    throw IndexOutOfRange(index, spec.terms.size());
  return static_cast<int>(index);
}

/** String keys match the term's display name; a log term answers to both
 *  "log(x)" and "log_x". A string of digits is treated as an integer key. */
inline int resolve_covariate(const ModelSpec& spec, const std::string& key) {
  if (!key.empty() &&
      key.find_first_not_of("0123456789") == std::string::npos)
    return resolve_covariate(spec, std::stol(key));
  for (std::size_t i = 0; i < spec.terms.size(); ++i) {
    const Term& t = spec.terms[i];
    if (key == t.display_name()) return static_cast<int>(i + 1);
    if (t.transform == Transform::log_transform && key == "log_" + t.source)
      return static_cast<int>(i + 1);
  }
  throw UnknownCovariate(key);
}

}  // namespace afttest
