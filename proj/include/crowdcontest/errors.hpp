#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crowdcontest {

// Root of every error raised by the library. The CLI maps config_error to
// exit code 2 and everything else derived from contest_error to 3.
class contest_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class invalid_input : public contest_error {
 public:
  using contest_error::contest_error;
};

class index_error : public contest_error {
 public:
  using contest_error::contest_error;
};

class bracket_error : public contest_error {
 public:
  bracket_error(double lo, double hi, double f_lo, double f_hi)
      : contest_error("root not bracketed on [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]: f(lo)=" + std::to_string(f_lo) +
                      ", f(hi)=" + std::to_string(f_hi)),
        lo_(lo), hi_(hi) {}
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

// Carries the last iterate so callers can inspect how far the solver got.
class no_convergence : public contest_error {
 public:
  no_convergence(const std::string& what, std::vector<double> last_iterate,
                 double residual)
      : contest_error(what + " (residual " + std::to_string(residual) + ")"),
        last_iterate_(std::move(last_iterate)), residual_(residual) {}
  const std::vector<double>& last_iterate() const { return last_iterate_; }
  double residual() const { return residual_; }

 private:
  std::vector<double> last_iterate_;
  double residual_;
};

class numerical_error : public contest_error {
 public:
  using contest_error::contest_error;
};

class monte_carlo_noise : public contest_error {
 public:
  using contest_error::contest_error;
};

class infeasible_budget : public contest_error {
 public:
  using contest_error::contest_error;
};

class empty_trace : public contest_error {
 public:
  using contest_error::contest_error;
};

class malformed_record : public contest_error {
 public:
  malformed_record(std::size_t line, const std::string& reason)
      : contest_error("line " + std::to_string(line) + ": " + reason),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class config_error : public contest_error {
 public:
  config_error(const std::string& field, const std::string& reason)
      : contest_error("config field '" + field + "': " + reason),
        field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class io_error : public contest_error {
 public:
  using contest_error::contest_error;
};

}  // namespace crowdcontest
