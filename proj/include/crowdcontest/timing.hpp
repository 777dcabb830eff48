#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ctime>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crowdcontest/errors.hpp"
#include "crowdcontest/numerics.hpp"

namespace crowdcontest::timing {

// ---------------------------------------------------------------------------
// Joining-time laws

class JoinTimeModel {
 public:
  enum class Kind { empirical, uniform, exponential, table };

  // Piecewise-linear CDF through (start, 0) and (t_(i), i/m) for the sorted
  // sample t_(1..m). The support ends at `end` (>= last sample).
  static JoinTimeModel empirical(std::vector<double> samples, double start, double end) {
    if (samples.empty()) throw empty_trace("empirical join model needs at least one sample");
    std::sort(samples.begin(), samples.end());
    if (samples.front() < start || samples.back() > end)
      throw invalid_input("empirical join model: samples outside [start, end]");
    JoinTimeModel m(Kind::empirical, start, end);
    const double n = static_cast<double>(samples.size());
    m.xs_.push_back(start);
    m.ys_.push_back(0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      m.xs_.push_back(samples[i]);
      m.ys_.push_back(static_cast<double>(i + 1) / n);
    }
    m.samples_ = std::move(samples);
    return m;
  }

  static JoinTimeModel uniform(double lo, double hi) {
    if (!(hi > lo)) throw invalid_input("uniform join model needs lo < hi");
    JoinTimeModel m(Kind::uniform, lo, hi);
    m.xs_ = {lo, hi};
    m.ys_ = {0.0, 1.0};
    return m;
  }

  static JoinTimeModel exponential(double rate) {
    if (!(rate > 0.0)) throw invalid_input("exponential join model needs a positive rate");
    JoinTimeModel m(Kind::exponential, 0.0, std::numeric_limits<double>::infinity());
    m.rate_ = rate;
    return m;
  }

  // CDF given at knots, linear in between; must start at 0 and end at 1.
  static JoinTimeModel table(std::vector<double> xs, std::vector<double> cdf) {
    if (xs.size() < 2 || xs.size() != cdf.size()) throw invalid_input("table join model needs >= 2 matching knots");
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (xs[i] < xs[i - 1]) throw invalid_input("table join model: knots must be nondecreasing");
      if (cdf[i] < cdf[i - 1]) throw invalid_input("table join model: CDF must be nondecreasing");
    }
    if (std::abs(cdf.front()) > 1e-9 || std::abs(cdf.back() - 1.0) > 1e-9)
      throw invalid_input("table join model: CDF must run from 0 to 1");
    JoinTimeModel m(Kind::table, xs.front(), xs.back());
    m.xs_ = std::move(xs);
    m.ys_ = std::move(cdf);
    return m;
  }

  Kind kind() const { return kind_; }
  double support_min() const { return lo_; }
  double support_max() const { return hi_; }
  bool bounded() const { return std::isfinite(hi_); }
  const std::vector<double>& samples() const { return samples_; }

  // Points where the density may jump; quadrature splits there.
  std::vector<double> knots() const {
    if (kind_ == Kind::exponential) return {0.0};
    std::vector<double> k = xs_;
    k.erase(std::unique(k.begin(), k.end()), k.end());
    return k;
  }

  double cdf(double t) const {
    if (kind_ == Kind::exponential) return t <= 0.0 ? 0.0 : -std::expm1(-rate_ * t);
    if (t < xs_.front()) return 0.0;
    if (t >= xs_.back()) return 1.0;
    const std::size_t k = segment(t);
    const double dx = xs_[k + 1] - xs_[k];
    return ys_[k] + (ys_[k + 1] - ys_[k]) * (t - xs_[k]) / dx;
  }

  // Exact derivative of cdf(); piecewise constant for the knot-based kinds.
  double pdf(double t) const {
    if (kind_ == Kind::exponential) return t < 0.0 ? 0.0 : rate_ * std::exp(-rate_ * t);
    if (t < xs_.front() || t >= xs_.back()) return 0.0;
    const std::size_t k = segment(t);
    return (ys_[k + 1] - ys_[k]) / (xs_[k + 1] - xs_[k]);
  }

  double quantile(double p) const {
    if (!(p >= 0.0 && p <= 1.0)) throw invalid_input("quantile: p must lie in [0, 1]");
    if (kind_ == Kind::exponential) return p >= 1.0 ? hi_ : -std::log1p(-p) / rate_;
    if (p <= 0.0) return xs_.front();
    // First knot index with cdf >= p, then interpolate within its segment.
    const auto it = std::lower_bound(ys_.begin(), ys_.end(), p);
    const std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - ys_.begin()));
    if (k >= ys_.size()) return xs_.back();
    const double dy = ys_[k] - ys_[k - 1];
    if (dy <= 0.0) return xs_[k];
    return xs_[k - 1] + (xs_[k] - xs_[k - 1]) * (p - ys_[k - 1]) / dy;
  }

  std::vector<double> sample(numerics::RngSeed seed, std::size_t n) const {
    auto rng = numerics::make_stream(seed);
    std::vector<double> out(n);
    for (auto& x : out) x = quantile(numerics::uniform01(rng));
    return out;
  }

  double sample_one(numerics::Rng& rng) const { return quantile(numerics::uniform01(rng)); }

  // Gaussian kernel density with Silverman's bandwidth, for display and
  // mode counting. Non-empirical kinds return the exact pdf.
  double kde_density(double t) const {
    if (kind_ != Kind::empirical) return pdf(t);
    const double h = silverman_bandwidth(samples_);
    const double norm = 1.0 / (static_cast<double>(samples_.size()) * h * std::sqrt(2.0 * M_PI));
    double s = 0.0;
    for (double x : samples_) {
      const double z = (t - x) / h;
      s += std::exp(-0.5 * z * z);
    }
    return s * norm;
  }

  static double silverman_bandwidth(const std::vector<double>& sorted) {
    const std::size_t n = sorted.size();
    if (n < 2) return 1.0;
    const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : sorted) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    auto q = [&](double p) {
      const double pos = p * static_cast<double>(n - 1);
      const std::size_t i = static_cast<std::size_t>(pos);
      const double f = pos - static_cast<double>(i);
      return i + 1 < n ? sorted[i] * (1 - f) + sorted[i + 1] * f : sorted[i];
    };
    const double iqr = q(0.75) - q(0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) spread = 1e-3;
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  }

 private:
  JoinTimeModel(Kind k, double lo, double hi) : kind_(k), lo_(lo), hi_(hi) {}

  // Index k of the segment [x_k, x_{k+1}) containing t, skipping zero-width
  // segments (ties in the sample).
  std::size_t segment(double t) const {
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), t);
    std::size_t k = static_cast<std::size_t>(it - xs_.begin()) - 1;
    return std::min(k, xs_.size() - 2);
  }

  Kind kind_;
  double lo_;
  double hi_;
  double rate_ = 0.0;
  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<double> samples_;
};

// ---------------------------------------------------------------------------
// Requester weight functions

class WeightFunction {
 public:
  enum class Kind { step, inverse_power, constant, table };

  // values[i] applies on [breakpoints[i], breakpoints[i+1]); the last value
  // extends to infinity and the first also covers t < breakpoints[0].
  static WeightFunction step(std::vector<double> breakpoints, std::vector<double> values) {
    if (breakpoints.empty() || breakpoints.size() != values.size())
      throw invalid_input("step weight: breakpoints and values must have equal nonzero length");
    for (std::size_t i = 1; i < breakpoints.size(); ++i)
      if (!(breakpoints[i] > breakpoints[i - 1])) throw invalid_input("step weight: breakpoints must increase");
    check_values(values);
    WeightFunction w(Kind::step);
    w.xs_ = std::move(breakpoints);
    w.ys_ = std::move(values);
    return w;
  }

  // (1 + (t - t0)/scale)^(-power) for t >= t0, 1 before t0.
  static WeightFunction inverse_power(double power, double scale, double t0 = 0.0) {
    if (!(power >= 0.0) || !(scale > 0.0)) throw invalid_input("inverse-power weight needs power >= 0 and scale > 0");
    WeightFunction w(Kind::inverse_power);
    w.power_ = power;
    w.scale_ = scale;
    w.t0_ = t0;
    return w;
  }

  static WeightFunction constant(double value = 1.0) {
    if (!(value >= 0.0)) throw invalid_input("constant weight must be nonnegative");
    WeightFunction w(Kind::constant);
    w.value_ = value;
    return w;
  }

  // Linear interpolation between points, flat outside.
  static WeightFunction table(std::vector<double> xs, std::vector<double> values) {
    if (xs.size() < 1 || xs.size() != values.size()) throw invalid_input("table weight: bad point list");
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (!(xs[i] > xs[i - 1])) throw invalid_input("table weight: points must increase");
    check_values(values);
    WeightFunction w(Kind::table);
    w.xs_ = std::move(xs);
    w.ys_ = std::move(values);
    return w;
  }

  Kind kind() const { return kind_; }

  double operator()(double t) const {
    switch (kind_) {
      case Kind::constant:
        return value_;
      case Kind::inverse_power:
        return t <= t0_ ? 1.0 : std::pow(1.0 + (t - t0_) / scale_, -power_);
      case Kind::step: {
        const auto it = std::upper_bound(xs_.begin(), xs_.end(), t);
        if (it == xs_.begin()) return ys_.front();
        return ys_[static_cast<std::size_t>(it - xs_.begin()) - 1];
      }
      case Kind::table: {
        if (t <= xs_.front()) return ys_.front();
        if (t >= xs_.back()) return ys_.back();
        const auto it = std::upper_bound(xs_.begin(), xs_.end(), t);
        const std::size_t k = static_cast<std::size_t>(it - xs_.begin()) - 1;
        return ys_[k] + (ys_[k + 1] - ys_[k]) * (t - xs_[k]) / (xs_[k + 1] - xs_[k]);
      }
    }
    return 0.0;
  }

  std::vector<double> breakpoints() const {
    if (kind_ == Kind::inverse_power) return {t0_};
    return xs_;
  }

  // Time after which the weight is identically zero, if any.
  double support_end() const {
    if (kind_ == Kind::step && ys_.back() == 0.0) {
      std::size_t k = ys_.size() - 1;
      while (k > 0 && ys_[k - 1] == 0.0) --k;
      return xs_[k];
    }
    if (kind_ == Kind::table && ys_.back() == 0.0) {
      std::size_t k = ys_.size() - 1;
      while (k > 0 && ys_[k - 1] == 0.0) --k;
      return xs_[k];
    }
    if (kind_ == Kind::constant && value_ == 0.0) return 0.0;
    return std::numeric_limits<double>::infinity();
  }

 private:
  explicit WeightFunction(Kind k) : kind_(k) {}

  static void check_values(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(v[i] >= 0.0)) throw invalid_input("weight values must be nonnegative");
      if (i > 0 && v[i] > v[i - 1]) throw invalid_input("weight values must be nonincreasing in time");
    }
  }

  Kind kind_;
  std::vector<double> xs_;
  std::vector<double> ys_;
  double power_ = 0.0;
  double scale_ = 1.0;
  double t0_ = 0.0;
  double value_ = 1.0;
};

namespace presets {

// Hours measured from the 10:00 window start.
inline WeightFunction clock_step() { return WeightFunction::step({0.0, 1.5, 3.0, 6.0}, {1.0, 0.6, 0.2, 0.0}); }
inline WeightFunction clock_inverse_quadratic() { return WeightFunction::inverse_power(2.0, 6.0); }
// Same shapes on a normalized time axis.
inline WeightFunction normalized_step() { return WeightFunction::step({0.0, 0.5, 1.0, 1.5}, {1.0, 0.6, 0.2, 0.0}); }
inline WeightFunction normalized_inverse_cubic() { return WeightFunction::inverse_power(3.0, 3.0); }

}  // namespace presets

// ---------------------------------------------------------------------------
// Quadrature

// 20-point Gauss-Legendre on each piece between the sorted cut points that
// fall inside [a, b], with every piece further split into `sub` panels.
template <class F>
double integrate(F&& f, double a, double b, std::vector<double> cuts = {}, std::size_t sub = 4) {
  static constexpr double x[10] = {0.0765265211334973, 0.2277858511416451, 0.3737060887154195,
                                   0.5108670019508271, 0.6360536807265150, 0.7463319064601508,
                                   0.8391169718222188, 0.9122344282513259, 0.9639719272779138,
                                   0.9931285991850949};
  static constexpr double w[10] = {0.1527533871307258, 0.1491729864726037, 0.1420961093183820,
                                   0.1316886384491766, 0.1181945319615184, 0.1019301198172404,
                                   0.0832767415767048, 0.0626720483341091, 0.0406014298003869,
                                   0.0176140071391521};
  if (!(b > a)) return 0.0;
  cuts.push_back(a);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = std::max(a, cuts[i]);
    const double hi = std::min(b, cuts[i + 1]);
    if (!(hi > lo)) continue;
    const double step = (hi - lo) / static_cast<double>(sub);
    for (std::size_t s = 0; s < sub; ++s) {
      const double c = lo + (static_cast<double>(s) + 0.5) * step;
      const double r = 0.5 * step;
      double acc = 0.0;
      for (int k = 0; k < 10; ++k) acc += w[k] * (f(c - r * x[k]) + f(c + r * x[k]));
      total += acc * r;
    }
  }
  return total;
}

// Integral of w(t) f(t) over [a, b].
inline double weighted_mass(const WeightFunction& w, const JoinTimeModel& m, double a, double b) {
  auto cuts = m.knots();
  const auto wb = w.breakpoints();
  cuts.insert(cuts.end(), wb.begin(), wb.end());
  if (!m.bounded()) {
    // Exponential tail: integrate to a far cutoff where the mass is negligible.
    b = std::min(b, m.quantile(1.0 - 1e-15));
  }
  return integrate([&](double t) { return w(t) * m.pdf(t); }, a, b, cuts, 8);
}

inline double weight_integral(const WeightFunction& w, double a, double b) {
  return integrate([&](double t) { return w(t); }, a, b, w.breakpoints(), 8);
}

// ---------------------------------------------------------------------------
// Poisson arrivals

struct PoissonModel {
  double rate = 1.0;        // lambda
  std::size_t truncation = 30;  // M

  void validate() const {
    if (!(rate > 0.0)) throw invalid_input("Poisson model: rate must be positive");
    if (truncation < 1) throw invalid_input("Poisson model: truncation must be at least 1");
  }
};

inline double poisson_pmf_mean(double mean, long long m) {
  if (m < 0) throw invalid_input("poisson_pmf: m must be nonnegative");
  if (!(mean >= 0.0)) throw invalid_input("poisson_pmf: mean must be nonnegative");
  if (mean == 0.0) return m == 0 ? 1.0 : 0.0;
  const double md = static_cast<double>(m);
  return std::exp(md * std::log(mean) - mean - std::lgamma(md + 1.0));
}

inline double poisson_pmf(const PoissonModel& model, double t, long long m) {
  if (t < 0.0) throw invalid_input("poisson_pmf: t must be nonnegative");
  return poisson_pmf_mean(model.rate * t, m);
}

// Arrival epochs S_1 < ... < S_count as cumulative exponential gaps.
inline std::vector<double> sample_arrival_sequence(const PoissonModel& model, numerics::Rng& rng, std::size_t count) {
  std::exponential_distribution<double> gap(model.rate);
  std::vector<double> s(count);
  double acc = 0.0;
  for (auto& x : s) {
    double g = gap(rng);
    while (g <= 0.0) g = gap(rng);
    acc += g;
    x = acc;
  }
  return s;
}

inline std::vector<double> sample_arrival_sequence(const PoissonModel& model, numerics::RngSeed seed) {
  model.validate();
  auto rng = numerics::make_stream(seed);
  return sample_arrival_sequence(model, rng, model.truncation);
}

// ---------------------------------------------------------------------------
// Trace files: `user_id,ap_id,timestamp`, timestamp in epoch seconds or
// `YYYY-MM-DD HH:MM:SS` (UTC).

struct TraceRecord {
  std::string user;
  std::string ap;
  long long epoch = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_epoch(std::string_view s, long long& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline bool parse_datetime(std::string_view s, long long& out) {
  std::tm tm{};
  int y, mo, d, h, mi, se;
  char tail;
  const std::string str(s);
  if (std::sscanf(str.c_str(), "%4d-%2d-%2d %2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &se, &tail) != 6) return false;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60 || h < 0 || mi < 0 || se < 0) return false;
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = se;
  out = static_cast<long long>(timegm(&tm));
  return true;
}

}  // namespace detail

inline std::vector<TraceRecord> parse_trace(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::trim(line);
    if (view.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
      const auto comma = view.find(',', pos);
      fields.push_back(detail::trim(view.substr(pos, comma == std::string_view::npos ? view.npos : comma - pos)));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != 3) throw malformed_record(line_no, "expected 3 comma-separated fields");
    long long epoch = 0;
    const bool ok = detail::parse_epoch(fields[2], epoch) || detail::parse_datetime(fields[2], epoch);
    if (!ok) {
      if (!seen_content) {  // header
        seen_content = true;
        continue;
      }
      throw malformed_record(line_no, "unparseable timestamp '" + std::string(fields[2]) + "'");
    }
    if (fields[0].empty()) throw malformed_record(line_no, "empty user id");
    if (fields[1].empty()) throw malformed_record(line_no, "empty access-point id");
    seen_content = true;
    out.push_back({std::string(fields[0]), std::string(fields[1]), epoch});
  }
  return out;
}

inline std::vector<TraceRecord> parse_trace(const std::string& text) {
  std::istringstream in(text);
  return parse_trace(in);
}

// Daily time-of-day window in seconds after midnight, e.g. 10:00 to 16:00.
struct TraceWindow {
  long long start = 10 * 3600;
  long long end = 16 * 3600;

  double length_hours() const { return static_cast<double>(end - start) / 3600.0; }
};

struct IngestResult {
  JoinTimeModel model;
  std::size_t n_users = 0;     // distinct users with an in-window record
  std::size_t n_samples = 0;   // (user, day) joining times
};

// Each (user, day) contributes its first in-window record as a joining time,
// expressed in hours after the window start.
inline IngestResult ingest_trace(const std::vector<TraceRecord>& records, const TraceWindow& window) {
  if (!(window.end > window.start)) throw invalid_input("trace window must have end > start");
  std::map<std::pair<std::string, long long>, long long> first;  // (user, day) -> seconds of day
  for (const auto& r : records) {
    long long day = r.epoch / 86400;
    long long tod = r.epoch % 86400;
    if (tod < 0) {
      tod += 86400;
      --day;
    }
    if (tod < window.start || tod > window.end) continue;
    auto key = std::make_pair(r.user, day);
    auto it = first.find(key);
    if (it == first.end() || tod < it->second) first[key] = tod;
  }
  if (first.empty()) throw empty_trace("no trace records fall inside the window");
  std::vector<double> times;
  times.reserve(first.size());
  std::vector<std::string> users;
  for (const auto& [key, tod] : first) {
    times.push_back(static_cast<double>(tod - window.start) / 3600.0);
    users.push_back(key.first);
  }
  users.erase(std::unique(users.begin(), users.end()), users.end());
  const std::size_t n_samples = times.size();
  return {JoinTimeModel::empirical(std::move(times), 0.0, window.length_hours()), users.size(), n_samples};
}

// ---------------------------------------------------------------------------
// Goodness of fit

template <class Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
  if (samples.empty()) throw invalid_input("ks_statistic: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Two-sided 5% critical value, Stephens' finite-sample approximation.
inline double ks_critical_5pct(std::size_t n) {
  const double r = std::sqrt(static_cast<double>(n));
  return 1.3581 / (r + 0.12 + 0.11 / r);
}

inline std::size_t count_local_maxima(const std::vector<double>& v, double rel_floor = 1e-3) {
  if (v.size() < 3) return 0;
  const double top = *std::max_element(v.begin(), v.end());
  std::size_t count = 0;
  for (std::size_t i = 1; i + 1 < v.size(); ++i)
    if (v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > rel_floor * top) ++count;
  return count;
}

}  // namespace crowdcontest::timing
