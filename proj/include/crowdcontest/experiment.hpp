#pragma once

// Declarative experiments: a JSON spec in, CSV tables out.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "crowdcontest/bayesian_closed.hpp"
#include "crowdcontest/contest.hpp"
#include "crowdcontest/csf_analysis.hpp"
#include "crowdcontest/errors.hpp"
#include "crowdcontest/numerics.hpp"
#include "crowdcontest/open_system.hpp"
#include "crowdcontest/timing.hpp"

namespace crowdcontest::experiment {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Synthetic traces

inline constexpr long long trace_day_epoch = 1456790400;  // 2016-03-01 00:00:00 UTC

inline std::vector<std::string> trace_presets() { return {"uniform20", "bimodal", "campus"}; }

inline std::string format_timestamp(long long epoch) {
  const std::time_t t = static_cast<std::time_t>(epoch);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%d %H:%M:%S", &tm);
  return buf;
}

// Trace text in the `user_id,ap_id,timestamp` format. Joining hours are
// drawn inside the 10:00-16:00 window; campus users also leave records
// before and after their first in-window visit.
inline std::string generate_trace(const std::string& preset, std::uint64_t seed) {
  auto rng = numerics::make_stream(numerics::RngSeed{seed});
  std::ostringstream out;
  out << "user_id,ap_id,timestamp\n";
  const long long open = trace_day_epoch + 10 * 3600;
  auto line = [&](std::size_t user, int ap, double hours_after_open) {
    const long long t = open + static_cast<long long>(std::floor(hours_after_open * 3600.0));
    char id[16];
    std::snprintf(id, sizeof id, "u%03zu", user);
    out << id << ",ap" << ap << ',' << format_timestamp(t) << '\n';
  };
  std::uniform_int_distribution<int> ap(1, 8);
  if (preset == "uniform20") {
    for (std::size_t u = 0; u < 20; ++u) line(u, ap(rng), 6.0 * numerics::uniform01(rng));
  } else if (preset == "bimodal") {
    std::normal_distribution<double> morning(1.0, 0.3), afternoon(4.5, 0.4);
    for (std::size_t u = 0; u < 200; ++u) {
      const double h = u % 2 ? morning(rng) : afternoon(rng);
      line(u, ap(rng), std::clamp(h, 0.0, 5.999));
    }
  } else if (preset == "campus") {
    std::exponential_distribution<double> arrival(0.6);
    for (std::size_t u = 0; u < 40; ++u) {
      double h = arrival(rng);
      while (h >= 6.0) h = arrival(rng);
      line(u, ap(rng), -1.5 * numerics::uniform01(rng) - 0.01);
      line(u, ap(rng), h);
      line(u, ap(rng), h + (6.0 - h) * numerics::uniform01(rng));
    }
  } else {
    throw config_error("trace preset", "unknown preset '" + preset + "'");
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Spec

enum class Mode { closed, open, complete_info, appendix2 };

struct ExperimentSpec {
  std::string name;
  Mode mode = Mode::closed;
  std::string strategy;   // earliest_n | termination | linear
  std::string parameter;  // n | T | h | players
  std::vector<double> sweep;
  std::size_t players = 0;
  timing::JoinTimeModel join_model = timing::JoinTimeModel::uniform(0.0, 1.0);
  timing::WeightFunction weight = timing::WeightFunction::constant(1.0);
  double weight_value = 1.0;
  timing::PoissonModel poisson;
  std::vector<double> e0_ratios{0.2, 0.5, 0.8};
  double budget = 1.0;
  std::vector<double> contour_budgets;
  bool effort_table = false;
  std::uint64_t seed = 1;
  std::size_t grid_size = 64;
  std::size_t mc_stage2 = 20'000;
  std::size_t mc_stage1 = 100'000;
  numerics::SolverSettings settings = numerics::fixed_point_defaults();
  unsigned threads = 0;  // 0: environment default
  std::string surface;   // gain | efficiency
  std::vector<double> us, betas, vs;
  std::string canonical;  // normalized JSON text, hashed into the output metadata
};

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

inline const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw config_error(path + key, "missing");
  return j.at(key);
}

inline double num(const json& j, const std::string& field) {
  if (j.is_string() && (j == "inf" || j == "infinity")) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) throw config_error(field, "expected a number");
  return j.get<double>();
}

inline double num_or(const json& j, const std::string& key, double fallback, const std::string& path) {
  return j.contains(key) ? num(j.at(key), path + key) : fallback;
}

inline std::size_t count(const json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw config_error(field, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

inline std::vector<double> numbers(const json& j, const std::string& field) {
  if (!j.is_array()) throw config_error(field, "expected a list of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(num(j[i], field + "[" + std::to_string(i) + "]"));
  return v;
}

inline std::string text(const json& j, const std::string& field) {
  if (!j.is_string()) throw config_error(field, "expected a string");
  return j.get<std::string>();
}

// Either {"values": [...]} or {"from": a, "to": b, "step": s}.
inline std::vector<double> range(const json& j, const std::string& field) {
  if (j.contains("values")) {
    auto v = numbers(j.at("values"), field + ".values");
    if (v.empty()) throw config_error(field + ".values", "sweep must be nonempty");
    return v;
  }
  const double from = num(need(j, "from", field + "."), field + ".from");
  const double to = num(need(j, "to", field + "."), field + ".to");
  const double step = num(need(j, "step", field + "."), field + ".step");
  if (!(step > 0.0)) throw config_error(field + ".step", "must be positive");
  if (to < from) throw config_error(field + ".to", "must not be below 'from'");
  std::vector<double> v;
  const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) v.push_back(from + step * static_cast<double>(k));
  return v;
}

template <class F>
auto guarded(const std::string& field, F&& make) {
  try {
    return make();
  } catch (const config_error&) {
    throw;
  } catch (const contest_error& e) {
    throw config_error(field, e.what());
  }
}

inline timing::WeightFunction parse_weight(const json& j, double& constant_value) {
  const std::string kind = text(need(j, "kind", "weight."), "weight.kind");
  return guarded("weight", [&] {
    if (kind == "step")
      return timing::WeightFunction::step(numbers(need(j, "breakpoints", "weight."), "weight.breakpoints"),
                                          numbers(need(j, "values", "weight."), "weight.values"));
    if (kind == "table")
      return timing::WeightFunction::table(numbers(need(j, "xs", "weight."), "weight.xs"),
                                           numbers(need(j, "values", "weight."), "weight.values"));
    if (kind == "inverse_power")
      return timing::WeightFunction::inverse_power(num(need(j, "power", "weight."), "weight.power"),
                                                   num(need(j, "scale", "weight."), "weight.scale"),
                                                   num_or(j, "t0", 0.0, "weight."));
    if (kind == "constant") {
      constant_value = num_or(j, "value", 1.0, "weight.");
      return timing::WeightFunction::constant(constant_value);
    }
    if (kind == "preset") {
      const std::string name = text(need(j, "name", "weight."), "weight.name");
      if (name == "clock_step") return timing::presets::clock_step();
      if (name == "clock_inverse_quadratic") return timing::presets::clock_inverse_quadratic();
      if (name == "normalized_step") return timing::presets::normalized_step();
      if (name == "normalized_inverse_cubic") return timing::presets::normalized_inverse_cubic();
      throw config_error("weight.name", "unknown preset '" + name + "'");
    }
    throw config_error("weight.kind", "unknown kind '" + kind + "'");
  });
}

struct JoinParse {
  timing::JoinTimeModel model;
  std::size_t users = 0;  // from traces; 0 otherwise
};

inline JoinParse parse_join(const json& j, const std::filesystem::path& base_dir) {
  const std::string kind = text(need(j, "kind", "join_model."), "join_model.kind");
  auto from_trace = [&](const std::string& body) {
    timing::TraceWindow window;
    if (j.contains("window_hours")) {
      const auto w = numbers(j.at("window_hours"), "join_model.window_hours");
      if (w.size() != 2) throw config_error("join_model.window_hours", "expected [start, end]");
      window.start = static_cast<long long>(std::llround(w[0] * 3600.0));
      window.end = static_cast<long long>(std::llround(w[1] * 3600.0));
    }
    auto res = guarded("join_model", [&] { return timing::ingest_trace(timing::parse_trace(body), window); });
    return JoinParse{std::move(res.model), res.n_users};
  };
  if (kind == "uniform")
    return {guarded("join_model", [&] {
      return timing::JoinTimeModel::uniform(num(need(j, "lo", "join_model."), "join_model.lo"),
                                            num(need(j, "hi", "join_model."), "join_model.hi"));
    })};
  if (kind == "exponential")
    return {guarded("join_model", [&] {
      return timing::JoinTimeModel::exponential(num(need(j, "rate", "join_model."), "join_model.rate"));
    })};
  if (kind == "empirical")
    return {guarded("join_model", [&] {
      return timing::JoinTimeModel::empirical(numbers(need(j, "samples", "join_model."), "join_model.samples"),
                                              num(need(j, "start", "join_model."), "join_model.start"),
                                              num(need(j, "end", "join_model."), "join_model.end"));
    })};
  if (kind == "table")
    return {guarded("join_model", [&] {
      return timing::JoinTimeModel::table(numbers(need(j, "xs", "join_model."), "join_model.xs"),
                                          numbers(need(j, "cdf", "join_model."), "join_model.cdf"));
    })};
  if (kind == "synthetic") {
    const std::string preset = text(need(j, "preset", "join_model."), "join_model.preset");
    const auto seed = count(need(j, "seed", "join_model."), "join_model.seed");
    return from_trace(guarded("join_model.preset", [&] { return generate_trace(preset, seed); }));
  }
  if (kind == "trace") {
    std::filesystem::path p = text(need(j, "path", "join_model."), "join_model.path");
    if (p.is_relative()) p = base_dir / p;
    std::ifstream in(p);
    if (!in) throw config_error("join_model.path", "cannot open '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_trace(ss.str());
  }
  throw config_error("join_model.kind", "unknown kind '" + kind + "'");
}

}  // namespace detail

inline ExperimentSpec parse_spec(const json& j, const std::filesystem::path& base_dir = ".") {
  using namespace detail;
  if (!j.is_object()) throw config_error("<root>", "spec must be a JSON object");
  static const std::vector<std::string> known{"name", "mode", "strategy", "sweep", "players", "join_model",
                                              "weight", "poisson", "e0_ratios", "budget", "contour_budgets",
                                              "effort_table", "seed", "grid_size", "mc", "solver", "threads",
                                              "surface", "u", "beta", "v"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw config_error(key, "unknown field");

  ExperimentSpec s;
  s.canonical = j.dump();
  s.name = text(need(j, "name", ""), "name");
  if (s.name.empty() || s.name.find_first_of("/\\") != std::string::npos)
    throw config_error("name", "must be a nonempty file-name stem");
  const std::string mode = text(need(j, "mode", ""), "mode");
  if (mode == "closed") s.mode = Mode::closed;
  else if (mode == "open") s.mode = Mode::open;
  else if (mode == "complete_info") s.mode = Mode::complete_info;
  else if (mode == "appendix2") s.mode = Mode::appendix2;
  else throw config_error("mode", "expected closed, open, complete_info or appendix2");

  if (j.contains("seed")) s.seed = count(j.at("seed"), "seed");
  if (j.contains("threads")) s.threads = static_cast<unsigned>(count(j.at("threads"), "threads"));
  if (j.contains("budget")) s.budget = num(j.at("budget"), "budget");
  if (!(s.budget > 0.0)) throw config_error("budget", "must be positive");
  if (j.contains("e0_ratios")) s.e0_ratios = numbers(j.at("e0_ratios"), "e0_ratios");
  if (s.e0_ratios.empty()) throw config_error("e0_ratios", "must be nonempty");
  for (double r : s.e0_ratios)
    if (!(r >= 0.0)) throw config_error("e0_ratios", "ratios must be nonnegative");
  if (j.contains("contour_budgets")) s.contour_budgets = numbers(j.at("contour_budgets"), "contour_budgets");
  for (double b : s.contour_budgets)
    if (!(b > 0.0)) throw config_error("contour_budgets", "budgets must be positive");
  if (j.contains("effort_table")) {
    if (!j.at("effort_table").is_boolean()) throw config_error("effort_table", "expected true or false");
    s.effort_table = j.at("effort_table").get<bool>();
  }
  if (j.contains("grid_size")) s.grid_size = count(j.at("grid_size"), "grid_size");
  if (j.contains("mc")) {
    const auto& mc = j.at("mc");
    if (mc.contains("stage2")) s.mc_stage2 = count(mc.at("stage2"), "mc.stage2");
    if (mc.contains("stage1")) s.mc_stage1 = count(mc.at("stage1"), "mc.stage1");
    if (s.mc_stage2 < 1 || s.mc_stage1 < 1) throw config_error("mc", "sample counts must be positive");
  }
  if (j.contains("solver")) {
    const auto& sv = j.at("solver");
    s.settings.abs_tol = num_or(sv, "abs_tol", s.settings.abs_tol, "solver.");
    s.settings.rel_tol = num_or(sv, "rel_tol", s.settings.rel_tol, "solver.");
    s.settings.damping = num_or(sv, "damping", s.settings.damping, "solver.");
    if (sv.contains("max_iter")) s.settings.max_iter = count(sv.at("max_iter"), "solver.max_iter");
    guarded("solver", [&] {
      s.settings.validate();
      return 0;
    });
  }

  if (s.mode == Mode::appendix2) {
    s.surface = text(need(j, "surface", ""), "surface");
    if (s.surface != "gain" && s.surface != "efficiency") throw config_error("surface", "expected gain or efficiency");
    s.us = numbers(need(j, "u", ""), "u");
    s.betas = numbers(need(j, "beta", ""), "beta");
    s.vs = numbers(need(j, "v", ""), "v");
    if (s.us.empty() || s.betas.empty() || s.vs.empty()) throw config_error("u", "surface axes must be nonempty");
    for (double u : s.us)
      if (!(u >= 1.0)) throw config_error("u", "weight ratio u must be at least 1");
    for (double b : s.betas)
      if (!(b >= 1.0) || !std::isfinite(b)) throw config_error("beta", "beta must be finite and at least 1");
    for (double v : s.vs)
      if (!(v > 0.0 && v <= 1.0)) throw config_error("v", "exponent v must lie in (0, 1]");
    return s;
  }

  const json& sweep = need(j, "sweep", "");
  s.parameter = text(need(sweep, "parameter", "sweep."), "sweep.parameter");
  s.sweep = range(sweep, "sweep");

  if (j.contains("weight")) s.weight = parse_weight(j.at("weight"), s.weight_value);

  if (s.mode == Mode::complete_info) {
    if (s.parameter != "players") throw config_error("sweep.parameter", "complete_info sweeps 'players'");
    for (double n : s.sweep)
      if (n < 2 || n != std::floor(n)) throw config_error("sweep", "player counts must be integers >= 2");
    return s;
  }

  s.strategy = text(need(j, "strategy", ""), "strategy");
  const std::map<std::string, std::string> param_of{{"earliest_n", "n"}, {"termination", "T"}, {"linear", "h"}};
  const auto it = param_of.find(s.strategy);
  if (it == param_of.end() || (s.mode == Mode::open && s.strategy == "linear"))
    throw config_error("strategy", s.mode == Mode::open ? "open mode supports earliest_n or termination"
                                                        : "expected earliest_n, termination or linear");
  if (s.parameter != it->second)
    throw config_error("sweep.parameter", "strategy " + s.strategy + " sweeps '" + it->second + "'");

  if (s.mode == Mode::open) {
    const json& p = need(j, "poisson", "");
    s.poisson.rate = num(need(p, "rate", "poisson."), "poisson.rate");
    if (p.contains("truncation")) s.poisson.truncation = count(p.at("truncation"), "poisson.truncation");
    guarded("poisson", [&] {
      s.poisson.validate();
      return 0;
    });
  } else {
    auto jm = parse_join(need(j, "join_model", ""), base_dir);
    s.join_model = std::move(jm.model);
    s.players = jm.users;
    if (j.contains("players")) s.players = count(j.at("players"), "players");
    if (s.players < 1) throw config_error("players", "required unless the join model comes from a trace");
  }

  const std::size_t cap = s.mode == Mode::open ? s.poisson.truncation : s.players;
  for (double v : s.sweep) {
    if (s.parameter == "n" && (v < 1 || v != std::floor(v) || v > static_cast<double>(cap)))
      throw config_error("sweep", "n must be an integer in [1, " + std::to_string(cap) + "]");
    if (s.parameter == "T" && !(v > 0.0)) throw config_error("sweep", "T must be positive");
    if (s.parameter == "h" && !(v >= 0.0)) throw config_error("sweep", "h must be nonnegative");
  }
  return s;
}

inline ExperimentSpec parse_spec_text(const std::string& text, const std::filesystem::path& base_dir = ".") {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error("<root>", std::string("not valid JSON: ") + e.what());
  }
  return parse_spec(j, base_dir);
}

// ---------------------------------------------------------------------------
// Presets

inline std::map<std::string, json> presets() {
  const json ratios = {0.2, 0.5, 0.8};
  const json step = {{"kind", "preset"}, {"name", "clock_step"}};
  const json inverse = {{"kind", "preset"}, {"name", "clock_inverse_quadratic"}};
  const json trace = {{"kind", "synthetic"}, {"preset", "uniform20"}, {"seed", 7}};
  const json campus = {{"kind", "synthetic"}, {"preset", "campus"}, {"seed", 3}};
  const json contours = {0.5, 1.0, 2.0};
  std::map<std::string, json> p;
  p["closed-earliestn-step"] = {{"name", "closed-earliestn-step"}, {"mode", "closed"}, {"strategy", "earliest_n"},
                                {"sweep", {{"parameter", "n"}, {"from", 2}, {"to", 20}, {"step", 1}}},
                                {"join_model", trace}, {"weight", step}, {"e0_ratios", ratios}, {"budget", 1.0},
                                {"contour_budgets", contours}, {"effort_table", true}, {"seed", 11}};
  p["closed-earliestn-inverse"] = p["closed-earliestn-step"];
  p["closed-earliestn-inverse"]["name"] = "closed-earliestn-inverse";
  p["closed-earliestn-inverse"]["weight"] = inverse;
  p["closed-earliestn-inverse"]["join_model"] = campus;
  p["closed-earliestn-inverse"]["sweep"] = {{"parameter", "n"}, {"from", 2}, {"to", 40}, {"step", 2}};
  p["closed-termination-step"] = {{"name", "closed-termination-step"}, {"mode", "closed"},
                                  {"strategy", "termination"},
                                  {"sweep", {{"parameter", "T"}, {"from", 0.25}, {"to", 5.5}, {"step", 0.25}}},
                                  {"join_model", trace}, {"weight", step}, {"e0_ratios", ratios}, {"budget", 1.0},
                                  {"contour_budgets", contours}, {"effort_table", true}, {"seed", 11}};
  p["closed-termination-inverse"] = p["closed-termination-step"];
  p["closed-termination-inverse"]["name"] = "closed-termination-inverse";
  p["closed-termination-inverse"]["weight"] = inverse;
  p["closed-termination-inverse"]["join_model"] = campus;
  // Past the last recorded join the empirical CDF is flat, so stop the sweep inside the trace.
  p["closed-termination-inverse"]["sweep"]["to"] = 5.0;
  p["closed-linear-step"] = {{"name", "closed-linear-step"}, {"mode", "closed"}, {"strategy", "linear"},
                             {"sweep", {{"parameter", "h"}, {"values", {0.0, 0.05, 0.1, 0.2, 0.3}}}},
                             {"join_model", {{"kind", "uniform"}, {"lo", 0.0}, {"hi", 6.0}}}, {"players", 8},
                             {"weight", step}, {"e0_ratios", ratios}, {"budget", 1.0}, {"effort_table", true},
                             {"mc", {{"stage2", 10000}, {"stage1", 40000}}}, {"seed", 11}};
  p["open-earliestn-step"] = {{"name", "open-earliestn-step"}, {"mode", "open"}, {"strategy", "earliest_n"},
                              {"sweep", {{"parameter", "n"}, {"from", 2}, {"to", 16}, {"step", 1}}},
                              {"poisson", {{"rate", 4.0}, {"truncation", 30}}}, {"weight", step},
                              {"e0_ratios", ratios}, {"budget", 1.0}, {"contour_budgets", contours},
                              {"effort_table", true}, {"seed", 11}};
  p["open-termination-step"] = {{"name", "open-termination-step"}, {"mode", "open"}, {"strategy", "termination"},
                                {"sweep", {{"parameter", "T"}, {"from", 0.1}, {"to", 4.0}, {"step", 0.1}}},
                                {"poisson", {{"rate", 4.0}, {"truncation", 30}}}, {"weight", step},
                                {"e0_ratios", ratios}, {"budget", 1.0}, {"contour_budgets", contours},
                                {"effort_table", true}, {"seed", 11}};
  p["complete-info"] = {{"name", "complete-info"}, {"mode", "complete_info"},
                        {"sweep", {{"parameter", "players"}, {"from", 2}, {"to", 50}, {"step", 1}}},
                        {"weight", {{"kind", "constant"}, {"value", 1.0}}},
                        {"e0_ratios", {0.0, 0.2, 0.5, 0.8, 0.99}}, {"budget", 1.0}};
  const json us = {1.0, 2.0, 5.0, 10.0, 100.0, "inf"};
  json betas = json::array();
  for (int k = 0; k <= 24; ++k) betas.push_back(1.0 + 0.25 * k);
  const json vs = {0.25, 0.5, 0.75, 1.0};
  p["appendix2-gain-surface"] = {{"name", "appendix2-gain-surface"}, {"mode", "appendix2"}, {"surface", "gain"},
                                 {"u", us}, {"beta", betas}, {"v", vs}};
  p["appendix2-efficiency-surface"] = p["appendix2-gain-surface"];
  p["appendix2-efficiency-surface"]["name"] = "appendix2-efficiency-surface";
  p["appendix2-efficiency-surface"]["surface"] = "efficiency";
  return p;
}

inline json preset(const std::string& name) {
  const auto all = presets();
  const auto it = all.find(name);
  if (it == all.end()) throw config_error("preset", "unknown preset '" + name + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Tables

struct Table {
  std::string name;  // file suffix
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct RunResult {
  std::vector<Table> tables;
  std::vector<std::string> metadata;  // `key: value` lines
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string render_csv(const Table& t, const std::vector<std::string>& metadata,
                              const std::optional<std::string>& failure = std::nullopt) {
  std::ostringstream out;
  for (const auto& m : metadata) out << "# " << m << '\n';
  out << "# table: " << t.name << '\n';
  for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_number(row[c]);
    out << '\n';
  }
  if (failure) out << "# FAILED: " << *failure << '\n';
  return out.str();
}

namespace detail {

inline std::vector<std::string> metadata_for(const ExperimentSpec& s) {
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(s.canonical)));
  std::vector<std::string> m{"experiment: " + s.name, std::string("spec_hash: fnv1a64:") + hash,
                             "seed: " + std::to_string(s.seed)};
  m.push_back("solver: abs_tol=" + format_number(s.settings.abs_tol) +
              " rel_tol=" + format_number(s.settings.rel_tol) + " max_iter=" + std::to_string(s.settings.max_iter) +
              " damping=" + format_number(s.settings.damping));
  if (s.mode == Mode::closed || s.mode == Mode::open)
    m.push_back("monte_carlo: grid_size=" + std::to_string(s.grid_size) + " stage2=" + std::to_string(s.mc_stage2) +
                " stage1=" + std::to_string(s.mc_stage1));
  if (s.mode == Mode::closed) m.push_back("players: " + std::to_string(s.players));
  if (s.mode == Mode::open)
    m.push_back("poisson: rate=" + format_number(s.poisson.rate) + " truncation=" + std::to_string(s.poisson.truncation));
  m.push_back("budget: " + format_number(s.budget));
  return m;
}

inline void check_budget(double payment, double stderr_, double budget, double param) {
  if (!(std::abs(payment - budget) <= std::max(1e-3 * budget, 2.0 * stderr_)))
    throw numerical_error("calibration missed the budget at sweep value " + format_number(param) + ": E[R]=" +
                          format_number(payment) + ", B=" + format_number(budget));
}

struct PointResult {
  bayes::StageOneReport report;
  std::vector<double> times, efforts, rewards;
  std::vector<std::pair<double, double>> contour;  // (budget, b)
};

}  // namespace detail

// Runs the experiment, appending finished tables to `out` as it goes so a
// failure part-way leaves the completed ones in place.
inline void run_experiment(const ExperimentSpec& s, RunResult& out) {
  const unsigned threads = s.threads ? s.threads : numerics::default_thread_count();
  out.metadata = detail::metadata_for(s);

  if (s.mode == Mode::appendix2) {
    const bool gain = s.surface == "gain";
    Table t{gain ? "gain_surface" : "efficiency_surface", {"u", "beta", "v", gain ? "gain" : "efficiency"}, {}};
    for (const auto& r : csf::reward_discrim_surface(s.us, s.betas, s.vs, gain, threads))
      t.rows.push_back({r.u, r.beta, r.v, r.value});
    out.tables.push_back(std::move(t));
    if (gain) {
      Table b{"beta_star", {"u", "v", "beta_star"}, {}};
      for (double u : s.us)
        for (double v : s.vs) b.rows.push_back({u, v, csf::optimal_beta_gain(v, u)});
      out.tables.push_back(std::move(b));
    }
    return;
  }

  if (s.mode == Mode::complete_info) {
    Table t{"efficiency", {"players", "e0_ratio", "efficiency", "stderr", "calibrated_b", "lower_bound", "upper_bound"}, {}};
    for (double r : s.e0_ratios)
      for (double nd : s.sweep) {
        const auto n = static_cast<std::size_t>(nd);
        const double e = contest::symmetric_ne(n, 1.0, r);
        const double pay = e > 0.0 ? nd * e / (r + nd * e) : 0.0;
        if (!(pay > 0.0)) throw infeasible_budget("nobody participates at e0/b=" + format_number(r));
        const double b = s.budget / pay;
        const double w = s.weight_value;
        const double eff = contest::efficiency_identical(n, b, r * b, contest::WeightVector::constant(n, w));
        t.rows.push_back({nd, r, eff, 0.0, b, (nd - 1.0) / nd * w, w});
      }
    out.tables.push_back(std::move(t));
    return;
  }

  const std::string& pc = s.parameter;
  Table eff{"efficiency", {pc, "e0_ratio", "efficiency", "stderr", "calibrated_b", "expected_payment", "payment_stderr"}, {}};
  Table effort{"effort", {pc, "e0_ratio", "t", "effort", "reward_t", "upper_bound"}, {}};
  Table contour{"contour", {"budget", pc, "e0_ratio", "calibrated_b"}, {}};
  Table best{"optimum", {"e0_ratio", pc, "efficiency"}, {}};

  bayes::BneOptions bne;
  bne.grid_size = s.grid_size;
  bne.mc_samples = s.mc_stage2;
  bne.seed = numerics::RngSeed{s.seed};
  bne.settings = s.settings;
  bayes::StageOneOptions s1;
  s1.mc_samples = s.mc_stage1;
  s1.seed = numerics::RngSeed{numerics::splitmix64(s.seed ^ 0x5151)};

  auto flush = [&] {
    out.tables.clear();
    out.tables.push_back(eff);
    if (s.effort_table) out.tables.push_back(effort);
    if (!s.contour_budgets.empty()) out.tables.push_back(contour);
    out.tables.push_back(best);
  };

  for (double ratio : s.e0_ratios) {
    auto point = [&](std::size_t i) {
      const double v = s.sweep[i];
      detail::PointResult pr;
      if (s.mode == Mode::closed) {
        bayes::BayesianConfig c;
        c.n_players = s.players;
        c.e0_ratio = ratio;
        c.budget = s.budget;
        c.join_model = s.join_model;
        c.weight = s.weight;
        if (s.strategy == "earliest_n") c.strategy = bayes::EarliestN{static_cast<std::size_t>(v)};
        else if (s.strategy == "termination") c.strategy = bayes::Termination{v};
        else c.strategy = bayes::Linear{v};
        auto cal = bayes::calibrate_b(c, bne, s1);
        pr.report = cal.report;
        if (s.effort_table) {
          if (!cal.grid.times.empty()) {
            pr.times = cal.grid.times;
            pr.efforts = cal.grid.efforts;
            pr.rewards = cal.grid.rewards;
          } else {
            const double e = bayes::termination_effort(c.with_reward(cal.b), s.settings);
            for (double t : bayes::detail::quantile_grid(s.join_model, s.grid_size)) {
              pr.times.push_back(t);
              pr.efforts.push_back(t <= v ? e : 0.0);
              pr.rewards.push_back(t <= v ? cal.b : 0.0);
            }
          }
        }
        for (double B : s.contour_budgets) {
          if (s.strategy == "linear") {
            c.budget = B;
            pr.contour.emplace_back(B, bayes::calibrate_b(c, bne, s1).b);
          } else {
            pr.contour.emplace_back(B, cal.b * B / s.budget);
          }
        }
      } else {
        open_system::OpenConfig c;
        c.poisson = s.poisson;
        c.e0_ratio = ratio;
        c.budget = s.budget;
        c.weight = s.weight;
        if (s.strategy == "earliest_n") c.strategy = bayes::EarliestN{static_cast<std::size_t>(v)};
        else c.strategy = bayes::Termination{v};
        auto cal = open_system::open_calibrate_b(c, bne, s1);
        pr.report = cal.report;
        if (s.effort_table) {
          if (!cal.grid.times.empty()) {
            pr.times = cal.grid.times;
            pr.efforts = cal.grid.efforts;
            pr.rewards = cal.grid.rewards;
          } else {
            const double e = open_system::solve_bne_open_termination(c.with_reward(cal.b), s.settings);
            const double s_max = *std::max_element(s.sweep.begin(), s.sweep.end()) * 1.25;
            for (std::size_t k = 0; k < s.grid_size; ++k) {
              const double t = s_max * static_cast<double>(k) / static_cast<double>(s.grid_size - 1);
              pr.times.push_back(t);
              pr.efforts.push_back(t <= v ? e : 0.0);
              pr.rewards.push_back(t <= v ? cal.b : 0.0);
            }
          }
        }
        for (double B : s.contour_budgets) pr.contour.emplace_back(B, cal.b * B / s.budget);
      }
      return pr;
    };
    const auto results = numerics::parallel_map(s.sweep.size(), point, threads);

    std::size_t arg = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i].report;
      detail::check_budget(r.expected_payment.mean, r.expected_payment.std_error, s.budget, s.sweep[i]);
      eff.rows.push_back({s.sweep[i], ratio, r.expected_efficiency.mean, r.expected_efficiency.std_error,
                          r.calibrated_b, r.expected_payment.mean, r.expected_payment.std_error});
      const auto& pr = results[i];
      for (std::size_t k = 0; k < pr.times.size(); ++k)
        effort.rows.push_back({s.sweep[i], ratio, pr.times[k], pr.efforts[k], pr.rewards[k],
                               bayes::effort_upper_bound(pr.rewards[k], ratio * r.calibrated_b)});
      for (const auto& [B, b] : pr.contour) contour.rows.push_back({B, s.sweep[i], ratio, b});
      if (r.expected_efficiency.mean > results[arg].report.expected_efficiency.mean) arg = i;
    }
    double best_param = s.sweep[arg];
    double best_eff = results[arg].report.expected_efficiency.mean;
    if (s.mode == Mode::open && s.strategy == "termination") {
      open_system::OpenConfig c;
      c.poisson = s.poisson;
      c.e0_ratio = ratio;
      c.budget = s.budget;
      c.weight = s.weight;
      c.strategy = bayes::Termination{s.sweep.front()};
      const auto refined = open_system::open_optimal_T(c, s.sweep, s.settings, threads);
      best_param = refined.T;
      best_eff = refined.efficiency;
    }
    best.rows.push_back({ratio, best_param, best_eff});
    flush();
  }
  std::sort(contour.rows.begin(), contour.rows.end());
  flush();
}

inline RunResult run_experiment(const ExperimentSpec& s) {
  RunResult out;
  run_experiment(s, out);
  return out;
}

// Writes `<dir>/<name>_<table>.csv` for every table; returns the paths.
inline std::vector<std::filesystem::path> write_tables(const ExperimentSpec& s, const RunResult& r,
                                                       const std::filesystem::path& dir,
                                                       const std::optional<std::string>& failure = std::nullopt) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> paths;
  for (const auto& t : r.tables) {
    const auto p = dir / (s.name + "_" + t.name + ".csv");
    std::ofstream f(p, std::ios::binary);
    if (!f) throw io_error("cannot write '" + p.string() + "'");
    f << render_csv(t, r.metadata, failure);
    if (!f) throw io_error("write failed for '" + p.string() + "'");
    paths.push_back(p);
  }
  return paths;
}

}  // namespace crowdcontest::experiment
