#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "slelab/errors.hpp"
#include "slelab/exact.hpp"
#include "slelab/gmc.hpp"
#include "slelab/harness.hpp"
#include "slelab/identities.hpp"
#include "slelab/parallel.hpp"
#include "slelab/params.hpp"
#include "slelab/sle.hpp"
#include "slelab/surfaces.hpp"

namespace slelab::cli {

inline constexpr const char* kVersion = "slelab 1.0.0";

enum ExitCode : int { kPass = 0, kFail = 1, kUsage = 2, kQuality = 3 };

/// Bad flags, missing parameters, or malformed config files.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Reports

struct ResultRow {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  double ess = 0.0;
  std::optional<ExactValue> exact;
  std::optional<double> z;
  bool pass = true;
};

struct Gate {
  std::string name;
  bool pass = false;
  std::string criterion;
  std::vector<double> measured;
  bool quality_failure = false;
};

struct Report {
  std::string command;
  Json config = Json::object();
  std::vector<ResultRow> results;
  std::vector<Gate> gates;
  std::uint64_t seed = 0;
  std::optional<double> wall_seconds;
  std::vector<std::vector<std::string>> csv;  // first row is the header
  std::optional<std::string> error;          // set when the run stopped on a quality error
  int exit_override = -1;

  int exit_code() const {
    if (exit_override >= 0) return exit_override;
    bool quality = false, fail = false;
    for (const auto& g : gates) {
      if (g.pass) continue;
      if (g.quality_failure) quality = true;
      else fail = true;
    }
    for (const auto& r : results) fail = fail || !r.pass;
    if (quality) return kQuality;
    return fail ? kFail : kPass;
  }
};

inline Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json to_json(const Report& r) {
  Json j;
  j["command"] = r.command;
  j["config"] = r.config;
  Json results = Json::array();
  for (const auto& row : r.results) {
    Json x;
    x["name"] = row.name;
    x["estimate"] = number_or_null(row.estimate);
    x["stderr"] = number_or_null(row.std_error);
    x["n"] = row.n;
    x["ess"] = number_or_null(row.ess);
    if (!row.exact) x["exact"] = nullptr;
    else if (row.exact->infinite) x["exact"] = "inf";
    else x["exact"] = number_or_null(row.exact->value);
    x["z"] = row.z ? number_or_null(*row.z) : Json(nullptr);
    x["pass"] = row.pass;
    results.push_back(x);
  }
  j["results"] = results;
  Json gates = Json::array();
  for (const auto& g : r.gates) {
    Json x;
    x["name"] = g.name;
    x["pass"] = g.pass;
    x["criterion"] = g.criterion;
    Json m = Json::array();
    for (double v : g.measured) m.push_back(number_or_null(v));
    x["measured"] = m;
    x["quality_failure"] = g.quality_failure;
    gates.push_back(x);
  }
  j["gates"] = gates;
  j["seed"] = r.seed;
  j["version"] = kVersion;
  if (r.error) j["error"] = *r.error;
  if (r.wall_seconds) j["wall_seconds"] = *r.wall_seconds;
  j["exit_code"] = r.exit_code();
  return j;
}

inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline void print_table(std::ostream& os, const Report& r, double wall) {
  os << r.command << "  (" << kVersion << ", seed " << r.seed << ")\n";
  if (!r.results.empty()) {
    char line[256];
    std::snprintf(line, sizeof line, "%-28s %16s %12s %8s %10s %16s %8s %s\n", "name", "estimate",
                  "stderr", "n", "ess", "exact", "z", "pass");
    os << line;
    for (const auto& x : r.results) {
      const std::string ex = !x.exact ? "-" : x.exact->infinite ? "inf" : fmt(x.exact->value);
      std::snprintf(line, sizeof line, "%-28s %16.10g %12.4g %8zu %10.1f %16s %8s %s\n",
                    x.name.c_str(), x.estimate, x.std_error, x.n, x.ess, ex.c_str(),
                    x.z ? fmt(*x.z).c_str() : "-", x.pass ? "yes" : "NO");
      os << line;
    }
  }
  for (const auto& g : r.gates) {
    os << (g.pass ? "[pass] " : (g.quality_failure ? "[QUALITY] " : "[FAIL] ")) << g.name << ": "
       << g.criterion << "  measured:";
    for (double v : g.measured) os << ' ' << fmt(v);
    os << '\n';
  }
  if (r.error) os << "error: " << *r.error << '\n';
  char line[96];
  std::snprintf(line, sizeof line, "wall time %.2f s, exit code %d\n", wall, r.exit_code());
  os << line;
}

inline void write_csv(const std::string& path, const std::vector<std::vector<std::string>>& rows) {
  std::ofstream f(path);
  if (!f) throw UsageError("cannot open " + path + " for writing");
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
    f << '\n';
  }
}

/// Mean and stderr of consecutive batches of a sample sequence.
inline std::vector<std::vector<std::string>> batch_partials(const std::vector<double>& xs,
                                                            std::size_t batch) {
  std::vector<std::vector<std::string>> rows{{"batch", "n", "mean", "stderr"}};
  for (std::size_t b = 0, i = 0; i < xs.size(); ++b, i += batch) {
    const std::size_t k = std::min(batch, xs.size() - i);
    Accumulator acc;
    for (std::size_t j = i; j < i + k; ++j) acc.add(xs[j]);
    rows.push_back({std::to_string(b), std::to_string(k), fmt(acc.mean()),
                    k >= 2 ? fmt(acc.standard_error()) : "nan"});
  }
  return rows;
}

inline ResultRow row_from(const std::string& name, const MomentEstimate& e, bool pass) {
  ResultRow r;
  r.name = name;
  r.estimate = e.mean;
  r.std_error = e.std_error;
  r.n = e.n;
  r.ess = e.ess;
  r.exact = e.exact;
  r.z = e.z;
  r.pass = pass;
  return r;
}

inline Gate gate_from(const std::string& name, const Verdict& v) {
  return {name, v.pass, v.criterion, v.measured, v.quality_failure};
}

// ---------------------------------------------------------------------------
// Parameters: defaults < config file < flags, then normalized

enum class ParamType { Real, Int, Str, Flag };

struct ParamDef {
  std::string name;
  ParamType type;
  Json fallback;  // null: no default
  std::string help;
};

struct Command {
  std::string name;
  std::string help;
  std::vector<ParamDef> params;
  std::function<Report(const Json&, unsigned)> run;
};

namespace detail {

inline Json parse_value(const ParamDef& d, const std::string& s) {
  try {
    std::size_t pos = 0;
    switch (d.type) {
      case ParamType::Real: {
        const double v = std::stod(s, &pos);
        if (pos != s.size()) break;
        return v;
      }
      case ParamType::Int: {
        const long long v = std::stoll(s, &pos);
        if (pos != s.size() || v < 0) break;
        return std::uint64_t(v);
      }
      case ParamType::Str: return s;
      case ParamType::Flag: return true;
    }
  } catch (const std::exception&) {
  }
  throw UsageError("invalid value '" + s + "' for --" + d.name);
}

inline Json check_json_value(const ParamDef& d, const Json& v) {
  switch (d.type) {
    case ParamType::Real:
      if (v.is_number()) return v.get<double>();
      break;
    case ParamType::Int:
      if (v.is_number_unsigned()) return v;
      break;
    case ParamType::Str:
      if (v.is_string()) return v;
      break;
    case ParamType::Flag:
      if (v.is_boolean()) return v;
      break;
  }
  throw UsageError("config value for '" + d.name + "' has the wrong type");
}

// Mutually exclusive spellings of the same quantity.
inline const std::vector<std::pair<std::string, std::string>>& alternatives() {
  static const std::vector<std::pair<std::string, std::string>> alt{
      {"gamma", "kappa"}, {"W", "beta"}, {"W1", "beta1"}, {"W2", "beta2"}, {"W3", "beta3"}};
  return alt;
}

inline void overlay(Json& cfg, const Json& layer) {
  for (const auto& [a, b] : alternatives()) {
    if (layer.contains(a) && layer.contains(b))
      throw UsageError("--" + a + " and --" + b + " are mutually exclusive");
    if (layer.contains(a) || layer.contains(b)) {
      cfg.erase(a);
      cfg.erase(b);
    }
  }
  for (const auto& [k, v] : layer.items()) cfg[k] = v;
}

// gamma -> kappa, W -> beta: one canonical form.
inline void normalize(Json& cfg) {
  if (cfg.contains("gamma")) {
    const double g = cfg["gamma"].get<double>();
    LqgParams check(g);
    cfg.erase("gamma");
    cfg["kappa"] = g * g;
  }
  for (const auto& [w, b] : alternatives()) {
    if (w == "gamma" || !cfg.contains(w)) continue;
    if (!cfg.contains("kappa")) throw UsageError("--" + w + " needs --gamma or --kappa");
    const LqgParams p = LqgParams::from_kappa(cfg["kappa"].get<double>());
    const double beta = weight_to_beta(cfg[w].get<double>(), p);
    cfg.erase(w);
    cfg[b] = beta;
  }
}

}  // namespace detail

inline double get_real(const Json& cfg, const std::string& k) {
  if (!cfg.contains(k) || cfg[k].is_null()) throw UsageError("missing parameter --" + k);
  return cfg[k].get<double>();
}
inline std::uint64_t get_int(const Json& cfg, const std::string& k) {
  if (!cfg.contains(k) || cfg[k].is_null()) throw UsageError("missing parameter --" + k);
  return cfg[k].get<std::uint64_t>();
}
inline std::string get_str(const Json& cfg, const std::string& k) {
  if (!cfg.contains(k) || cfg[k].is_null()) throw UsageError("missing parameter --" + k);
  return cfg[k].get<std::string>();
}
inline bool get_flag(const Json& cfg, const std::string& k) {
  return cfg.contains(k) && cfg[k].is_boolean() && cfg[k].get<bool>();
}
inline std::optional<double> get_opt_real(const Json& cfg, const std::string& k) {
  if (!cfg.contains(k) || cfg[k].is_null()) return std::nullopt;
  return cfg[k].get<double>();
}
inline LqgParams lqg(const Json& cfg) { return LqgParams::from_kappa(get_real(cfg, "kappa")); }

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("invalid list entry '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

// ---------------------------------------------------------------------------
// Commands

inline Report cmd_exact(const Json& cfg, unsigned) {
  Report r;
  r.command = "exact";
  const std::string f = get_str(cfg, "formula");
  auto value_row = [&](const std::string& name, double v) {
    ResultRow row;
    row.name = name;
    row.estimate = v;
    row.exact = std::isinf(v) ? ExactValue::infinity() : ExactValue::finite(v);
    r.results.push_back(row);
  };
  auto exact_row = [&](const std::string& name, const ExactValue& v) {
    ResultRow row;
    row.name = name;
    row.estimate = v.value;
    row.exact = v;
    r.results.push_back(row);
  };
  auto sle = [&] {
    return std::array<double, 4>{get_real(cfg, "kappa"), get_real(cfg, "rho-minus"),
                                 get_real(cfg, "rho-plus"), get_real(cfg, "rho1")};
  };
  if (f == "delta") {
    value_row("delta_beta", delta_beta(get_real(cfg, "beta"), lqg(cfg)));
  } else if (f == "r-bar") {
    value_row("r_bar", r_bar(get_real(cfg, "beta"), lqg(cfg)));
  } else if (f == "h-bar") {
    const LqgParams p = lqg(cfg);
    const double b1 = get_real(cfg, "beta1"), b2 = get_real(cfg, "beta2"), b3 = get_real(cfg, "beta3");
    if (auto v = seiberg_violation(b1, b2, b3, p)) throw DomainError("Seiberg bound " + *v + " violated");
    value_row("h_bar", h_bar(b1, b2, b3, p).value);
  } else if (f == "disk-density") {
    const LqgParams p = lqg(cfg);
    const LengthLawDensity d = disk_length_density(beta_to_weight(get_real(cfg, "beta"), p), p);
    if (d.infinite) value_row("disk_density", INFINITY);
    else if (auto ell = get_opt_real(cfg, "ell")) value_row("disk_density", d.at(*ell));
    else {
      value_row("prefactor", d.prefactor);
      value_row("exponent", d.exponent);
    }
  } else if (f == "triangle-density" || f == "triangle-laplace") {
    const LqgParams p = lqg(cfg);
    const TriangleWeights tw =
        make_triangle(beta_to_weight(get_real(cfg, "beta1"), p), beta_to_weight(get_real(cfg, "beta2"), p),
                      beta_to_weight(get_real(cfg, "beta3"), p), p);
    if (f == "triangle-laplace") {
      exact_row("triangle_laplace", triangle_length_laplace(tw, get_real(cfg, "mu"), p));
    } else {
      const LengthLawDensity d = triangle_length_density(tw, p);
      if (d.infinite) value_row("triangle_density", INFINITY);
      else if (auto ell = get_opt_real(cfg, "ell")) value_row("triangle_density", d.at(*ell));
      else {
        value_row("prefactor", d.prefactor);
        value_row("exponent", d.exponent);
      }
    }
  } else if (f == "f") {
    const auto s = sle();
    value_row("F", f_function(get_real(cfg, "x"), s[0], s[1], s[2], s[3]));
  } else if (f == "radius-moment") {
    const auto s = sle();
    exact_row("radius_moment", radius_moment_exact(s[0], s[1], s[2], s[3], get_real(cfg, "alpha"),
                                                   int(get_int(cfg, "root"))));
  } else if (f == "alpha0") {
    value_row("alpha_0", alpha_threshold(get_real(cfg, "kappa"), get_real(cfg, "rho-plus"),
                                         get_real(cfg, "rho1")));
  } else if (f == "beta-roots") {
    const BetaRoots br =
        alpha_to_beta_roots(get_real(cfg, "alpha"), get_real(cfg, "kappa"), get_real(cfg, "rho1"));
    if (br.complex) throw DomainError("the roots are complex");
    value_row("beta_first", br.first.real());
    value_row("beta_second", br.second.real());
  } else if (f == "log-gamma-b") {
    value_row("log_gamma_b", log_gamma_b(get_real(cfg, "b"), get_real(cfg, "z")));
  } else {
    throw UsageError("unknown formula '" + f +
                     "' (delta, r-bar, h-bar, disk-density, triangle-density, triangle-laplace, f, "
                     "radius-moment, alpha0, beta-roots, log-gamma-b)");
  }
  return r;
}

inline Report cmd_verify_identities(const Json& cfg, unsigned) {
  Report r;
  r.command = "verify-identities";
  IdentityOptions o;
  o.grid_size = get_int(cfg, "grid-size");
  o.z_points = get_int(cfg, "z-points");
  o.perturb = get_real(cfg, "perturb");
  if (o.grid_size < 1 || o.z_points < 2) throw UsageError("grid sizes too small");
  const IdentityReport rep = run_identity_suite(o);
  for (const auto& s : rep.summary)
    r.gates.push_back({s.identity, s.pass, "max residual < threshold",
                       {s.max_residual, s.threshold, double(s.points)}, false});
  r.csv.push_back({"identity_name", "grid_point", "residual"});
  for (const auto& row : rep.rows) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6e", row.residual);
    r.csv.push_back({row.identity, row.grid_point, buf});
  }
  return r;
}

inline McOptions mc_options(const Json& cfg, unsigned workers) {
  McOptions o;
  o.workers = workers;
  o.conv_tol = get_real(cfg, "conv-tol");
  return o;
}

inline Report cmd_verify_radius(const Json& cfg, unsigned workers) {
  Report r;
  r.command = "verify-radius";
  r.seed = get_int(cfg, "seed");
  const double kappa = get_real(cfg, "kappa"), rm = get_real(cfg, "rho-minus"),
               rp = get_real(cfg, "rho-plus"), r1 = get_real(cfg, "rho1"),
               alpha = get_real(cfg, "alpha");
  const double T = get_real(cfg, "T"), dt = get_real(cfg, "dt");
  const std::size_t n = get_int(cfg, "n-samples");
  McOptions o = mc_options(cfg, workers);
  o.dt_halving = !get_flag(cfg, "no-dt-gate");
  RadiusMoment m = mc_radius_moment(kappa, rm, rp, r1, alpha, n, T, dt, r.seed, o);
  if (auto e = get_opt_real(cfg, "expect-override")) m.estimate.set_exact(ExactValue::finite(*e));
  const Verdict v = compare(m.estimate, *m.estimate.exact, get_real(cfg, "k-sigma"), get_real(cfg, "rel-tol"));
  r.results.push_back(row_from("psi_prime_moment", m.estimate, v.pass));
  r.gates.push_back(gate_from("moment_match", v));
  r.gates.push_back({"t_convergence", m.unconverged_fraction <= o.max_bad_fraction,
                     "fraction of samples with |psi(T)-psi(T/2)| > conv_tol*psi(T) <= 0.05",
                     {m.unconverged_fraction, o.max_bad_fraction}, true});
  if (m.fine) {
    const double change = m.fine->mean - m.estimate.mean;
    r.results.push_back(row_from("psi_prime_moment_half_dt", *m.fine, true));
    r.gates.push_back({"dt_halving", std::abs(change) < m.estimate.std_error,
                       "|estimate(dt/2) - estimate(dt)| < stderr",
                       {change, m.difference->std_error, m.estimate.std_error}, false});
  }
  r.csv = batch_partials(m.values, get_int(cfg, "batch"));
  return r;
}

inline Report cmd_verify_divergence(const Json& cfg, unsigned workers) {
  Report r;
  r.command = "verify-divergence";
  r.seed = get_int(cfg, "seed");
  const DivergenceCheck d = mc_divergence_check(
      get_real(cfg, "kappa"), get_real(cfg, "rho-minus"), get_real(cfg, "rho-plus"),
      get_real(cfg, "rho1"), get_real(cfg, "offset"), get_int(cfg, "n-samples"), get_real(cfg, "T"),
      get_real(cfg, "dt"), r.seed, mc_options(cfg, workers));
  const double floor = get_real(cfg, "divergence-floor");
  const Verdict above = compare(d.above, ExactValue::infinity(), 3.0, 1.0, floor);
  const double ratio = d.above.mean / d.below.mean;
  // Heavy tails make the running mean jumpy, so growth is judged end to end.
  const bool growing = d.running_above.size() >= 2 && d.running_above.back() > d.running_above.front();
  r.results.push_back(row_from("moment_alpha0_minus", d.below, true));
  r.results.push_back(row_from("moment_alpha0_plus", d.above, above.pass));
  r.gates.push_back(gate_from("divergence_floor", above));
  r.gates.push_back({"ratio_above_below", ratio > 10.0, "mean(alpha0+offset) > 10 * mean(alpha0-offset)",
                     {ratio, d.alpha_0}, false});
  std::vector<double> running = d.running_above;
  r.gates.push_back({"running_mean_growth", growing, "running mean at n exceeds the running mean at n/16",
                     running, false});
  r.csv.push_back({"n", "running_mean"});
  for (std::size_t i = 0; i < d.checkpoints.size(); ++i)
    r.csv.push_back({std::to_string(d.checkpoints[i]), fmt(d.running_above[i])});
  return r;
}

inline Report cmd_verify_reversal(const Json& cfg, unsigned workers) {
  Report r;
  r.command = "verify-reversal";
  r.seed = get_int(cfg, "seed");
  ReversalCheck c = mc_reversal_check(
      get_real(cfg, "kappa"), get_real(cfg, "rho-minus"), get_real(cfg, "rho-plus"),
      get_real(cfg, "rho1"), get_real(cfg, "alpha-obs"), get_int(cfg, "n-samples"), get_real(cfg, "T"),
      get_real(cfg, "dt"), r.seed, mc_options(cfg, workers));
  if (auto e = get_opt_real(cfg, "expect-override")) {
    c.direct.set_exact(ExactValue::finite(*e));
    c.weighted.set_exact(ExactValue::finite(*e));
  }
  const double k = get_real(cfg, "k-sigma");
  const double diff = c.direct.mean - c.weighted.mean;
  const double comb = std::hypot(c.direct.std_error, c.weighted.std_error);
  const bool dz = std::abs(c.direct.z.value_or(0.0)) <= k;
  const bool wz = std::abs(c.weighted.z.value_or(0.0)) <= k;
  r.results.push_back(row_from("direct", c.direct, dz));
  r.results.push_back(row_from("weighted", c.weighted, wz));
  r.gates.push_back({"direct_vs_weighted", std::abs(diff) < k * comb,
                     "|direct - weighted| < k * combined stderr", {diff, k * comb}, false});
  const double min_ess = get_real(cfg, "min-ess");
  r.gates.push_back({"effective_sample_size", c.weighted.ess >= min_ess, "ESS >= min-ess",
                     {c.weighted.ess, min_ess}, true});
  r.gates.push_back({"weight_tail", c.weighted.top_share <= 0.5, "top 1% weight share <= 0.5",
                     {c.weighted.top_share}, true});
  r.csv = batch_partials(c.direct_values, get_int(cfg, "batch"));
  return r;
}

inline Report cmd_verify_gmc(const Json& cfg, unsigned workers) {
  Report r;
  r.command = "verify-gmc";
  r.seed = get_int(cfg, "seed");
  const LqgParams p = lqg(cfg);
  GmcOptions o;
  o.workers = workers;
  o.refinement_gate = !get_flag(cfg, "no-refinement-gate");
  GmcMoment m = mc_gmc_moment(get_real(cfg, "beta1"), get_real(cfg, "beta2"), get_real(cfg, "beta3"),
                              get_int(cfg, "N"), get_int(cfg, "n-samples"), p, r.seed, o);
  if (auto e = get_opt_real(cfg, "expect-override")) m.estimate.set_exact(ExactValue::finite(*e));
  const Verdict v = compare_deviation(m.estimate, *m.estimate.exact, get_real(cfg, "k-sigma"),
                                      get_real(cfg, "rel-tol"));
  r.results.push_back(row_from("gmc_moment", m.estimate, v.pass));
  r.gates.push_back(gate_from("moment_match", v));
  if (m.refined) {
    const double change = m.refined->mean - m.paired_coarse->mean;
    const double comb = std::hypot(m.refined->std_error, m.paired_coarse->std_error);
    r.results.push_back(row_from("gmc_moment_2N", *m.refined, true));
    r.results.push_back(row_from("gmc_moment_N_paired", *m.paired_coarse, true));
    r.gates.push_back({"grid_doubling", std::abs(change) < comb,
                       "|estimate(2N) - estimate(N)| < combined stderr",
                       {change, m.difference->std_error, comb}, false});
  }
  r.csv = batch_partials(m.values, get_int(cfg, "batch"));
  return r;
}

inline Report cmd_verify_length_law(const Json& cfg, unsigned workers) {
  Report r;
  r.command = "verify-length-law";
  r.seed = get_int(cfg, "seed");
  const LqgParams p = lqg(cfg);
  const TriangleWeights tw =
      make_triangle(beta_to_weight(get_real(cfg, "beta1"), p), beta_to_weight(get_real(cfg, "beta2"), p),
                    beta_to_weight(get_real(cfg, "beta3"), p), p);
  const LengthLawCheck c = mc_triangle_length_law(tw, parse_list(get_str(cfg, "lengths")),
                                                  get_int(cfg, "N"), get_int(cfg, "n-samples"), p,
                                                  r.seed, workers);
  const double k = get_real(cfg, "k-sigma");
  for (std::size_t i = 0; i < c.lengths.size(); ++i) {
    const MomentEstimate& e = c.mean_weights[i];
    const bool ok = e.z && std::abs(*e.z) <= k;
    r.results.push_back(row_from("mean_weight_ell_" + fmt(c.lengths[i]), e, ok));
    r.gates.push_back({"weight_tail_ell_" + fmt(c.lengths[i]), e.top_share <= 0.5,
                       "top 1% weight share <= 0.5", {e.top_share}, true});
  }
  const double tol = get_real(cfg, "exponent-tol");
  r.gates.push_back({"length_exponent", std::abs(c.fitted_exponent - c.expected_exponent) < tol,
                     "|fitted - expected| < exponent-tol",
                     {c.fitted_exponent, c.expected_exponent, tol}, false});
  return r;
}

namespace detail {

inline double exp_cdf(double x, double rate) { return x <= 0.0 ? 0.0 : -std::expm1(-rate * x); }

// False when there is no z-score (zero stderr).
inline bool within_z(const MomentEstimate& e, double k) { return e.z && std::abs(*e.z) <= k; }

// Mean of |Z + m e| for a standard 3D Gaussian Z.
inline double noncentral_chi3_mean(double m) {
  if (m < 1e-8) return 2.0 * std::sqrt(2.0 / M_PI);
  return std::sqrt(2.0 / M_PI) * std::exp(-0.5 * m * m) + (m + 1.0 / m) * std::erf(m / std::sqrt(2.0));
}

}  // namespace detail

inline Report cmd_verify_surfaces(const Json& cfg, unsigned workers) {
  Report r;
  r.command = "verify-surfaces";
  r.seed = get_int(cfg, "seed");
  const LqgParams p = lqg(cfg);
  const std::size_t n = get_int(cfg, "n-samples");
  const double dt = get_real(cfg, "dt");
  const double Q = p.Q(), g = p.gamma();
  std::uint64_t tag = 0;
  auto sub_seed = [&] { return splitmix64(r.seed + 0x1000 * ++tag); };

  // sup-laws
  const double betas[3] = {g, 0.5 * (g + Q), Q - 0.1};
  const char* names[3] = {"sup_law_beta_gamma", "sup_law_beta_mid", "sup_law_beta_Q_minus_0.1"};
  for (int i = 0; i < 3; ++i) {
    const double mu = Q - betas[i];
    const double T_max = std::max(20.0, 40.0 / (mu * mu));
    const double step = std::max(dt, T_max / 2000.0);
    const std::uint64_t s = sub_seed();
    std::vector<double> sups(n);
    parallel_for(n, workers, [&](std::size_t j) {
      sups[j] = sample_M_beta(betas[i], p, T_max, step, splitmix64(s ^ j)).sup;
    });
    const KsResult ks = ks_test(sups, [&](double x) { return detail::exp_cdf(x, mu); });
    r.gates.push_back({names[i], ks.pass, "KS statistic vs Exponential(Q-beta) < 1% critical value",
                       {ks.statistic, ks.critical, betas[i]}, false});
  }

  // Williams decomposition: the position at t = 1 under a ~ Exp(Q-beta) mixing
  {
    const double beta = g, mu = Q - beta, t = 1.0, T_max = 2.0;
    const std::uint64_t s1 = sub_seed(), s2 = sub_seed();
    std::vector<double> direct(n), mixed(n);
    parallel_for(n, workers, [&](std::size_t j) {
      direct[j] = sample_M_beta(beta, p, T_max, dt, splitmix64(s1 ^ j)).at(t);
      auto rng = sample_stream(s2, j, 7);
      std::exponential_distribution<double> ex(mu);
      const double a = ex(rng);
      mixed[j] = sample_M_beta_given_max(beta, a, p, T_max, dt, splitmix64(s2 ^ j)).at(t);
    });
    const KsResult ks = ks_test_two_sample(direct, mixed);
    r.gates.push_back({"williams_mixture", ks.pass,
                       "two-sample KS of X_1, direct vs max-decomposed, < 1% critical value",
                       {ks.statistic, ks.critical}, false});
  }

  // post-hit segment of the critical process is sqrt(2) times a 3D Bessel process
  {
    const double a = 0.5, s_after = 1.0, T_max = 6.0;
    const std::uint64_t s = sub_seed();
    std::vector<double> vals(n, NAN);
    parallel_for(n, workers, [&](std::size_t j) {
      const RadialProcess pr = sample_M_Qminus(a, T_max, dt, splitmix64(s ^ j));
      if (pr.hit_time && *pr.hit_time + s_after <= T_max)
        vals[j] = -(pr.at(*pr.hit_time + s_after) - a) / std::sqrt(2.0);
    });
    std::vector<double> kept;
    for (double v : vals)
      if (!std::isnan(v)) kept.push_back(v);
    MomentEstimate e = accumulate(kept);
    e.set_exact(ExactValue::finite(detail::noncentral_chi3_mean(0.0) * std::sqrt(s_after)));
    const bool ok = detail::within_z(e, 3.0);
    r.results.push_back(row_from("critical_post_hit_bessel_mean", e, ok));
  }

  // disk radial parts: entrance from -eps_start and its halving
  {
    const double W = get_real(cfg, "disk-weight"), eps = get_real(cfg, "eps-start");
    const double beta = weight_to_beta(W, p), mu = Q - beta, t = 1.0;
    const std::size_t m = std::max<std::size_t>(n / 4, 2);
    const std::uint64_t s = sub_seed();
    std::vector<double> x1(m), x2(m);
    parallel_for(m, workers, [&](std::size_t j) {
      x1[j] = sample_disk_radial_conditioned(W, p, t, 1e-2, splitmix64(s ^ j), eps).first.values.back();
      x2[j] = sample_disk_radial_conditioned(W, p, t, 1e-2, splitmix64(s ^ j), 0.5 * eps).first.values.back();
    });
    MomentEstimate e1 = accumulate(x1), e2 = accumulate(x2);
    // exact entrance law: sqrt(2) |B_3(1) + (mu/sqrt 2) e| from 0
    const double target = -std::sqrt(2.0) * detail::noncentral_chi3_mean(mu / std::sqrt(2.0));
    e1.set_exact(ExactValue::finite(target));
    e2.set_exact(ExactValue::finite(target));
    r.results.push_back(row_from("disk_radial_mean_X1", e1, detail::within_z(e1, 3.0)));
    r.results.push_back(row_from("disk_radial_mean_X1_half_eps", e2, detail::within_z(e2, 3.0)));
    r.gates.push_back({"eps_start_halving", std::abs(e1.mean - e2.mean) < std::hypot(e1.std_error, e2.std_error),
                       "|E[X_1](eps) - E[X_1](eps/2)| < combined stderr", {e1.mean - e2.mean}, false});
  }

  // thin-disk beads in a length window
  {
    const double W = get_real(cfg, "thin-weight"), lo = 0.1, hi = 10.0;
    const std::uint64_t s = sub_seed();
    std::vector<double> excess(n), lengths;
    std::vector<BeadChain> chains(n);
    parallel_for(n, workers, [&](std::size_t j) {
      chains[j] = thin_chain_structure(W, lo, hi, p, splitmix64(s ^ j), 1.0);
    });
    for (std::size_t j = 0; j < n; ++j) {
      excess[j] = double(chains[j].left_lengths.size()) - chains[j].T * chains[j].intensity;
      for (double l : chains[j].left_lengths) lengths.push_back(std::log(l));
    }
    MomentEstimate e = accumulate(excess);
    e.set_exact(ExactValue::finite(0.0));
    r.results.push_back(row_from("bead_count_minus_T_intensity", e, detail::within_z(e, 3.0)));
    // log-length histogram against the power law on the window
    const int bins = 10;
    const double e1 = disk_length_density(p.kappa() - W, p).exponent + 1.0;
    auto mass = [&](double l) { return std::abs(e1) < 1e-14 ? std::log(l) : std::pow(l, e1) / e1; };
    std::vector<double> obs(bins, 0.0), expct(bins);
    const double total = mass(hi) - mass(lo);
    for (int b = 0; b < bins; ++b) {
      const double l0 = lo * std::pow(hi / lo, double(b) / bins), l1 = lo * std::pow(hi / lo, double(b + 1) / bins);
      expct[b] = double(lengths.size()) * (mass(l1) - mass(l0)) / total;
    }
    const double span = std::log(hi / lo);
    for (double ll : lengths) {
      const int b = std::min(bins - 1, int((ll - std::log(lo)) / span * bins));
      obs[b] += 1.0;
    }
    const ChiSquareResult cs = chi_square_test(obs, expct);
    r.gates.push_back({"bead_length_law", cs.pass, "chi-square of bead lengths vs power law < 1% critical value",
                       {cs.statistic, cs.critical, double(cs.dof)}, false});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Command table and entry point

inline std::vector<Command> commands() {
  using T = ParamType;
  const ParamDef seed{"seed", T::Int, 1, "random seed"};
  const ParamDef batch{"batch", T::Int, 1000, "samples per CSV partial"};
  const ParamDef conv{"conv-tol", T::Real, 1e-3, "relative psi'(1) change tolerated between T/2 and T"};
  const ParamDef ksig{"k-sigma", T::Real, 3.0, "z-score tolerance"};
  auto real = [](const char* n, Json d, const char* h) { return ParamDef{n, T::Real, d, h}; };
  std::vector<Command> cs;
  cs.push_back({"exact", "evaluate a closed-form expression",
                {{"formula", T::Str, nullptr, "formula name"},
                 real("gamma", nullptr, "LQG gamma"), real("kappa", nullptr, "SLE kappa = gamma^2"),
                 real("beta", nullptr, "insertion"), real("W", nullptr, "weight"),
                 real("beta1", nullptr, "insertion 1"), real("beta2", nullptr, "insertion 2"),
                 real("beta3", nullptr, "insertion 3"), real("W1", nullptr, "weight 1"),
                 real("W2", nullptr, "weight 2"), real("W3", nullptr, "weight 3"),
                 real("ell", nullptr, "boundary length"), real("mu", nullptr, "Laplace variable"),
                 real("rho-minus", nullptr, "force point weight at 0-"),
                 real("rho-plus", nullptr, "force point weight at 0+"),
                 real("rho1", nullptr, "force point weight at 1"), real("alpha", nullptr, "moment"),
                 {"root", T::Int, 0, "which beta root (0 or 1)"}, real("x", nullptr, "argument of F"),
                 real("b", nullptr, "double gamma parameter"), real("z", nullptr, "double gamma argument")},
                cmd_exact});
  cs.push_back({"verify-identities", "run the analytic identity suite",
                {{"grid-size", T::Int, 20, "admissible points per identity"},
                 {"z-points", T::Int, 50, "z-points per b for the double gamma checks"},
                 real("perturb", 0.0, "relative error injected into one double gamma value")},
                cmd_verify_identities});
  cs.push_back({"verify-radius", "Monte Carlo of the conformal radius moment",
                {real("gamma", nullptr, "LQG gamma"), real("kappa", 2.0, "SLE kappa"),
                 real("rho-minus", 0.0, "weight at 0-"), real("rho-plus", 0.0, "weight at 0+"),
                 real("rho1", 0.0, "weight at 1"), real("alpha", -1.0, "moment"),
                 {"n-samples", T::Int, 10000, "paths"}, real("T", 1e6, "capacity horizon"),
                 real("dt", 1e-3, "relative step"), seed, conv, ksig,
                 real("rel-tol", 0.03, "maximal stderr relative to the target"),
                 real("expect-override", nullptr, "replace the exact target"),
                 {"no-dt-gate", T::Flag, false, "skip the coupled dt-halving run"}, batch},
                cmd_verify_radius});
  cs.push_back({"verify-divergence", "moments on both sides of the divergence threshold",
                {real("gamma", nullptr, "LQG gamma"), real("kappa", 2.0, "SLE kappa"),
                 real("rho-minus", 0.0, "weight at 0-"), real("rho-plus", 0.0, "weight at 0+"),
                 real("rho1", 1.0, "weight at 1"), real("offset", 0.5, "distance from the threshold"),
                 {"n-samples", T::Int, 10000, "paths"}, real("T", 1e6, "capacity horizon"),
                 real("dt", 1e-3, "relative step"), seed, conv,
                 real("divergence-floor", 1e3, "mean that counts as divergent")},
                cmd_verify_divergence});
  cs.push_back({"verify-reversal", "direct against reweighted moments",
                {real("gamma", nullptr, "LQG gamma"), real("kappa", 2.0, "SLE kappa"),
                 real("rho-minus", 0.5, "weight at 0-"), real("rho-plus", 0.5, "weight at 0+"),
                 real("rho1", 1.0, "weight at 1"), real("alpha-obs", -0.3, "observed moment"),
                 {"n-samples", T::Int, 10000, "paths per law"}, real("T", 1e6, "capacity horizon"),
                 real("dt", 1e-3, "relative step"), seed, conv, ksig,
                 real("min-ess", 1000.0, "required effective sample size"),
                 real("expect-override", nullptr, "replace the exact target"), batch},
                cmd_verify_reversal});
  cs.push_back({"verify-gmc", "Monte Carlo of the boundary chaos moment",
                {real("gamma", nullptr, "LQG gamma"), real("kappa", 1.0, "gamma^2"),
                 real("beta1", 0.5, "insertion at 0"), real("beta2", 0.5, "insertion at 1"),
                 real("beta3", 2.0, "third insertion"), real("W1", nullptr, "weight 1"),
                 real("W2", nullptr, "weight 2"), real("W3", nullptr, "weight 3"),
                 {"N", T::Int, 8192, "grid cells"}, {"n-samples", T::Int, 20000, "fields"}, seed, ksig,
                 real("rel-tol", 0.05, "maximal relative deviation"),
                 real("expect-override", nullptr, "replace the exact target"),
                 {"no-refinement-gate", T::Flag, false, "skip the coupled N -> 2N run"}, batch},
                cmd_verify_gmc});
  cs.push_back({"verify-length-law", "importance weights of the triangle length law",
                {real("gamma", nullptr, "LQG gamma"), real("kappa", 1.0, "gamma^2"),
                 real("beta1", nullptr, "insertion 1"), real("beta2", nullptr, "insertion 2"),
                 real("beta3", nullptr, "insertion 3"), real("W1", 1.7, "weight 1"),
                 real("W2", 1.7, "weight 2"), real("W3", 1.7, "weight 3"),
                 {"lengths", T::Str, "0.5,1,2", "comma-separated target lengths"},
                 {"N", T::Int, 4096, "grid cells"}, {"n-samples", T::Int, 20000, "fields"}, seed, ksig,
                 real("exponent-tol", 0.05, "tolerance of the fitted exponent")},
                cmd_verify_length_law});
  cs.push_back({"verify-surfaces", "distribution tests of the radial processes",
                {real("gamma", nullptr, "LQG gamma"), real("kappa", 1.0, "gamma^2"),
                 {"n-samples", T::Int, 10000, "paths per test"}, real("dt", 1e-3, "grid step"), seed,
                 real("disk-weight", 2.0, "thick disk weight"), real("eps-start", 1e-4, "entrance offset"),
                 real("thin-weight", 0.3, "thin disk weight")},
                cmd_verify_surfaces});
  return cs;
}

/// Full CLI: returns the process exit code. Output goes to `out` and `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Exact formulas and Monte Carlo checks for SLE and Liouville quantum gravity"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  const std::vector<Command> cs = commands();
  struct Bound {
    CLI::App* sub;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> opts;
    std::string config, out, csv;
    unsigned workers = 0;
    bool timing = false;
  };
  std::vector<Bound> bound(cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i) {
    Bound& b = bound[i];
    b.sub = app.add_subcommand(cs[i].name, cs[i].help);
    for (const auto& d : cs[i].params) {
      if (d.type == ParamType::Flag) b.opts[d.name] = b.sub->add_flag("--" + d.name, d.help);
      else b.opts[d.name] = b.sub->add_option("--" + d.name, b.values[d.name], d.help);
    }
    b.sub->add_option("--config", b.config, "JSON config file; flags override it");
    b.sub->add_option("--out,-o", b.out, "write the JSON report here");
    b.sub->add_option("--csv", b.csv, "write the CSV here");
    b.sub->add_option("--workers", b.workers, "worker threads (default: SLELAB_WORKERS or all cores)");
    b.sub->add_flag("--timing", b.timing, "include wall time in the JSON report");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kPass : kUsage;
  }
  for (std::size_t i = 0; i < cs.size(); ++i) {
    Bound& b = bound[i];
    if (!b.sub->parsed()) continue;
    const Command& c = cs[i];
    const auto t0 = std::chrono::steady_clock::now();
    Report rep;
    try {
      Json cfg = Json::object();
      for (const auto& d : c.params)
        if (!d.fallback.is_null()) cfg[d.name] = d.fallback;
      if (!b.config.empty()) {
        std::ifstream f(b.config);
        if (!f) throw UsageError("cannot read config file " + b.config);
        Json file;
        try {
          file = Json::parse(f);
        } catch (const std::exception& e) {
          throw UsageError("malformed config file: " + std::string(e.what()));
        }
        if (!file.is_object()) throw UsageError("config file must hold a JSON object");
        Json layer = Json::object();
        for (const auto& [k, v] : file.items()) {
          auto it = std::find_if(c.params.begin(), c.params.end(), [&](const ParamDef& d) { return d.name == k; });
          if (it == c.params.end()) throw UsageError("unknown config key '" + k + "'");
          layer[k] = detail::check_json_value(*it, v);
        }
        detail::overlay(cfg, layer);
      }
      Json layer = Json::object();
      for (const auto& d : c.params)
        if (b.opts[d.name]->count() > 0)
          layer[d.name] = d.type == ParamType::Flag ? Json(true) : detail::parse_value(d, b.values[d.name]);
      detail::overlay(cfg, layer);
      detail::normalize(cfg);
      const unsigned workers = b.workers > 0 ? b.workers : default_workers();
      try {
        rep = c.run(cfg, workers);
      } catch (const QualityError& e) {
        rep.command = c.name;
        rep.error = e.what();
        rep.exit_override = kQuality;
      }
      rep.command = c.name;
      rep.config = cfg;
      if (cfg.contains("seed")) rep.seed = cfg["seed"].get<std::uint64_t>();
    } catch (const UsageError& e) {
      err << "usage error: " << e.what() << '\n';
      return kUsage;
    } catch (const DomainError& e) {
      err << "domain error: " << e.what() << '\n';
      return kUsage;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kFail;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (b.timing) rep.wall_seconds = wall;
    print_table(out, rep, wall);
    try {
      if (!b.out.empty()) {
        std::ofstream f(b.out);
        if (!f) throw UsageError("cannot open " + b.out + " for writing");
        f << to_json(rep).dump(2) << '\n';
      }
      if (!b.csv.empty() && !rep.csv.empty()) write_csv(b.csv, rep.csv);
    } catch (const UsageError& e) {
      err << "usage error: " << e.what() << '\n';
      return kUsage;
    }
    return rep.exit_code();
  }
  return kUsage;
}

}  // namespace slelab::cli
