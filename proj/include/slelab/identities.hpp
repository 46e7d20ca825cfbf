#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slelab/errors.hpp"
#include "slelab/exact.hpp"
#include "slelab/rng.hpp"
#include "slelab/specfun.hpp"

namespace slelab {

struct IdentityRow {
  std::string identity;
  std::string grid_point;
  double residual = 0.0;
  double threshold = 0.0;
};

struct IdentitySummary {
  std::string identity;
  std::size_t points = 0;
  double max_residual = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct IdentityReport {
  std::vector<IdentityRow> rows;
  std::vector<IdentitySummary> summary;
  bool pass = false;
};

struct IdentityOptions {
  std::size_t grid_size = 20;  // admissible points per parameter identity
  std::size_t z_points = 50;   // z-points per b for the double gamma checks
  double perturb = 0.0;        // relative error injected into one double gamma value
};

namespace detail {

inline std::string fmt_point(std::initializer_list<std::pair<const char*, double>> kv) {
  std::string s;
  char buf[64];
  for (const auto& [k, v] : kv) {
    std::snprintf(buf, sizeof buf, "%s%s=%.6g", s.empty() ? "" : ";", k, v);
    s += buf;
  }
  return s;
}

// Deterministic uniform draws for the parameter grids.
class GridDraw {
 public:
  explicit GridDraw(std::uint64_t tag) : state_(tag) {}
  double operator()(double lo, double hi) {
    state_ += 0x9e3779b97f4a7c15ULL;
    const double u = double(splitmix64(state_) >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

 private:
  std::uint64_t state_;
};

// Draws candidates until `count` of them produce a finite residual.
inline void fill_grid(IdentityReport& rep, const std::string& name, double threshold,
                      std::size_t count, std::uint64_t tag,
                      const std::function<std::optional<std::pair<std::string, double>>(GridDraw&)>& f) {
  GridDraw draw(tag);
  std::size_t found = 0, tries = 0;
  while (found < count) {
    if (++tries > 500 * count)
      throw DomainError("could not find enough admissible points for " + name);
    std::optional<std::pair<std::string, double>> r;
    try {
      r = f(draw);
    } catch (const DomainError&) {
      continue;
    }
    if (!r || !std::isfinite(r->second)) continue;
    rep.rows.push_back({name, r->first, r->second, threshold});
    ++found;
  }
}

inline double rel_exp_residual(double log_ratio) { return std::abs(std::expm1(log_ratio)); }

}  // namespace detail

/// The analytic identity suite: double gamma functional equations and the
/// identities between the closed-form moments and structure constants.
inline IdentityReport run_identity_suite(const IdentityOptions& o = {}) {
  IdentityReport rep;
  const double bs[4] = {0.5, 0.8, 1.0, 1.41};
  const double kHalfLog2Pi = 0.5 * std::log(2.0 * M_PI);
  bool perturbed = false;
  const std::size_t nz = std::max<std::size_t>(o.z_points, 2);

  for (double b : bs) {
    const DoubleGamma G(b), Ginv(1.0 / b);
    for (std::size_t j = 0; j < nz; ++j) {
      const double z = 0.1 + 4.9 * double(j) / double(nz - 1);
      double l0 = G.log_value(z).log_abs;
      if (!perturbed && o.perturb != 0.0) {
        l0 += std::log1p(o.perturb);
        perturbed = true;
      }
      const double l1 = G.log_value(z + b).log_abs;
      const double l2 = G.log_value(z + 1.0 / b).log_abs;
      const double rhs1 = kHalfLog2Pi + (b * z - 0.5) * std::log(b) - log_gamma(b * z).log_abs;
      const double rhs2 = kHalfLog2Pi - (z / b - 0.5) * std::log(b) - log_gamma(z / b).log_abs;
      const std::string pt = detail::fmt_point({{"b", b}, {"z", z}});
      rep.rows.push_back({"gamma_b_shift_b", pt, detail::rel_exp_residual(l1 - l0 - rhs1), 1e-9});
      rep.rows.push_back({"gamma_b_shift_inv_b", pt, detail::rel_exp_residual(l2 - l0 - rhs2), 1e-9});
      rep.rows.push_back({"gamma_b_symmetry", pt,
                          detail::rel_exp_residual(l0 - Ginv.log_value(z).log_abs), 1e-9});
    }
    rep.rows.push_back({"gamma_b_half_Q", detail::fmt_point({{"b", b}}),
                        detail::rel_exp_residual(G.log_value(0.5 * G.Q()).log_abs), 1e-10});
  }

  const std::size_t n = o.grid_size;
  using Out = std::optional<std::pair<std::string, double>>;

  detail::fill_grid(rep, "r_bar_reflection", 1e-8, n, 101, [](detail::GridDraw& d) -> Out {
    const LqgParams p(d(0.6, 1.8));
    const double beta = d(0.1, p.Q() + 1.0);
    return Out{{detail::fmt_point({{"gamma", p.gamma()}, {"beta", beta}}),
                r_bar_reflection_residual(beta, p)}};
  });

  detail::fill_grid(rep, "h_bar_reflection", 1e-6, n, 202, [](detail::GridDraw& d) -> Out {
    const LqgParams p(d(0.6, 1.6));
    const double Q = p.Q();
    const double b1 = d(0.2, Q), b2 = d(0.2, Q), b3 = d(0.2, Q);
    if (h_bar(b1, b2, b3, p).value == 0.0 || h_bar(b1, 2.0 * Q - b2, b3, p).value == 0.0)
      return std::nullopt;
    return Out{{detail::fmt_point({{"gamma", p.gamma()}, {"beta1", b1}, {"beta2", b2}, {"beta3", b3}}),
                h_bar_reflection_residual(b1, b2, b3, p)}};
  });

  // beta_- shift relations and their composition
  std::vector<std::array<double, 6>> shift_pts;
  detail::fill_grid(rep, "m_shift_a", 1e-6, n, 303, [&](detail::GridDraw& d) -> Out {
    const LqgParams p(d(0.8, 1.6));
    const double bm = d(0.6, 2.0), b1 = d(0.5, 1.6), b2 = d(0.5, 1.6), a = d(-0.8, 0.4),
                 bt = d(0.4, 1.6);
    const ShiftResiduals r = shift_relation_residuals(bm, b1, b2, a, p, bt);
    if (!std::isfinite(r.shift_a)) return std::nullopt;
    shift_pts.push_back({p.gamma(), bm, b1, b2, a, bt});
    return Out{{detail::fmt_point({{"gamma", p.gamma()}, {"beta_minus", bm}, {"beta1", b1},
                                   {"beta2", b2}, {"alpha", a}, {"beta_tilde", bt}}),
                r.shift_a}};
  });
  for (const auto& s : shift_pts) {
    const LqgParams p(s[0]);
    const ShiftResiduals r = shift_relation_residuals(s[1], s[2], s[3], s[4], p, s[5]);
    const std::string pt = detail::fmt_point({{"gamma", s[0]}, {"beta_minus", s[1]}, {"beta1", s[2]},
                                              {"beta2", s[3]}, {"alpha", s[4]}, {"beta_tilde", s[5]}});
    rep.rows.push_back({"m_shift_b", pt, r.shift_b, 1e-6});
    rep.rows.push_back({"m_multiplicative", pt, r.multiplicative, 1e-6});
  }

  auto draw_sle = [](detail::GridDraw& d) {
    const double kappa = d(0.5, 3.5), rm = d(-1.0, 2.0), rp = d(-1.0, 2.0), r1 = d(-1.0, 2.0);
    const double a0 = alpha_threshold(kappa, rp, r1);
    const double alpha = d(-1.0, std::min(a0 - 0.1, 1.0));
    return make_radius_query(kappa, rm, rp, r1, alpha);
  };
  auto sle_point = [](const RadiusMomentQuery& q) {
    return detail::fmt_point({{"kappa", q.kappa}, {"rho_minus", q.rho_minus}, {"rho_plus", q.rho_plus},
                              {"rho1", q.rho_1}, {"alpha", q.alpha}});
  };

  detail::fill_grid(rep, "two_root_invariance", 1e-8, n, 404, [&](detail::GridDraw& d) -> Out {
    const RadiusMomentQuery q = draw_sle(d);
    if (q.beta_roots.complex) return std::nullopt;
    return Out{{sle_point(q), two_root_residual(q)}};
  });

  detail::fill_grid(rep, "reversal_consistency", 1e-6, n, 505, [&](detail::GridDraw& d) -> Out {
    const RadiusMomentQuery q = draw_sle(d);
    return Out{{sle_point(q),
                reversal_consistency_residual(q.kappa, q.rho_minus, q.rho_plus, q.rho_1, q.alpha)}};
  });

  detail::fill_grid(rep, "m_alpha_zero", 1e-10, n, 606, [&](detail::GridDraw& d) -> Out {
    RadiusMomentQuery q = draw_sle(d);
    q.alpha = 0.0;
    q.beta_roots = alpha_to_beta_roots(0.0, q.kappa, q.rho_1);
    const double r0 = std::abs(detail::radius_moment_formula(q, 0).value - 1.0);
    const double r1 = std::abs(detail::radius_moment_formula(q, 1).value - 1.0);
    return Out{{sle_point(q), std::max(r0, r1)}};
  });

  detail::fill_grid(rep, "m_gamma_closed_form", 1e-8, n, 707, [](detail::GridDraw& d) -> Out {
    const LqgParams p(d(0.8, 1.6));
    const double b1 = d(0.3, p.Q()), b2 = d(0.3, p.Q()), a = d(-1.0, 0.5);
    const ExactValue m = m_beta(p.gamma(), b1, b2, a, p);
    if (m.infinite) return std::nullopt;
    return Out{{detail::fmt_point({{"gamma", p.gamma()}, {"beta1", b1}, {"beta2", b2}, {"alpha", a}}),
                std::abs(m_gamma_closed_form(b1, b2, a, p) / m.value - 1.0)}};
  });

  detail::fill_grid(rep, "m_Q_closed_form", 1e-8, n, 808, [](detail::GridDraw& d) -> Out {
    const LqgParams p(d(0.8, 1.6));
    const double b1 = d(0.3, p.Q()), b2 = d(0.3, p.Q()), a = d(-1.0, 0.5);
    const ExactValue m = m_beta(p.Q(), b1, b2, a, p);
    if (m.infinite) return std::nullopt;
    return Out{{detail::fmt_point({{"gamma", p.gamma()}, {"beta1", b1}, {"beta2", b2}, {"alpha", a}}),
                std::abs(m_Q_closed_form(b1, b2, a, p) / m.value - 1.0)}};
  });

  std::map<std::string, std::size_t> index;
  for (const auto& r : rep.rows) {
    auto it = index.find(r.identity);
    if (it == index.end()) {
      index[r.identity] = rep.summary.size();
      rep.summary.push_back({r.identity, 0, 0.0, r.threshold, true});
      it = index.find(r.identity);
    }
    IdentitySummary& s = rep.summary[it->second];
    ++s.points;
    s.max_residual = std::max(s.max_residual, r.residual);
    s.pass = s.max_residual < s.threshold;
  }
  rep.pass = true;
  for (const auto& s : rep.summary) rep.pass = rep.pass && s.pass;
  return rep;
}

}  // namespace slelab
