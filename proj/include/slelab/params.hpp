#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "slelab/errors.hpp"

namespace slelab {

/**
 * @brief Coupling constants of gamma-LQG and the matching SLE parameter.
 *
 * gamma is the only stored input; everything else is derived once.
 */
class LqgParams {
 public:
  explicit LqgParams(double gamma) : gamma_(gamma) {
    if (!(gamma > 0.0 && gamma < 2.0))
      throw DomainError("gamma must lie in (0,2), got " + std::to_string(gamma));
    kappa_ = gamma * gamma;
    Q_ = 2.0 / gamma + gamma / 2.0;
    lambda_ = std::numbers::pi / gamma;
    chi_ = 2.0 / gamma - gamma / 2.0;
  }

  static LqgParams from_kappa(double kappa) {
    if (!(kappa > 0.0 && kappa < 4.0))
      throw DomainError("kappa must lie in (0,4), got " + std::to_string(kappa));
    return LqgParams(std::sqrt(kappa));
  }

  double gamma() const noexcept { return gamma_; }
  double kappa() const noexcept { return kappa_; }
  double Q() const noexcept { return Q_; }
  double lambda() const noexcept { return lambda_; }
  double chi() const noexcept { return chi_; }

 private:
  double gamma_;
  double kappa_;
  double Q_;
  double lambda_;
  double chi_;
};

inline double weight_to_beta(double W, const LqgParams& p) {
  if (!(W > 0.0)) throw DomainError("weight must be positive, got " + std::to_string(W));
  return p.gamma() + (2.0 - W) / p.gamma();
}

inline double beta_to_weight(double beta, const LqgParams& p) {
  return p.kappa() + 2.0 - p.gamma() * beta;
}

/// A boundary vertex of weight W and its insertion beta.
struct InsertionSpec {
  double W;
  double beta;
  bool thick;
};

inline InsertionSpec make_insertion(double W, const LqgParams& p) {
  return {W, weight_to_beta(W, p), W >= p.kappa() / 2.0};
}

struct TriangleWeights {
  double W[3];
  double beta[3];
  bool thick[3];
  double beta_bar;
  double reflected[3];  // beta if thick, 2Q - beta if thin
};

inline TriangleWeights make_triangle(double W1, double W2, double W3, const LqgParams& p) {
  TriangleWeights tw{};
  const double Ws[3] = {W1, W2, W3};
  tw.beta_bar = 0.0;
  for (int i = 0; i < 3; ++i) {
    const InsertionSpec s = make_insertion(Ws[i], p);
    tw.W[i] = s.W;
    tw.beta[i] = s.beta;
    tw.thick[i] = s.thick;
    tw.reflected[i] = s.thick ? s.beta : 2.0 * p.Q() - s.beta;
    tw.beta_bar += s.beta;
  }
  return tw;
}

/// Force point weights of SLE_kappa(rho_minus; rho_plus, rho_1).
struct RhoTriple {
  double minus;
  double plus;
  double one;
};

inline RhoTriple weights_to_rho(double W, double W1, double W2, const LqgParams& /*p*/) {
  if (!(W > 0.0 && W1 > 0.0 && W2 > 0.0)) throw DomainError("weights must be positive");
  return {W - 2.0, W2 - 2.0, W1 - W2};
}

inline RhoTriple beta_rho_bridge(double beta_minus, double beta1, double beta2, const LqgParams& p) {
  const double g = p.gamma();
  return {p.kappa() - g * beta_minus, p.kappa() - g * beta2, g * (beta2 - beta1)};
}

inline double alpha_exponent(double W1, double W2, double W3, const LqgParams& p) {
  return (W3 + W2 - W1 - 2.0) * (W3 + W1 + 2.0 - W2 - p.kappa()) / (4.0 * p.kappa());
}

}  // namespace slelab
