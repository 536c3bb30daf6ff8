#include "magp/plants.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <cmath>
#include <sstream>

namespace magp::plants {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using AD8 = Eigen::AutoDiffScalar<Eigen::Matrix<double, 8, 1>>;

enum Species { A = 0, B = 1, C = 2, E = 3, G = 4, P = 5 };

constexpr double kelvin_offset = 273.15;

// Steady-state mass balances (kg/s). The two-reaction model carries a
// trivial balance for C so both systems share the six-species layout.
template <class T>
Eigen::Matrix<T, 6, 1> residual(WilliamsOttoKinetics kinetics, const Eigen::Matrix<T, 6, 1>& x, const T& feed_b,
                                const T& temperature, const WilliamsOttoConstants& k) {
  using std::exp;
  const T inv_t = 1.0 / (temperature + kelvin_offset);
  const double fa = k.feed_rate_A;
  const double w = k.reactor_mass;
  const T f = fa + feed_b;
  Eigen::Matrix<T, 6, 1> r;
  if (kinetics == WilliamsOttoKinetics::three_reaction_plant) {
    const T k1 = k.plant_k1_preexp * exp(-k.plant_k1_activation * inv_t);
    const T k2 = k.plant_k2_preexp * exp(-k.plant_k2_activation * inv_t);
    const T k3 = k.plant_k3_preexp * exp(-k.plant_k3_activation * inv_t);
    const T r1 = k1 * x(A) * x(B) * w;
    const T r2 = k2 * x(B) * x(C) * w;
    const T r3 = k3 * x(C) * x(P) * w;
    r(A) = fa - f * x(A) - r1;
    r(B) = feed_b - f * x(B) - r1 - r2;
    r(C) = -f * x(C) + 2.0 * r1 - 2.0 * r2 - r3;
    r(E) = -f * x(E) + 2.0 * r2;
    r(G) = -f * x(G) + 1.5 * r3;
    r(P) = -f * x(P) + r2 - 0.5 * r3;
  } else {
    const T k1 = k.model_k1_preexp * exp(-k.model_k1_activation * inv_t);
    const T k2 = k.model_k2_preexp * exp(-k.model_k2_activation * inv_t);
    const T r1 = k1 * x(A) * x(B) * x(B) * w;
    const T r2 = k2 * x(A) * x(B) * x(P) * w;
    r(A) = fa - f * x(A) - r1 - r2;
    r(B) = feed_b - f * x(B) - 2.0 * r1 - r2;
    r(C) = -f * x(C);
    r(E) = -f * x(E) + 2.0 * r1;
    r(G) = -f * x(G) + 3.0 * r2;
    r(P) = -f * x(P) + r1 - r2;
  }
  return r;
}

struct Linearization {
  Vec6 value;
  Mat6 dx;
  Eigen::Matrix<double, 6, 2> du;
};

Linearization linearize(WilliamsOttoKinetics kinetics, const Vec6& x, double feed_b, double temperature,
                        const WilliamsOttoConstants& k) {
  Eigen::Matrix<AD8, 6, 1> xa;
  for (int i = 0; i < 6; ++i) xa(i) = AD8(x(i), 8, i);
  const AD8 fb(feed_b, 8, 6);
  const AD8 tr(temperature, 8, 7);
  const auto r = residual<AD8>(kinetics, xa, fb, tr, k);
  Linearization lin;
  for (int i = 0; i < 6; ++i) {
    lin.value(i) = r(i).value();
    lin.dx.row(i) = r(i).derivatives().head<6>().transpose();
    lin.du.row(i) = r(i).derivatives().tail<2>().transpose();
  }
  return lin;
}

double residual_norm(WilliamsOttoKinetics kinetics, const Vec6& x, double fb, double tr,
                     const WilliamsOttoConstants& k) {
  return residual<double>(kinetics, x, fb, tr, k).lpNorm<Eigen::Infinity>();
}

bool physical(const Vec6& x) { return (x.array() >= -1e-10).all() && (x.array() <= 1.0 + 1e-10).all(); }

// Damped Newton with backtracking on the residual norm.
bool newton(WilliamsOttoKinetics kinetics, Vec6& x, double fb, double tr, const WilliamsOttoConstants& k,
            int& iterations) {
  constexpr double tolerance = 1e-12;
  for (int it = 0; it < 100; ++it) {
    const Linearization lin = linearize(kinetics, x, fb, tr, k);
    const double norm = lin.value.lpNorm<Eigen::Infinity>();
    if (norm <= tolerance) {
      iterations += it;
      return physical(x);
    }
    const Vec6 step = lin.dx.fullPivLu().solve(-lin.value);
    if (!step.allFinite()) return false;
    double alpha = 1.0;
    bool improved = false;
    while (alpha > 1e-8) {
      const Vec6 trial = x + alpha * step;
      if (residual_norm(kinetics, trial, fb, tr, k) < norm) {
        x = trial;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) return false;
  }
  iterations += 100;
  return residual_norm(kinetics, x, fb, tr, k) <= tolerance && physical(x);
}

// Implicit-Euler pseudo-transient continuation of W dX/dt = R(X).
void continuation(WilliamsOttoKinetics kinetics, Vec6& x, double fb, double tr, const WilliamsOttoConstants& k) {
  double dt = 10.0;
  for (int step = 0; step < 200; ++step) {
    const Linearization lin = linearize(kinetics, x, fb, tr, k);
    const Mat6 lhs = (k.reactor_mass / dt) * Mat6::Identity() - lin.dx;
    const Vec6 dx = lhs.fullPivLu().solve(lin.value);
    if (!dx.allFinite()) break;
    x = (x + dx).cwiseMax(0.0).cwiseMin(1.0);
    dt *= 1.3;
  }
}

}  // namespace

WilliamsOttoSteadyState williams_otto_steady_state(WilliamsOttoKinetics kinetics, double feed_b,
                                                   double temperature_c, const WilliamsOttoConstants& k) {
  require(feed_b > 0.0, "williams-otto: feed rate of B must be positive");
  WilliamsOttoSteadyState out;
  const double f = k.feed_rate_A + feed_b;
  Vec6 guess = Vec6::Zero();
  guess(A) = k.feed_rate_A / f;
  guess(B) = feed_b / f;
  if (kinetics == WilliamsOttoKinetics::three_reaction_plant) guess(C) = 0.01;
  guess(E) = 0.01;
  guess(G) = 0.01;
  guess(P) = 0.01;

  Vec6 x = guess;
  int iterations = 0;
  bool ok = newton(kinetics, x, feed_b, temperature_c, k, iterations);
  if (!ok) {
    x = guess;
    continuation(kinetics, x, feed_b, temperature_c, k);
    out.used_continuation = true;
    ok = newton(kinetics, x, feed_b, temperature_c, k, iterations);
  }
  if (!ok) {
    std::ostringstream msg;
    msg << "williams-otto: steady-state solve failed at F_B=" << feed_b << ", T_r=" << temperature_c
        << " (residual " << residual_norm(kinetics, x, feed_b, temperature_c, k) << ")";
    throw OracleError(msg.str());
  }
  out.mass_fractions = x.cwiseMax(0.0);
  out.residual = residual<double>(kinetics, x, feed_b, temperature_c, k);
  out.newton_iterations = iterations;
  return out;
}

double WilliamsOttoFunctions::profit(double x_e, double x_p, double feed_A, double feed_B) {
  return (1043.38 * x_p + 20.92 * x_e) * (feed_A + feed_B) - 79.23 * feed_A - 118.34 * feed_B;
}

WilliamsOttoFunctions::WilliamsOttoFunctions(WilliamsOttoKinetics kinetics, WilliamsOttoConstants constants)
    : kinetics_(kinetics), constants_(std::move(constants)) {
  info_.name = "williams-otto";
  info_.lower = Vector(2);
  info_.upper = Vector(2);
  info_.lower << 4.0, 70.0;
  info_.upper << 7.0, 100.0;
  info_.input_names = {"F_B", "T_r"};
  info_.function_names = {"neg_profit", "X_A_limit", "X_G_limit"};
}

Vector WilliamsOttoFunctions::evaluate(const Vector& u, Matrix* jacobian) const {
  require(u.size() == 2, "williams-otto: expected inputs (F_B, T_r)");
  const double fb = u(0);
  const double tr = u(1);
  const auto ss = williams_otto_steady_state(kinetics_, fb, tr, constants_);
  const Vec6& x = ss.mass_fractions;
  const double fa = constants_.feed_rate_A;
  Vector g(3);
  g(0) = -profit(x(E), x(P), fa, fb);
  g(1) = x(A) - 0.12;
  g(2) = x(G) - 0.08;
  if (jacobian) {
    // Implicit function theorem: dX/du = −(∂R/∂X)⁻¹ ∂R/∂u.
    const Linearization lin = linearize(kinetics_, x, fb, tr, constants_);
    const Eigen::Matrix<double, 6, 2> dxdu = lin.dx.fullPivLu().solve(-lin.du);
    const double f = fa + fb;
    jacobian->resize(3, 2);
    Eigen::Matrix<double, 1, 2> dprofit =
        1043.38 * f * dxdu.row(P) + 20.92 * f * dxdu.row(E);
    dprofit(0) += 1043.38 * x(P) + 20.92 * x(E) - 118.34;
    jacobian->row(0) = -dprofit;
    jacobian->row(1) = dxdu.row(A);
    jacobian->row(2) = dxdu.row(G);
  }
  return g;
}

Vector WilliamsOttoFunctions::noise_std() const {
  Vector s(3);
  s << 0.5, 0.0005, 0.0005;
  return s;
}

std::shared_ptr<const Plant> williams_otto_plant() {
  return std::make_shared<WilliamsOttoFunctions>(WilliamsOttoKinetics::three_reaction_plant,
                                                 WilliamsOttoConstants::defaults());
}

std::shared_ptr<const NominalModel> williams_otto_nominal() {
  return std::make_shared<WilliamsOttoNominal>(WilliamsOttoConstants::defaults());
}

}  // namespace magp::plants
