#include "magp/plants.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <cmath>
#include <sstream>

namespace magp::plants {

namespace {

constexpr int max_inputs = 24;
using ADVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, max_inputs, 1>;
using AD = Eigen::AutoDiffScalar<ADVec>;

constexpr double horizon_hours = 240.0;
constexpr double ratio_limit = 0.011;
constexpr double nitrate_path_limit = 800.0;
constexpr double nitrate_final_limit = 150.0;
constexpr double negative_tolerance = 1e-6;

double value_of(double v) { return v; }
double value_of(const AD& v) { return v.value(); }

// Constants carry explicit zero derivatives so that every AD operand has the
// same derivative length.
double constant_like(double v, double) { return v; }
AD constant_like(double v, const AD& like) { return AD(v, ADVec::Zero(like.derivatives().size())); }

template <class T>
struct StateT {
  T x;
  T n;
  T p;
};

template <class T>
StateT<T> rhs(const StateT<T>& s, const T& light, const T& feed, PbrKinetics kinetics,
              const PhotobioreactorConstants& c) {
  StateT<T> d;
  const T nitrate_term = s.n / (s.n + c.K_N);
  if (kinetics == PbrKinetics::plant) {
    const T light_growth = light / (light + c.k_s + light * light / c.k_i);
    const T light_product = light / (light + c.k_sq + light * light / c.k_iq);
    const T growth = c.u_m * light_growth * nitrate_term * s.x;
    d.x = growth - c.u_d * s.x;
    d.n = -c.Y_NX * growth + feed;
    d.p = c.k_m * light_product * s.x - c.k_d * s.p / (s.n + c.K_Np);
  } else {
    const T light_growth = light / (light + c.k_s);
    const T light_product = light / (light + c.k_sq);
    const T growth = c.u_m * light_growth * nitrate_term * s.x;
    d.x = growth - c.u_d * s.x;
    d.n = -c.Y_NX * growth + feed;
    d.p = c.k_m * light_product * nitrate_term * s.x - c.k_d * s.p / (s.n + c.K_Np);
  }
  return d;
}

template <class T>
StateT<T> axpy(const StateT<T>& s, double h, const StateT<T>& d) {
  return {s.x + h * d.x, s.n + h * d.n, s.p + h * d.p};
}

template <class T>
void clamp_component(T& v, const char* name, double t) {
  const double raw = value_of(v);
  if (raw >= 0.0) return;
  if (raw < -negative_tolerance) {
    std::ostringstream msg;
    msg << "photobioreactor: negative " << name << " concentration " << raw << " at t=" << t << " h";
    throw OracleError(msg.str());
  }
  v = constant_like(0.0, v);
}

template <class T>
std::vector<StateT<T>> simulate(const std::vector<T>& light, const std::vector<T>& feed, double stage_duration,
                                int steps_per_stage, PbrKinetics kinetics, const PhotobioreactorConstants& c,
                                const PbrState& initial) {
  std::vector<StateT<T>> states;
  const T& like = light.front();
  StateT<T> s{constant_like(initial.biomass, like), constant_like(initial.nitrate, like),
              constant_like(initial.product, like)};
  states.push_back(s);
  const double h = stage_duration / steps_per_stage;
  double t = 0.0;
  for (std::size_t stage = 0; stage < light.size(); ++stage) {
    const T& li = light[stage];
    const T& fi = feed[stage];
    for (int step = 0; step < steps_per_stage; ++step) {
      const StateT<T> k1 = rhs(s, li, fi, kinetics, c);
      const StateT<T> k2 = rhs(axpy(s, 0.5 * h, k1), li, fi, kinetics, c);
      const StateT<T> k3 = rhs(axpy(s, 0.5 * h, k2), li, fi, kinetics, c);
      const StateT<T> k4 = rhs(axpy(s, h, k3), li, fi, kinetics, c);
      s.x = s.x + (h / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
      s.n = s.n + (h / 6.0) * (k1.n + 2.0 * k2.n + 2.0 * k3.n + k4.n);
      s.p = s.p + (h / 6.0) * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
      t += h;
      clamp_component(s.x, "biomass", t);
      clamp_component(s.n, "nitrate", t);
      clamp_component(s.p, "product", t);
    }
    states.push_back(s);
  }
  return states;
}

template <class T>
std::vector<T> functions_from(const std::vector<StateT<T>>& states) {
  const std::size_t stages = states.size() - 1;
  std::vector<T> g(2 * stages + 2);
  g[0] = -states.back().p;
  for (std::size_t j = 1; j <= stages; ++j) {
    g[j] = states[j].p - ratio_limit * states[j].x;
    g[stages + j] = states[j].n - nitrate_path_limit;
  }
  g[2 * stages + 1] = states.back().n - nitrate_final_limit;
  return g;
}

}  // namespace

ControlParameterization ControlParameterization::from_inputs(const Vector& u, int n_stages, double horizon) {
  require(n_stages >= 1 && u.size() == 2 * n_stages, "pbr: inputs must hold light and feed per stage");
  ControlParameterization c;
  c.n_stages = n_stages;
  c.stage_duration = horizon / n_stages;
  c.light = u.head(n_stages);
  c.nitrate_feed = u.tail(n_stages);
  return c;
}

void ControlParameterization::validate() const {
  require(n_stages >= 1, "pbr: at least one stage");
  require(stage_duration > 0.0, "pbr: stage duration must be positive");
  require(light.size() == n_stages && nitrate_feed.size() == n_stages, "pbr: one control value per stage");
}

std::vector<PbrState> pbr_simulate(const ControlParameterization& controls, PbrKinetics kinetics,
                                   const PhotobioreactorConstants& constants, int steps_per_stage,
                                   PbrState initial) {
  controls.validate();
  require(steps_per_stage >= 1, "pbr: at least one RK4 step per stage");
  std::vector<double> light(controls.light.data(), controls.light.data() + controls.n_stages);
  std::vector<double> feed(controls.nitrate_feed.data(), controls.nitrate_feed.data() + controls.n_stages);
  const auto states =
      simulate<double>(light, feed, controls.stage_duration, steps_per_stage, kinetics, constants, initial);
  std::vector<PbrState> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back({s.x, s.n, s.p});
  return out;
}

Vector pbr_functions_from_states(const std::vector<PbrState>& states) {
  require(states.size() >= 2, "pbr: trajectory needs at least one stage");
  std::vector<StateT<double>> s;
  for (const auto& st : states) s.push_back({st.biomass, st.nitrate, st.product});
  const auto g = functions_from(s);
  return Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
}

PhotobioreactorFunctions::PhotobioreactorFunctions(PbrKinetics kinetics, int n_stages,
                                                   PhotobioreactorConstants constants, int steps_per_stage)
    : kinetics_(kinetics), n_stages_(n_stages), constants_(std::move(constants)), steps_per_stage_(steps_per_stage) {
  require(n_stages >= 1 && 2 * n_stages <= max_inputs, "pbr: unsupported number of stages");
  info_.name = "pbr";
  info_.lower = Vector(2 * n_stages);
  info_.upper = Vector(2 * n_stages);
  info_.lower.head(n_stages).setConstant(120.0);
  info_.upper.head(n_stages).setConstant(400.0);
  info_.lower.tail(n_stages).setConstant(0.0);
  info_.upper.tail(n_stages).setConstant(40.0);
  for (int j = 1; j <= n_stages; ++j) info_.input_names.push_back("I_" + std::to_string(j));
  for (int j = 1; j <= n_stages; ++j) info_.input_names.push_back("F_N_" + std::to_string(j));
  info_.function_names.push_back("neg_C_P_final");
  for (int j = 1; j <= n_stages; ++j) info_.function_names.push_back("ratio_" + std::to_string(j));
  for (int j = 1; j <= n_stages; ++j) info_.function_names.push_back("nitrate_" + std::to_string(j));
  info_.function_names.push_back("nitrate_final");
}

Vector PhotobioreactorFunctions::evaluate(const Vector& u, Matrix* jacobian) const {
  const auto controls = ControlParameterization::from_inputs(u, n_stages_, horizon_hours);
  if (!jacobian) {
    return pbr_functions_from_states(pbr_simulate(controls, kinetics_, constants_, steps_per_stage_));
  }
  const int n = 2 * n_stages_;
  std::vector<AD> light(static_cast<std::size_t>(n_stages_));
  std::vector<AD> feed(static_cast<std::size_t>(n_stages_));
  for (int j = 0; j < n_stages_; ++j) {
    light[static_cast<std::size_t>(j)] = AD(u(j), n, j);
    feed[static_cast<std::size_t>(j)] = AD(u(n_stages_ + j), n, n_stages_ + j);
  }
  const auto states = simulate<AD>(light, feed, controls.stage_duration, steps_per_stage_, kinetics_, constants_, {});
  const auto g = functions_from(states);
  Vector out(static_cast<Eigen::Index>(g.size()));
  jacobian->resize(out.size(), n);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const AD& gi = g[static_cast<std::size_t>(i)];
    out(i) = gi.value();
    if (gi.derivatives().size() == n) {
      jacobian->row(i) = gi.derivatives().transpose();
    } else {
      jacobian->row(i).setZero();
    }
  }
  return out;
}

Vector PhotobioreactorFunctions::measure(const Vector& u, Rng& rng) const {
  const auto controls = ControlParameterization::from_inputs(u, n_stages_, horizon_hours);
  auto states = pbr_simulate(controls, kinetics_, constants_, steps_per_stage_);
  for (std::size_t j = 1; j < states.size(); ++j) {
    states[j].biomass += sigma_biomass * standard_normal(rng);
    states[j].nitrate += sigma_nitrate * standard_normal(rng);
    states[j].product += sigma_product * standard_normal(rng);
  }
  return pbr_functions_from_states(states);
}

Vector PhotobioreactorFunctions::noise_std() const {
  Vector s(2 * n_stages_ + 2);
  s(0) = sigma_product;
  const double ratio_sigma = std::hypot(sigma_product, ratio_limit * sigma_biomass);
  s.segment(1, n_stages_).setConstant(ratio_sigma);
  s.segment(1 + n_stages_, n_stages_).setConstant(sigma_nitrate);
  s(2 * n_stages_ + 1) = sigma_nitrate;
  return s;
}

}  // namespace magp::plants
