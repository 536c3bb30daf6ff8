#ifndef MAGP_PLANTS_HPP
#define MAGP_PLANTS_HPP

#include "magp/common.hpp"
#include "magp/gp.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace magp::plants {

/// Input box and function layout shared by a plant and its nominal model.
/// Function 0 is the cost; 1..n_g are inequality constraints (≤ 0).
struct ProblemInfo {
  std::string name;
  Vector lower;
  Vector upper;
  std::vector<std::string> input_names;
  std::vector<std::string> function_names;

  Eigen::Index n_u() const { return lower.size(); }
  Eigen::Index n_g() const { return static_cast<Eigen::Index>(function_names.size()) - 1; }
};

/// Cost and constraint values (G₀ … G_{n_g}) of a steady-state input map,
/// in unscaled input units. The Jacobian is (n_g+1) × n_u.
class ProcessFunctions {
 public:
  virtual ~ProcessFunctions() = default;
  virtual const ProblemInfo& info() const = 0;
  virtual Vector evaluate(const Vector& u, Matrix* jacobian = nullptr) const = 0;
};

/// The true process. `evaluate` is the noiseless virtual-reality value;
/// `measure` adds measurement noise drawn from the caller's stream.
class Plant : public ProcessFunctions {
 public:
  virtual Vector measure(const Vector& u, Rng& rng) const;
  /// Standard deviation of the noise on each measured Gᵢ.
  virtual Vector noise_std() const = 0;
};

class NominalModel : public ProcessFunctions {
 public:
  virtual bool is_zero() const { return false; }
};

/// Identically zero functions and gradients (model-free operation).
class ZeroModel final : public NominalModel {
 public:
  explicit ZeroModel(ProblemInfo info) : info_(std::move(info)) {}
  const ProblemInfo& info() const override { return info_; }
  Vector evaluate(const Vector& u, Matrix* jacobian = nullptr) const override;
  bool is_zero() const override { return true; }

 private:
  ProblemInfo info_;
};

/// Noisy black-box access to a plant: owns its noise stream and counts
/// evaluation batches.
class PlantOracle {
 public:
  PlantOracle(std::shared_ptr<const Plant> plant, std::uint64_t seed) : plant_(std::move(plant)), rng_(seed) {}

  Vector measure(const Vector& u);
  Vector truth(const Vector& u) const { return plant_->evaluate(u); }
  const Plant& plant() const { return *plant_; }
  int evaluations() const { return evaluations_; }

 private:
  std::shared_ptr<const Plant> plant_;
  Rng rng_;
  int evaluations_ = 0;
};

/// `name = value  # comment` lines; blank lines and full-line comments are
/// skipped.
std::map<std::string, double> parse_constants(const std::string& text);

// ---------------------------------------------------------------- quadratic

/// y₁ = u₁² + u₂² + θ₁u₁u₂ (cost), y₂ = 1 − u₁ + u₂² + θ₂u₂ (constraint) on
/// [−2,2]². Plant θ = (1,2); nominal θ = (0,0).
class QuadraticFunctions : public Plant {
 public:
  QuadraticFunctions(double theta1, double theta2, double noise_variance);
  const ProblemInfo& info() const override { return info_; }
  Vector evaluate(const Vector& u, Matrix* jacobian = nullptr) const override;
  Vector noise_std() const override;

 private:
  ProblemInfo info_;
  double theta1_;
  double theta2_;
  double noise_variance_;
};

std::shared_ptr<const Plant> quadratic_plant();
std::shared_ptr<const NominalModel> quadratic_nominal();

// ------------------------------------------------------------ Williams-Otto

struct WilliamsOttoConstants {
  double feed_rate_A;
  double reactor_mass;
  double plant_k1_preexp, plant_k1_activation;
  double plant_k2_preexp, plant_k2_activation;
  double plant_k3_preexp, plant_k3_activation;
  double model_k1_preexp, model_k1_activation;
  double model_k2_preexp, model_k2_activation;

  static WilliamsOttoConstants from_text(const std::string& text);
  static const WilliamsOttoConstants& defaults();
};

/// Steady-state outlet composition. Species order A, B, C, E, G, P; the
/// two-reaction model has no C (its fraction stays zero).
struct WilliamsOttoSteadyState {
  Eigen::Matrix<double, 6, 1> mass_fractions;
  Eigen::Matrix<double, 6, 1> residual;
  int newton_iterations = 0;
  bool used_continuation = false;
};

enum class WilliamsOttoKinetics { three_reaction_plant, two_reaction_model };

WilliamsOttoSteadyState williams_otto_steady_state(WilliamsOttoKinetics kinetics, double feed_B,
                                                   double temperature_c,
                                                   const WilliamsOttoConstants& constants);

/// G₀ = −profit, G₁ = X_A − 0.12, G₂ = X_G − 0.08 over F_B ∈ [4,7] kg/s,
/// T_r ∈ [70,100] °C.
class WilliamsOttoFunctions : public Plant {
 public:
  WilliamsOttoFunctions(WilliamsOttoKinetics kinetics, WilliamsOttoConstants constants);
  const ProblemInfo& info() const override { return info_; }
  Vector evaluate(const Vector& u, Matrix* jacobian = nullptr) const override;
  Vector noise_std() const override;

  static double profit(double x_e, double x_p, double feed_A, double feed_B);

 private:
  ProblemInfo info_;
  WilliamsOttoKinetics kinetics_;
  WilliamsOttoConstants constants_;
};

class WilliamsOttoNominal final : public NominalModel {
 public:
  explicit WilliamsOttoNominal(WilliamsOttoConstants constants)
      : impl_(WilliamsOttoKinetics::two_reaction_model, std::move(constants)) {}
  const ProblemInfo& info() const override { return impl_.info(); }
  Vector evaluate(const Vector& u, Matrix* jacobian = nullptr) const override {
    return impl_.evaluate(u, jacobian);
  }

 private:
  WilliamsOttoFunctions impl_;
};

std::shared_ptr<const Plant> williams_otto_plant();
std::shared_ptr<const NominalModel> williams_otto_nominal();

// ---------------------------------------------------------- photobioreactor

struct PhotobioreactorConstants {
  double u_m, u_d, K_N, Y_NX, k_m, k_d, k_s, k_i, k_sq, k_iq, K_Np;

  static PhotobioreactorConstants from_text(const std::string& text);
  static const PhotobioreactorConstants& defaults();
};

enum class PbrKinetics { plant, nominal };

/// Piecewise-constant light intensity and nitrate inflow over equal stages.
struct ControlParameterization {
  int n_stages = 6;
  double stage_duration = 40.0;  // h
  Vector light;                  // µE m⁻² s⁻¹, one per stage, [120, 400]
  Vector nitrate_feed;           // mg L⁻¹ h⁻¹, one per stage, [0, 40]

  /// Inputs ordered (I₁…I_S, F₁…F_S).
  static ControlParameterization from_inputs(const Vector& u, int n_stages, double horizon = 240.0);
  void validate() const;
};

struct PbrState {
  double biomass = 1.0;     // C_X, g/L
  double nitrate = 150.0;   // C_N, mg/L
  double product = 0.0;     // C_P, mg/L
};

/// States at t = 0 and at the end of every stage (n_stages + 1 entries).
std::vector<PbrState> pbr_simulate(const ControlParameterization& controls, PbrKinetics kinetics,
                                   const PhotobioreactorConstants& constants, int steps_per_stage = 25,
                                   PbrState initial = {});

/// (G₀, ratio constraints, nitrate path constraints, terminal nitrate) from a
/// trajectory: G₀ = −C_P(T), C_P − 0.011 C_X ≤ 0 and C_N − 800 ≤ 0 at each
/// stage end, C_N(T) − 150 ≤ 0.
Vector pbr_functions_from_states(const std::vector<PbrState>& states);

/// Batch-to-batch photobioreactor problem with n_stages piecewise-constant
/// stages over 240 h: 2·n_stages inputs, 2·n_stages + 1 constraints.
class PhotobioreactorFunctions : public Plant {
 public:
  PhotobioreactorFunctions(PbrKinetics kinetics, int n_stages, PhotobioreactorConstants constants,
                           int steps_per_stage = 25);
  const ProblemInfo& info() const override { return info_; }
  Vector evaluate(const Vector& u, Matrix* jacobian = nullptr) const override;
  Vector measure(const Vector& u, Rng& rng) const override;
  Vector noise_std() const override;

  static constexpr double sigma_biomass = 0.02;
  static constexpr double sigma_nitrate = 0.316;
  static constexpr double sigma_product = 0.0001;

 private:
  ProblemInfo info_;
  PbrKinetics kinetics_;
  int n_stages_;
  PhotobioreactorConstants constants_;
  int steps_per_stage_;
};

class PhotobioreactorNominal final : public NominalModel {
 public:
  PhotobioreactorNominal(int n_stages, PhotobioreactorConstants constants)
      : impl_(PbrKinetics::nominal, n_stages, std::move(constants)) {}
  const ProblemInfo& info() const override { return impl_.info(); }
  Vector evaluate(const Vector& u, Matrix* jacobian = nullptr) const override {
    return impl_.evaluate(u, jacobian);
  }

 private:
  PhotobioreactorFunctions impl_;
};

// ------------------------------------------------------------- case studies

/// A plant, its nominal model, and the default run setup for the benchmark.
struct CaseStudy {
  std::string name;
  std::shared_ptr<const Plant> plant;
  std::shared_ptr<const NominalModel> nominal;
  Vector initial_point;          // unscaled
  double initial_radius = 0.2;   // scaled units
  std::vector<int> unrelaxable;  // constraint indices in 1..n_g
  double infeasible_shrink = 0.8;
  gp::KernelKind kernel = gp::KernelKind::squared_exponential;
};

struct CaseOptions {
  int pbr_stages = 6;
};

/// `quadratic`, `williams-otto` or `pbr`.
CaseStudy make_case_study(const std::string& name, const CaseOptions& options = {});

}  // namespace magp::plants

#endif  // MAGP_PLANTS_HPP
