#include "magp/plants.hpp"

#include <cmath>

namespace magp::plants {

QuadraticFunctions::QuadraticFunctions(double theta1, double theta2, double noise_variance)
    : theta1_(theta1), theta2_(theta2), noise_variance_(noise_variance) {
  info_.name = "quadratic";
  info_.lower = Vector::Constant(2, -2.0);
  info_.upper = Vector::Constant(2, 2.0);
  info_.input_names = {"u1", "u2"};
  info_.function_names = {"y1", "y2"};
}

Vector QuadraticFunctions::evaluate(const Vector& u, Matrix* jacobian) const {
  require(u.size() == 2, "quadratic: expected two inputs");
  Vector g(2);
  g(0) = u(0) * u(0) + u(1) * u(1) + theta1_ * u(0) * u(1);
  g(1) = 1.0 - u(0) + u(1) * u(1) + theta2_ * u(1);
  if (jacobian) {
    jacobian->resize(2, 2);
    *jacobian << 2.0 * u(0) + theta1_ * u(1), 2.0 * u(1) + theta1_ * u(0),
                 -1.0, 2.0 * u(1) + theta2_;
  }
  return g;
}

Vector QuadraticFunctions::noise_std() const { return Vector::Constant(2, std::sqrt(noise_variance_)); }

namespace {

class QuadraticNominal final : public NominalModel {
 public:
  QuadraticNominal() : impl_(0.0, 0.0, 0.0) {}
  const ProblemInfo& info() const override { return impl_.info(); }
  Vector evaluate(const Vector& u, Matrix* jacobian) const override { return impl_.evaluate(u, jacobian); }

 private:
  QuadraticFunctions impl_;
};

}  // namespace

std::shared_ptr<const Plant> quadratic_plant() {
  return std::make_shared<QuadraticFunctions>(1.0, 2.0, 1e-3);
}

std::shared_ptr<const NominalModel> quadratic_nominal() { return std::make_shared<QuadraticNominal>(); }

}  // namespace magp::plants
