#include "magp/plants.hpp"

namespace magp::plants {

Vector Plant::measure(const Vector& u, Rng& rng) const {
  Vector g = evaluate(u);
  const Vector sigma = noise_std();
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) += sigma(i) * standard_normal(rng);
  return g;
}

Vector ZeroModel::evaluate(const Vector& u, Matrix* jacobian) const {
  require(u.size() == info_.n_u(), "zero model: input dimension mismatch");
  if (jacobian) *jacobian = Matrix::Zero(info_.n_g() + 1, info_.n_u());
  return Vector::Zero(info_.n_g() + 1);
}

Vector PlantOracle::measure(const Vector& u) {
  ++evaluations_;
  return plant_->measure(u, rng_);
}

CaseStudy make_case_study(const std::string& name, const CaseOptions& options) {
  CaseStudy cs;
  cs.name = name;
  if (name == "quadratic") {
    cs.plant = quadratic_plant();
    cs.nominal = quadratic_nominal();
    cs.initial_point = Vector(2);
    cs.initial_point << 1.5, 0.0;
    cs.unrelaxable = {1};
    cs.infeasible_shrink = 0.8;
  } else if (name == "williams-otto") {
    cs.plant = williams_otto_plant();
    cs.nominal = williams_otto_nominal();
    cs.initial_point = Vector(2);
    cs.initial_point << 6.9, 83.0;
    cs.unrelaxable = {1, 2};
    cs.infeasible_shrink = 0.8;
  } else if (name == "pbr") {
    const int s = options.pbr_stages;
    require(s >= 1, "pbr: at least one stage");
    const auto& constants = PhotobioreactorConstants::defaults();
    cs.plant = std::make_shared<PhotobioreactorFunctions>(PbrKinetics::plant, s, constants);
    cs.nominal = std::make_shared<PhotobioreactorNominal>(s, constants);
    cs.initial_point = Vector(2 * s);
    cs.initial_point.head(s).setConstant(400.0);
    cs.initial_point.tail(s).setConstant(20.0);
    for (int i = 1; i <= 2 * s + 1; ++i) cs.unrelaxable.push_back(i);
    cs.infeasible_shrink = 1.0;
    cs.kernel = gp::KernelKind::matern_3_2;
  } else {
    throw ConfigError("unknown plant '" + name + "' (expected quadratic, williams-otto or pbr)");
  }
  return cs;
}

}  // namespace magp::plants
