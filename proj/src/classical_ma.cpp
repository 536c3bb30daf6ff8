#include "magp/ma_gp_tr.hpp"

namespace magp::rto {

Modifiers classical_ma_step(const Modifiers& modifiers, const Vector& plant_values, const Matrix& plant_gradients,
                            const Vector& model_values, const Matrix& model_gradients, double eta) {
  require(eta > 0.0 && eta <= 1.0, "MA filter gain must lie in (0, 1]");
  require(plant_values.size() == model_values.size() && modifiers.epsilon.size() == plant_values.size(),
          "MA filter: function count mismatch");
  require(plant_gradients.rows() == model_gradients.rows() && plant_gradients.cols() == model_gradients.cols() &&
              modifiers.lambda.rows() == plant_gradients.rows() && modifiers.lambda.cols() == plant_gradients.cols(),
          "MA filter: gradient shape mismatch");
  Modifiers out;
  out.epsilon = (1.0 - eta) * modifiers.epsilon + eta * (plant_values - model_values);
  out.lambda = (1.0 - eta) * modifiers.lambda + eta * (plant_gradients - model_gradients);
  return out;
}

ClassicalMARecord run_classical_ma(plants::PlantOracle& plant, const plants::NominalModel& nominal,
                                   const Vector& u0, int iterations, double eta, double fd_step,
                                   std::uint64_t seed) {
  const auto& info = plant.plant().info();
  const Eigen::Index n = info.n_u();
  const Eigen::Index nf = info.n_g() + 1;
  require(u0.size() == n, "classical MA: initial point dimension mismatch");
  require(fd_step > 0.0, "classical MA: finite-difference step must be positive");
  const Scaling scaling(info.lower, info.upper);

  ClassicalMARecord record;
  Modifiers mod{Vector::Zero(nf), Matrix::Zero(nf, n)};
  Vector u = u0;
  for (int k = 0; k <= iterations; ++k) {
    record.iterates.push_back(u);
    record.truth.push_back(plant.truth(u));
    if (k == iterations) break;

    const Vector gp = plant.measure(u);
    Matrix grad(nf, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = fd_step * scaling.span()(j);
      Vector up = u;
      Vector dn = u;
      up(j) += h;
      dn(j) -= h;
      grad.col(j) = (plant.measure(up) - plant.measure(dn)) / (2.0 * h);
    }
    Matrix model_jac;
    const Vector gm = nominal.evaluate(u, &model_jac);
    mod = classical_ma_step(mod, gp, grad, gm, model_jac, eta);
    record.modifiers.push_back(mod);

    // Modified model in scaled inputs: Gᵢ(u) + εᵢ + λᵢᵀ(u − uᵏ).
    const Vector uk = u;
    auto modified = [&nominal, &scaling, mod, uk](Eigen::Index i, const Vector& x, Vector* g) {
      const Vector v = scaling.from_unit(x);
      Matrix jac;
      const Vector vals = nominal.evaluate(v, g ? &jac : nullptr);
      if (g) *g = ((jac.row(i) + mod.lambda.row(i)).transpose().array() * scaling.span().array()).matrix();
      return vals(i) + mod.epsilon(i) + mod.lambda.row(i).dot(v - uk);
    };
    nlp::NLPProblem problem;
    problem.lower = Vector::Zero(n);
    problem.upper = Vector::Ones(n);
    problem.objective = [modified](const Vector& x, Vector* g) { return modified(0, x, g); };
    for (Eigen::Index i = 1; i < nf; ++i) {
      problem.constraints.push_back([modified, i](const Vector& x, Vector* g) { return modified(i, x, g); });
    }
    const nlp::NLPResult r = nlp::solve(problem, 20, derive_seed(seed, 7, static_cast<std::uint64_t>(k)));
    if (r.status == nlp::NLPStatus::success) u = scaling.from_unit(r.minimizer);
  }
  record.plant_evaluations = plant.evaluations();
  return record;
}

}  // namespace magp::rto
