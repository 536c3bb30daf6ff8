#include "magp/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace magp::qp {

QPResult solve_dense(const Matrix& H, const Vector& g, const Matrix& A, const Vector& b,
                     double tolerance) {
  const Eigen::Index n = H.rows();
  const Eigen::Index m = A.rows();
  require(H.cols() == n && g.size() == n, "qp: Hessian/gradient dimension mismatch");
  require(A.cols() == n && b.size() == m, "qp: constraint dimension mismatch");

  Eigen::LLT<Matrix> hfact(H);
  if (hfact.info() != Eigen::Success) throw ContractViolation("qp: Hessian is not positive definite");
  const Matrix Hinv = hfact.solve(Matrix::Identity(n, n));

  QPResult result;
  result.x = -hfact.solve(g);
  result.multipliers = Vector::Zero(m);
  if (m == 0) return result;

  std::vector<Eigen::Index> active;
  std::vector<double> u;  // multipliers of active rows
  const double inf = std::numeric_limits<double>::infinity();
  const Eigen::Index max_outer = 20 * (n + m) + 50;

  auto row_scale = [&](Eigen::Index i) { return std::max(1.0, A.row(i).norm()); };

  for (Eigen::Index outer = 0; outer < max_outer; ++outer) {
    Eigen::Index p = -1;
    double worst = tolerance;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(active.begin(), active.end(), i) != active.end()) continue;
      const double viol = (A.row(i).dot(result.x) - b(i)) / row_scale(i);
      if (viol > worst) {
        worst = viol;
        p = i;
      }
    }
    if (p < 0) {
      for (std::size_t j = 0; j < active.size(); ++j) result.multipliers(active[j]) = u[j];
      return result;
    }

    const Vector ap = A.row(p).transpose();
    double up = 0.0;
    for (int inner = 0; inner < 4 * (n + m) + 10; ++inner) {
      const auto k = static_cast<Eigen::Index>(active.size());
      Vector z = Hinv * ap;
      Vector r = Vector::Zero(k);
      if (k > 0) {
        Matrix N(k, n);
        for (Eigen::Index j = 0; j < k; ++j) N.row(j) = A.row(active[j]);
        const Matrix HinvNt = Hinv * N.transpose();
        const Matrix S = N * HinvNt;
        r = S.ldlt().solve(N * (Hinv * ap));
        z -= HinvNt * r;
      }
      const double curvature = ap.dot(z);
      const double slack = ap.dot(result.x) - b(p);  // > 0 while violated

      double t1 = inf;
      Eigen::Index drop = -1;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (r(j) > 1e-14) {
          const double ratio = u[j] / r(j);
          if (ratio < t1) {
            t1 = ratio;
            drop = j;
          }
        }
      }
      const bool z_zero = curvature <= 1e-14 * std::max(1.0, ap.squaredNorm());
      const double t2 = z_zero ? inf : std::max(0.0, slack) / curvature;
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        result.status = QPStatus::infeasible;
        return result;
      }
      if (!z_zero) result.x -= t * z;
      for (Eigen::Index j = 0; j < k; ++j) u[j] -= t * r(j);
      up += t;
      if (!z_zero && t == t2) {
        active.push_back(p);
        u.push_back(up);
        break;
      }
      active.erase(active.begin() + drop);
      u.erase(u.begin() + drop);
    }
  }
  result.status = QPStatus::iteration_limit;
  for (std::size_t j = 0; j < active.size(); ++j) result.multipliers(active[j]) = u[j];
  return result;
}

}  // namespace magp::qp
