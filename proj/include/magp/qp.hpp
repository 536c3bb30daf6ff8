#ifndef MAGP_QP_HPP
#define MAGP_QP_HPP

#include "magp/common.hpp"

namespace magp::qp {

enum class QPStatus { optimal, infeasible, iteration_limit };

struct QPResult {
  Vector x;
  Vector multipliers;  // one per inequality row, zero when inactive
  QPStatus status = QPStatus::optimal;
};

/// Dense strictly convex QP:  min ½ xᵀHx + gᵀx  s.t.  A x ≤ b.
///
/// Dual active-set method (Goldfarb-Idnani). Starts from the unconstrained
/// minimizer and adds the most violated row until primal feasibility; the
/// reduced systems are refactored at every step, which is fine for the small
/// dimensions used here (tens of variables and rows). H must be symmetric
/// positive definite.
QPResult solve_dense(const Matrix& H, const Vector& g, const Matrix& A, const Vector& b,
                     double tolerance = 1e-10);

}  // namespace magp::qp

#endif  // MAGP_QP_HPP
