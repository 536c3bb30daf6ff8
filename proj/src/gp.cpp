#include "magp/gp.hpp"

#include "magp/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace magp::gp {

namespace {

constexpr double sqrt3 = 1.7320508075688772935;
constexpr double jitter_initial = 1e-10;
constexpr double jitter_max = 1e-6;

// Λ-weighted squared distance.
double weighted_sq_distance(const Vector& u, const Vector& v, const Vector& lengthscales) {
  return ((u - v).array() / lengthscales.array()).square().sum();
}

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& inputs) {
  const Eigen::Index n = inputs.rows();
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = spec.magnitude * spec.magnitude;
    for (Eigen::Index j = 0; j < i; ++j) {
      K(i, j) = kernel_eval(spec, inputs.row(i).transpose(), inputs.row(j).transpose());
      K(j, i) = K(i, j);
    }
  }
  return K;
}

// Cholesky of K_f + (σν² + jitter·σn²) I with the jitter escalated ×10 from
// 1e-10 to 1e-6 until the factorization succeeds.
bool factorize(const Matrix& kernel_part, double magnitude, double noise_std, Eigen::LLT<Matrix>& llt,
               double& jitter) {
  const double sn2 = magnitude * magnitude;
  const double noise2 = noise_std * noise_std;
  for (jitter = jitter_initial; jitter <= jitter_max * 1.0000001; jitter *= 10.0) {
    Matrix K = kernel_part;
    K.diagonal().array() += noise2 + jitter * sn2;
    llt.compute(K);
    if (llt.info() != Eigen::Success) continue;
    const Vector diag = llt.matrixLLT().diagonal();
    if (diag.allFinite() && (diag.array() > 0.0).all()) return true;
  }
  return false;
}

struct LogBox {
  Vector lower;
  Vector upper;
};

struct Parameterization {
  KernelKind kind;
  Eigen::Index dim;
  bool noise_fixed;
  double fixed_noise;
  double target_scale;

  Eigen::Index size() const { return 1 + (noise_fixed ? 0 : 1) + dim; }
  Eigen::Index lengthscale_offset() const { return 1 + (noise_fixed ? 0 : 1); }

  LogBox box() const {
    LogBox b{Vector(size()), Vector(size())};
    b.lower(0) = std::log(1e-3 * target_scale);
    b.upper(0) = std::log(1e3 * target_scale);
    if (!noise_fixed) {
      b.lower(1) = std::log(1e-6 * target_scale);
      b.upper(1) = std::log(target_scale);
    }
    b.lower.tail(dim).setConstant(std::log(1e-2));
    b.upper.tail(dim).setConstant(std::log(10.0));
    return b;
  }

  GPHyperparameters decode(const Vector& theta, double mean_offset) const {
    GPHyperparameters h;
    h.mean_offset = mean_offset;
    h.kernel.kind = kind;
    h.kernel.magnitude = std::exp(theta(0));
    h.kernel.lengthscales = theta.tail(dim).array().exp();
    h.noise_fixed = noise_fixed;
    h.noise_std = noise_fixed ? fixed_noise : std::exp(theta(1));
    return h;
  }

  Vector encode(const GPHyperparameters& h) const {
    Vector theta(size());
    theta(0) = std::log(h.kernel.magnitude);
    if (!noise_fixed) theta(1) = std::log(std::max(h.noise_std, 1e-300));
    theta.tail(dim) = h.kernel.lengthscales.array().log();
    return theta;
  }
};

// Likelihood with the constant mean profiled out (generalized least squares
// estimate of c); the gradient w.r.t. the log parameters follows from the
// envelope theorem.
double profiled_nll(const Parameterization& param, const Vector& theta, const Matrix& inputs,
                    const Vector& targets, Vector* gradient, double* mean_out) {
  const GPHyperparameters h = param.decode(theta, 0.0);
  const Matrix Kf = kernel_matrix(h.kernel, inputs);
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;
  if (!factorize(Kf, h.kernel.magnitude, h.noise_std, llt, jitter)) {
    if (gradient) gradient->setZero(theta.size());
    return std::numeric_limits<double>::infinity();
  }
  const Eigen::Index n = inputs.rows();
  const Vector ones = Vector::Ones(n);
  const Vector kinv_one = llt.solve(ones);
  const Vector kinv_y = llt.solve(targets);
  const double c = kinv_one.dot(targets) / kinv_one.sum();
  if (mean_out) *mean_out = c;
  const Vector alpha = kinv_y - c * kinv_one;
  const Vector centered = targets - c * ones;
  const double logdet_half = llt.matrixLLT().diagonal().array().log().sum();
  const double value = logdet_half + 0.5 * centered.dot(alpha);

  if (gradient) {
    gradient->resize(theta.size());
    const Matrix W = llt.solve(Matrix::Identity(n, n)) - alpha * alpha.transpose();
    const double sn2 = h.kernel.magnitude * h.kernel.magnitude;
    // σn: ∂K = 2 (K_f + jitter σn² I)
    (*gradient)(0) = (W.cwiseProduct(Kf)).sum() + jitter * sn2 * W.trace();
    if (!param.noise_fixed) (*gradient)(1) = h.noise_std * h.noise_std * W.trace();
    const Eigen::Index off = param.lengthscale_offset();
    for (Eigen::Index d = 0; d < param.dim; ++d) {
      const double inv_l2 = 1.0 / (h.kernel.lengthscales(d) * h.kernel.lengthscales(d));
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
          const double delta = inputs(i, d) - inputs(j, d);
          double dk = 0.0;
          if (h.kernel.kind == KernelKind::squared_exponential) {
            dk = Kf(i, j) * delta * delta * inv_l2;
          } else {
            const double r = std::sqrt(weighted_sq_distance(inputs.row(i).transpose(),
                                                            inputs.row(j).transpose(), h.kernel.lengthscales));
            dk = 3.0 * sn2 * std::exp(-sqrt3 * r) * delta * delta * inv_l2;
          }
          acc += 2.0 * W(i, j) * dk;
        }
      }
      (*gradient)(off + d) = 0.5 * acc;
    }
  }
  return value;
}

double sample_std(const Vector& y) {
  if (y.size() < 2) return 0.0;
  const double mean = y.mean();
  return std::sqrt((y.array() - mean).square().sum() / static_cast<double>(y.size() - 1));
}

}  // namespace

const char* to_string(KernelKind kind) {
  return kind == KernelKind::squared_exponential ? "squared_exponential" : "matern_3_2";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "squared_exponential" || name == "se") return KernelKind::squared_exponential;
  if (name == "matern_3_2" || name == "matern32") return KernelKind::matern_3_2;
  throw ContractViolation("unknown kernel kind '" + name + "'");
}

void KernelSpec::validate() const {
  require(magnitude > 0.0 && std::isfinite(magnitude), "kernel magnitude must be positive");
  require(lengthscales.size() > 0, "kernel needs at least one lengthscale");
  require((lengthscales.array() > 0.0).all() && lengthscales.allFinite(), "kernel lengthscales must be positive");
}

double kernel_eval(const KernelSpec& spec, const Vector& u, const Vector& v) {
  require(u.size() == spec.lengthscales.size() && v.size() == spec.lengthscales.size(),
          "kernel_eval: input dimension does not match lengthscales");
  const double sn2 = spec.magnitude * spec.magnitude;
  const double d2 = weighted_sq_distance(u, v, spec.lengthscales);
  if (spec.kind == KernelKind::squared_exponential) return sn2 * std::exp(-0.5 * d2);
  const double r = std::sqrt(d2);
  return sn2 * (1.0 + sqrt3 * r) * std::exp(-sqrt3 * r);
}

Vector kernel_gradient(const KernelSpec& spec, const Vector& u, const Vector& v) {
  require(u.size() == spec.lengthscales.size() && v.size() == spec.lengthscales.size(),
          "kernel_gradient: input dimension does not match lengthscales");
  const Vector scaled = ((u - v).array() / spec.lengthscales.array().square()).matrix();
  const double sn2 = spec.magnitude * spec.magnitude;
  if (spec.kind == KernelKind::squared_exponential) return -kernel_eval(spec, u, v) * scaled;
  const double r = std::sqrt(weighted_sq_distance(u, v, spec.lengthscales));
  return -3.0 * sn2 * std::exp(-sqrt3 * r) * scaled;
}

double neg_log_marginal_likelihood(const GPHyperparameters& hyper, const Matrix& inputs, const Vector& targets) {
  hyper.kernel.validate();
  require(inputs.rows() >= 1, "likelihood needs at least one observation");
  require(inputs.rows() == targets.size(), "likelihood: inputs/targets size mismatch");
  require(inputs.cols() == hyper.kernel.lengthscales.size(), "likelihood: input dimension mismatch");
  const Matrix Kf = kernel_matrix(hyper.kernel, inputs);
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;
  if (!factorize(Kf, hyper.kernel.magnitude, hyper.noise_std, llt, jitter))
    throw FitFailure("kernel matrix not positive definite after jitter", hyper);
  const Vector centered = targets.array() - hyper.mean_offset;
  const Vector alpha = llt.solve(centered);
  return llt.matrixLLT().diagonal().array().log().sum() + 0.5 * centered.dot(alpha);
}

GPModel GPModel::condition(GPHyperparameters hyper, Matrix inputs, Vector targets) {
  hyper.kernel.validate();
  require(inputs.rows() >= 1, "GP needs at least one observation");
  require(inputs.rows() == targets.size(), "GP: inputs/targets size mismatch");
  require(inputs.cols() == hyper.kernel.lengthscales.size(), "GP: input dimension mismatch");
  require(hyper.noise_std >= 0.0 && std::isfinite(hyper.mean_offset), "GP: invalid hyperparameters");

  GPModel model;
  const Matrix Kf = kernel_matrix(hyper.kernel, inputs);
  Eigen::LLT<Matrix> llt;
  if (!factorize(Kf, hyper.kernel.magnitude, hyper.noise_std, llt, model.jitter_))
    throw FitFailure("kernel matrix not positive definite after jitter", hyper);
  model.factor_ = llt.matrixL();
  // The jitter only guards the factorization; refine the weights against the
  // unjittered matrix while the residual keeps shrinking.
  const Vector centered = (targets.array() - hyper.mean_offset).matrix();
  Matrix K = Kf;
  K.diagonal().array() += hyper.noise_std * hyper.noise_std;
  Vector alpha = llt.solve(centered);
  double residual = (centered - K * alpha).norm();
  for (int pass = 0; pass < 5 && residual > 0.0; ++pass) {
    const Vector candidate = alpha + llt.solve(centered - K * alpha);
    const double r = (centered - K * candidate).norm();
    if (!(r < 0.5 * residual)) break;
    alpha = candidate;
    residual = r;
  }
  model.alpha_ = alpha;
  model.hyper_ = std::move(hyper);
  model.inputs_ = std::move(inputs);
  model.targets_ = std::move(targets);
  return model;
}

Vector GPModel::cross_covariance(const Vector& u) const {
  require(u.size() == inputs_.cols(), "GP posterior: input dimension mismatch");
  Vector r(inputs_.rows());
  for (Eigen::Index i = 0; i < inputs_.rows(); ++i) r(i) = kernel_eval(hyper_.kernel, u, inputs_.row(i).transpose());
  return r;
}

Prediction GPModel::posterior(const Vector& u) const {
  const Vector r = cross_covariance(u);
  const Vector v = factor_.triangularView<Eigen::Lower>().solve(r);
  const double sn2 = hyper_.kernel.magnitude * hyper_.kernel.magnitude;
  return {hyper_.mean_offset + r.dot(alpha_), std::max(0.0, sn2 - v.squaredNorm())};
}

Vector GPModel::posterior_mean_gradient(const Vector& u) const {
  require(u.size() == inputs_.cols(), "GP gradient: input dimension mismatch");
  Vector g = Vector::Zero(u.size());
  for (Eigen::Index i = 0; i < inputs_.rows(); ++i)
    g += alpha_(i) * kernel_gradient(hyper_.kernel, u, inputs_.row(i).transpose());
  return g;
}

PredictionWithGradient GPModel::posterior_with_gradients(const Vector& u) const {
  const Vector r = cross_covariance(u);
  Matrix dr(inputs_.rows(), u.size());
  for (Eigen::Index i = 0; i < inputs_.rows(); ++i)
    dr.row(i) = kernel_gradient(hyper_.kernel, u, inputs_.row(i).transpose()).transpose();
  const Vector v = factor_.triangularView<Eigen::Lower>().solve(r);
  const Vector w = factor_.transpose().triangularView<Eigen::Upper>().solve(v);
  const double sn2 = hyper_.kernel.magnitude * hyper_.kernel.magnitude;
  PredictionWithGradient out;
  out.mean = hyper_.mean_offset + r.dot(alpha_);
  const double raw_variance = sn2 - v.squaredNorm();
  out.variance = std::max(0.0, raw_variance);
  out.mean_gradient = dr.transpose() * alpha_;
  out.variance_gradient = raw_variance > 0.0 ? Vector(-2.0 * dr.transpose() * w) : Vector::Zero(u.size());
  return out;
}

GPModel fit(const Matrix& inputs, const Vector& targets, const FitOptions& options) {
  require(inputs.rows() == targets.size(), "fit: inputs/targets size mismatch");
  require(inputs.cols() >= 1, "fit: inputs need at least one column");
  require(inputs.rows() >= 2 || (inputs.rows() >= 1 && options.noise_fixed),
          "fit: need at least two observations (one with fixed noise)");
  require(options.starts >= 1, "fit: at least one start");
  require(!options.noise_fixed || options.fixed_noise_std >= 0.0, "fit: fixed noise must be nonnegative");

  double scale = sample_std(targets);
  if (!(scale > 1e-12 * (1.0 + targets.cwiseAbs().maxCoeff()))) scale = 1.0;
  const Parameterization param{options.kernel, inputs.cols(), options.noise_fixed, options.fixed_noise_std, scale};
  const LogBox box = param.box();

  std::vector<Vector> starts;
  {
    Vector first(param.size());
    if (options.warm_start && options.warm_start->kernel.lengthscales.size() == inputs.cols() &&
        options.warm_start->kernel.magnitude > 0.0) {
      first = param.encode(*options.warm_start);
    } else {
      first(0) = std::log(scale);
      if (!param.noise_fixed) first(1) = std::log(0.1 * scale);
      first.tail(param.dim).setConstant(std::log(0.3));
    }
    starts.push_back(first.cwiseMax(box.lower).cwiseMin(box.upper));
  }
  Rng rng(options.seed);
  const int lhs = options.starts - 1;
  if (lhs > 0) {
    Matrix design(lhs, param.size());
    std::vector<int> perm(static_cast<std::size_t>(lhs));
    for (Eigen::Index d = 0; d < param.size(); ++d) {
      std::iota(perm.begin(), perm.end(), 0);
      for (int i = lhs - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[rng() % static_cast<std::uint64_t>(i + 1)]);
      for (int i = 0; i < lhs; ++i) {
        const double cell = (perm[static_cast<std::size_t>(i)] + uniform01(rng)) / lhs;
        design(i, d) = box.lower(d) + cell * (box.upper(d) - box.lower(d));
      }
    }
    for (int i = 0; i < lhs; ++i) starts.push_back(design.row(i).transpose());
  }

  nlp::NLPProblem problem;
  problem.lower = box.lower;
  problem.upper = box.upper;
  problem.objective = [&](const Vector& theta, Vector* g) {
    return profiled_nll(param, theta, inputs, targets, g, nullptr);
  };
  nlp::SolverOptions solver_options;
  solver_options.max_iterations = options.max_iterations;
  solver_options.step_tolerance = 1e-8;

  double best = std::numeric_limits<double>::infinity();
  Vector best_theta;
  for (const auto& start : starts) {
    try {
      const nlp::LocalResult local = nlp::minimize_local(problem, start, solver_options);
      if (std::isfinite(local.objective) && local.objective < best) {
        best = local.objective;
        best_theta = local.x;
      }
    } catch (const std::exception&) {
      // a start with a non-PD kernel matrix is simply skipped
    }
  }
  if (!std::isfinite(best)) throw FitFailure("no likelihood start produced a finite value", param.decode(starts.front(), targets.mean()));

  double mean = 0.0;
  profiled_nll(param, best_theta, inputs, targets, nullptr, &mean);
  return GPModel::condition(param.decode(best_theta, mean), inputs, targets);
}

}  // namespace magp::gp
