#include "qih/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace qih {

namespace {

void check_dims(const char* what, const VectorXd& v, Eigen::Index expected) {
  if (v.size() != expected) {
    throw std::invalid_argument(std::string(what) + " has size " + std::to_string(v.size()) +
                                ", expected " + std::to_string(expected));
  }
}

constexpr double kEquilibriumTol = 1e-12;
constexpr double kFdStep = 1e-6;

}  // namespace

BoxSet::BoxSet(VectorXd lo, VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) {
    throw std::invalid_argument("BoxSet: bound dimensions differ");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < 0.0 && 0.0 < upper[i])) {
      throw std::invalid_argument("BoxSet: origin must be strictly interior (coordinate " +
                                  std::to_string(i) + ")");
    }
  }
}

bool BoxSet::contains(const VectorXd& v, double tol) const {
  check_dims("BoxSet::contains argument", v, lower.size());
  return (v.array() >= lower.array() - tol).all() && (v.array() <= upper.array() + tol).all();
}

VectorXd BoxSet::clamp(const VectorXd& v) const {
  check_dims("BoxSet::clamp argument", v, lower.size());
  return v.cwiseMax(lower).cwiseMin(upper);
}

double BoxSet::violation(const VectorXd& v) const {
  check_dims("BoxSet::violation argument", v, lower.size());
  double worst = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    worst = std::max({worst, lower[i] - v[i], v[i] - upper[i]});
  }
  return worst;
}

DiscreteModel::DiscreteModel(std::string name, int state_dim, int input_dim, Dynamics dynamics)
    : name_(std::move(name)),
      state_dim_(state_dim),
      input_dim_(input_dim),
      dynamics_(std::move(dynamics)) {
  if (state_dim_ <= 0 || input_dim_ <= 0) {
    throw std::invalid_argument("DiscreteModel: dimensions must be positive");
  }
  const VectorXd residual =
      dynamics_(VectorXd::Zero(state_dim_), VectorXd::Zero(input_dim_));
  if (residual.size() != state_dim_) {
    throw std::invalid_argument("DiscreteModel: dynamics output dimension mismatch");
  }
  if (residual.lpNorm<Eigen::Infinity>() > kEquilibriumTol) {
    throw std::invalid_argument("DiscreteModel '" + name_ +
                                "': origin is not an equilibrium, |F(0,0)| = " +
                                std::to_string(residual.lpNorm<Eigen::Infinity>()));
  }
}

DiscreteModel::DiscreteModel(std::string name, int state_dim, int input_dim, Dynamics dynamics,
                             JacobianFn dfdx, JacobianFn dfdu)
    : DiscreteModel(std::move(name), state_dim, input_dim, std::move(dynamics)) {
  if (!dfdx || !dfdu) {
    throw std::invalid_argument("DiscreteModel: both Jacobians must be supplied");
  }
  dfdx_ = std::move(dfdx);
  dfdu_ = std::move(dfdu);
}

VectorXd DiscreteModel::step(const VectorXd& x, const VectorXd& u) const {
  check_dims("state", x, state_dim_);
  check_dims("input", u, input_dim_);
  return dynamics_(x, u);
}

MatrixXd DiscreteModel::state_jacobian(const VectorXd& x, const VectorXd& u) const {
  if (dfdx_) {
    return dfdx_(x, u);
  }
  return fd_state_jacobian(x, u);
}

MatrixXd DiscreteModel::input_jacobian(const VectorXd& x, const VectorXd& u) const {
  if (dfdu_) {
    return dfdu_(x, u);
  }
  return fd_input_jacobian(x, u);
}

MatrixXd DiscreteModel::fd_state_jacobian(const VectorXd& x, const VectorXd& u) const {
  MatrixXd jac(state_dim_, state_dim_);
  VectorXd xp = x, xm = x;
  for (int j = 0; j < state_dim_; ++j) {
    const double h = kFdStep * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    jac.col(j) = (dynamics_(xp, u) - dynamics_(xm, u)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return jac;
}

MatrixXd DiscreteModel::fd_input_jacobian(const VectorXd& x, const VectorXd& u) const {
  MatrixXd jac(state_dim_, input_dim_);
  VectorXd up = u, um = u;
  for (int j = 0; j < input_dim_; ++j) {
    const double h = kFdStep * std::max(1.0, std::abs(u[j]));
    up[j] = u[j] + h;
    um[j] = u[j] - h;
    jac.col(j) = (dynamics_(x, up) - dynamics_(x, um)) / (2.0 * h);
    up[j] = u[j];
    um[j] = u[j];
  }
  return jac;
}

Linearization linearize(const DiscreteModel& model) {
  const VectorXd x0 = VectorXd::Zero(model.state_dim());
  const VectorXd u0 = VectorXd::Zero(model.input_dim());
  Linearization lin{model.state_jacobian(x0, u0), model.input_jacobian(x0, u0)};
  if (!lin.A.allFinite() || !lin.B.allFinite()) {
    throw std::runtime_error("model not differentiable at origin");
  }
  return lin;
}

std::vector<VectorXd> simulate_open_loop(const DiscreteModel& model, const VectorXd& x0,
                                         const std::vector<VectorXd>& inputs) {
  if (inputs.empty()) {
    throw std::invalid_argument("simulate_open_loop: input sequence must be non-empty");
  }
  std::vector<VectorXd> states;
  states.reserve(inputs.size() + 1);
  states.push_back(x0);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    VectorXd next = model.step(states.back(), inputs[k]);
    if (!next.allFinite()) {
      throw std::runtime_error("trajectory diverged at step " + std::to_string(k));
    }
    states.push_back(std::move(next));
  }
  return states;
}

namespace {

// Continuous-time right-hand side of the two-state benchmark.
VectorXd benchmark_rhs(double mu0, const VectorXd& x, const VectorXd& u) {
  VectorXd dx(2);
  dx[0] = x[1] + u[0] * (mu0 + (1.0 - mu0) * x[0]);
  dx[1] = x[0] + u[0] * (mu0 - 4.0 * (1.0 - mu0) * x[1]);
  return dx;
}

MatrixXd benchmark_rhs_dx(double mu0, const VectorXd& /*x*/, const VectorXd& u) {
  MatrixXd jac(2, 2);
  jac(0, 0) = u[0] * (1.0 - mu0);
  jac(0, 1) = 1.0;
  jac(1, 0) = 1.0;
  jac(1, 1) = -4.0 * u[0] * (1.0 - mu0);
  return jac;
}

MatrixXd benchmark_rhs_du(double mu0, const VectorXd& x, const VectorXd& /*u*/) {
  MatrixXd jac(2, 1);
  jac(0, 0) = mu0 + (1.0 - mu0) * x[0];
  jac(1, 0) = mu0 - 4.0 * (1.0 - mu0) * x[1];
  return jac;
}

void check_benchmark_params(double T, double mu0) {
  if (!(T > 0.0)) {
    throw std::invalid_argument("two_state_benchmark: sampling interval must be positive");
  }
  if (!(mu0 > 0.0 && mu0 < 1.0)) {
    throw std::invalid_argument("two_state_benchmark: mu0 must lie in (0, 1)");
  }
}

}  // namespace

DiscreteModel two_state_benchmark(double sampling_interval, double mu0) {
  check_benchmark_params(sampling_interval, mu0);
  const double T = sampling_interval;
  auto dyn = [T, mu0](const VectorXd& x, const VectorXd& u) -> VectorXd {
    return x + T * benchmark_rhs(mu0, x, u);
  };
  auto dfdx = [T, mu0](const VectorXd& x, const VectorXd& u) -> MatrixXd {
    return MatrixXd::Identity(2, 2) + T * benchmark_rhs_dx(mu0, x, u);
  };
  auto dfdu = [T, mu0](const VectorXd& x, const VectorXd& u) -> MatrixXd {
    return T * benchmark_rhs_du(mu0, x, u);
  };
  return DiscreteModel("two_state", 2, 1, std::move(dyn), std::move(dfdx), std::move(dfdu));
}

DiscreteModel two_state_benchmark_exact(double sampling_interval, double mu0, int substeps) {
  check_benchmark_params(sampling_interval, mu0);
  if (substeps < 1) {
    throw std::invalid_argument("two_state_benchmark_exact: substeps must be >= 1");
  }
  const double h = sampling_interval / substeps;

  // One RK4 macro-step of the flow map, with exact derivatives of the map
  // propagated alongside (chain rule through the four stages).
  struct StepResult {
    VectorXd x;
    MatrixXd dx;  // d x(next) / d x
    MatrixXd du;  // d x(next) / d u
  };
  auto rk4 = [h, mu0, substeps](const VectorXd& x0, const VectorXd& u,
                                bool with_jacobians) -> StepResult {
    StepResult r{x0, MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 1)};
    for (int s = 0; s < substeps; ++s) {
      const VectorXd k1 = benchmark_rhs(mu0, r.x, u);
      const VectorXd x2 = r.x + 0.5 * h * k1;
      const VectorXd k2 = benchmark_rhs(mu0, x2, u);
      const VectorXd x3 = r.x + 0.5 * h * k2;
      const VectorXd k3 = benchmark_rhs(mu0, x3, u);
      const VectorXd x4 = r.x + h * k3;
      const VectorXd k4 = benchmark_rhs(mu0, x4, u);
      if (with_jacobians) {
        const MatrixXd a1 = benchmark_rhs_dx(mu0, r.x, u);
        const MatrixXd a2 = benchmark_rhs_dx(mu0, x2, u);
        const MatrixXd a3 = benchmark_rhs_dx(mu0, x3, u);
        const MatrixXd a4 = benchmark_rhs_dx(mu0, x4, u);
        const MatrixXd b1 = benchmark_rhs_du(mu0, r.x, u);
        const MatrixXd b2 = benchmark_rhs_du(mu0, x2, u);
        const MatrixXd b3 = benchmark_rhs_du(mu0, x3, u);
        const MatrixXd b4 = benchmark_rhs_du(mu0, x4, u);

        const MatrixXd dk1_dx = a1 * r.dx;
        const MatrixXd dk2_dx = a2 * (r.dx + 0.5 * h * dk1_dx);
        const MatrixXd dk3_dx = a3 * (r.dx + 0.5 * h * dk2_dx);
        const MatrixXd dk4_dx = a4 * (r.dx + h * dk3_dx);

        const MatrixXd dk1_du = a1 * r.du + b1;
        const MatrixXd dk2_du = a2 * (r.du + 0.5 * h * dk1_du) + b2;
        const MatrixXd dk3_du = a3 * (r.du + 0.5 * h * dk2_du) + b3;
        const MatrixXd dk4_du = a4 * (r.du + h * dk3_du) + b4;

        r.dx += (h / 6.0) * (dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx);
        r.du += (h / 6.0) * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du);
      }
      r.x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return r;
  };

  auto dyn = [rk4](const VectorXd& x, const VectorXd& u) -> VectorXd {
    return rk4(x, u, false).x;
  };
  auto dfdx = [rk4](const VectorXd& x, const VectorXd& u) -> MatrixXd {
    return rk4(x, u, true).dx;
  };
  auto dfdu = [rk4](const VectorXd& x, const VectorXd& u) -> MatrixXd {
    return rk4(x, u, true).du;
  };
  return DiscreteModel("two_state_exact", 2, 1, std::move(dyn), std::move(dfdx),
                       std::move(dfdu));
}

DiscreteModel linear_model(const MatrixXd& A, const MatrixXd& B, std::string name) {
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw std::invalid_argument("linear_model: inconsistent matrix dimensions");
  }
  const int nx = static_cast<int>(A.rows());
  const int nu = static_cast<int>(B.cols());
  auto dyn = [A, B](const VectorXd& x, const VectorXd& u) -> VectorXd { return A * x + B * u; };
  auto dfdx = [A](const VectorXd&, const VectorXd&) -> MatrixXd { return A; };
  auto dfdu = [B](const VectorXd&, const VectorXd&) -> MatrixXd { return B; };
  return DiscreteModel(std::move(name), nx, nu, std::move(dyn), std::move(dfdx),
                       std::move(dfdu));
}

namespace {

using Factory = std::function<DiscreteModel(const ModelParams&)>;

std::map<std::string, Factory>& registry() {
  static std::map<std::string, Factory> models = {
      {"two_state",
       [](const ModelParams& p) { return two_state_benchmark(p.sampling_interval, p.mu0); }},
      {"two_state_exact",
       [](const ModelParams& p) {
         return two_state_benchmark_exact(p.sampling_interval, p.mu0);
       }},
  };
  return models;
}

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

void register_model(const std::string& name, Factory factory) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  registry()[name] = std::move(factory);
}

DiscreteModel make_model(const std::string& name, const ModelParams& params) {
  Factory factory;
  {
    std::lock_guard<std::mutex> lock(registry_mutex());
    auto it = registry().find(name);
    if (it == registry().end()) {
      throw std::invalid_argument("unknown model '" + name + "'");
    }
    factory = it->second;
  }
  return factory(params);
}

std::vector<std::string> registered_model_names() {
  std::lock_guard<std::mutex> lock(registry_mutex());
  std::vector<std::string> names;
  names.reserve(registry().size());
  for (const auto& [name, _] : registry()) {
    names.push_back(name);
  }
  return names;
}

}  // namespace qih
