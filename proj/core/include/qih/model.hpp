#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace qih {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Axis-aligned box { v : lower <= v <= upper } with the origin strictly inside.
struct BoxSet {
  VectorXd lower;
  VectorXd upper;

  BoxSet(VectorXd lo, VectorXd hi);

  Eigen::Index dim() const { return lower.size(); }
  bool contains(const VectorXd& v, double tol = 0.0) const;
  VectorXd clamp(const VectorXd& v) const;
  /// Largest componentwise distance of v outside the box (0 when inside).
  double violation(const VectorXd& v) const;
};

/// Jacobian pair of the dynamics at the origin, x(k+1) ~ A x(k) + B u(k).
struct Linearization {
  MatrixXd A;
  MatrixXd B;
};

/// Discrete-time nonlinear system x(k+1) = F(x(k), u(k)) with the equilibrium
/// shifted to the origin. Immutable after construction; all methods are
/// thread-safe.
class DiscreteModel {
 public:
  using Dynamics = std::function<VectorXd(const VectorXd&, const VectorXd&)>;
  using JacobianFn = std::function<MatrixXd(const VectorXd&, const VectorXd&)>;

  DiscreteModel(std::string name, int state_dim, int input_dim, Dynamics dynamics);
  DiscreteModel(std::string name, int state_dim, int input_dim, Dynamics dynamics,
                JacobianFn dfdx, JacobianFn dfdu);

  const std::string& name() const { return name_; }
  int state_dim() const { return state_dim_; }
  int input_dim() const { return input_dim_; }
  bool has_analytic_jacobians() const { return static_cast<bool>(dfdx_); }

  VectorXd step(const VectorXd& x, const VectorXd& u) const;

  /// dF/dx at (x, u): analytic when supplied, central finite differences otherwise.
  MatrixXd state_jacobian(const VectorXd& x, const VectorXd& u) const;
  MatrixXd input_jacobian(const VectorXd& x, const VectorXd& u) const;

  /// Finite-difference Jacobians of the dynamics, independent of any analytic ones.
  MatrixXd fd_state_jacobian(const VectorXd& x, const VectorXd& u) const;
  MatrixXd fd_input_jacobian(const VectorXd& x, const VectorXd& u) const;

 private:
  std::string name_;
  int state_dim_;
  int input_dim_;
  Dynamics dynamics_;
  JacobianFn dfdx_;
  JacobianFn dfdu_;
};

/// Jacobian linearization at the origin. Throws if any entry is not finite.
Linearization linearize(const DiscreteModel& model);

/// Iterates the dynamics from x0; returns x(0..N) for N = inputs.size().
/// Throws "trajectory diverged" when a state stops being finite.
std::vector<VectorXd> simulate_open_loop(const DiscreteModel& model, const VectorXd& x0,
                                         const std::vector<VectorXd>& inputs);

/// Two-state benchmark system, forward-Euler discretization of
///   dx1/dt = x2 + u (mu0 + (1 - mu0) x1)
///   dx2/dt = x1 + u (mu0 - 4 (1 - mu0) x2)
/// with analytic Jacobians. Registered under "two_state".
DiscreteModel two_state_benchmark(double sampling_interval = 0.1, double mu0 = 0.5);

/// Same continuous-time benchmark discretized by dense fixed-step RK4 over one
/// sampling interval (numerically exact discretization for practical purposes).
/// Jacobians are the exact derivatives of the RK4 map. Registered under
/// "two_state_exact".
DiscreteModel two_state_benchmark_exact(double sampling_interval = 0.1, double mu0 = 0.5,
                                        int substeps = 20);

/// Wraps x(k+1) = A x(k) + B u(k) as a DiscreteModel with analytic Jacobians.
DiscreteModel linear_model(const MatrixXd& A, const MatrixXd& B, std::string name = "linear");

struct ModelParams {
  double sampling_interval = 0.1;
  double mu0 = 0.5;
};

/// Name-based registry used by the CLI. Custom models are added in code.
void register_model(const std::string& name,
                    std::function<DiscreteModel(const ModelParams&)> factory);
DiscreteModel make_model(const std::string& name, const ModelParams& params = {});
std::vector<std::string> registered_model_names();

}  // namespace qih
