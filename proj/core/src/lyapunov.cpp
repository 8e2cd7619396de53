#include "qih/lyapunov.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace qih {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kResidualTol = 1e-10;
constexpr double kRiccatiTol = 1e-11;
constexpr int kRiccatiMaxIter = 10000;

bool is_symmetric(const MatrixXd& m, double tol) {
  return (m - m.transpose()).lpNorm<Eigen::Infinity>() <= tol;
}

bool is_positive_definite(const MatrixXd& m) {
  if (!is_symmetric(m, 1e-9 * std::max(1.0, m.lpNorm<Eigen::Infinity>()))) {
    return false;
  }
  Eigen::LLT<MatrixXd> llt(0.5 * (m + m.transpose()));
  return llt.info() == Eigen::Success;
}

void check_weights(const MatrixXd& w, const char* name) {
  if (w.rows() != w.cols()) {
    throw std::invalid_argument(std::string(name) + " must be square");
  }
  if (!is_symmetric(w, kSymmetryTol)) {
    throw std::invalid_argument(std::string(name) + " must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(w);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument(std::string(name) + " must be positive definite");
  }
}

double lyapunov_residual(const MatrixXd& A, const MatrixXd& P, const MatrixXd& Q) {
  return (A.transpose() * P * A - P + Q).lpNorm<Eigen::Infinity>();
}

// Direct elimination of (I - kron(A', A')) vec(P) = vec(Q), with one round of
// iterative refinement to push the residual to rounding level.
MatrixXd solve_lyapunov_kron(const MatrixXd& A, const MatrixXd& Q) {
  const Eigen::Index n = A.rows();
  const MatrixXd At = A.transpose();
  MatrixXd M = MatrixXd::Identity(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      M.block(i * n, j * n, n, n) -= At(i, j) * At;
    }
  }
  Eigen::PartialPivLU<MatrixXd> lu(M);
  MatrixXd P = lu.solve(Q.reshaped().matrix()).reshaped(n, n);
  for (int pass = 0; pass < 2; ++pass) {
    const MatrixXd r = Q + At * P * A - P;
    if (r.lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(1.0, P.lpNorm<Eigen::Infinity>())) {
      break;
    }
    P += lu.solve(r.reshaped().matrix()).reshaped(n, n).eval();
  }
  return P;
}

// Squared-Smith summation of P = sum_k (A')^k Q A^k; doubles the number of
// summed terms per sweep.
MatrixXd solve_lyapunov_smith(const MatrixXd& A, const MatrixXd& Q) {
  MatrixXd P = Q;
  MatrixXd M = A;
  for (int sweep = 0; sweep < 200; ++sweep) {
    const MatrixXd update = M.transpose() * P * M;
    if (update.lpNorm<Eigen::Infinity>() <=
        1e-16 * std::max(1.0, P.lpNorm<Eigen::Infinity>())) {
      break;
    }
    P += update;
    M = (M * M).eval();
  }
  return P;
}

GainPenalty make_gain_penalty(MatrixXd K, MatrixXd P, MatrixXd A_cl, MatrixXd Q_cl,
                              MatrixXd margin) {
  GainPenalty gp{std::move(K), std::move(P), std::move(A_cl), std::move(Q_cl),
                 std::move(margin)};
  if (spectral_radius(gp.A_cl) >= 1.0) {
    throw std::runtime_error("unstable closed loop: spectral radius " +
                             std::to_string(spectral_radius(gp.A_cl)));
  }
  if (!is_positive_definite(gp.P)) {
    throw std::runtime_error("terminal penalty is not positive definite");
  }
  const double residual = lyapunov_residual(gp.A_cl, gp.P, gp.Q_cl + gp.margin);
  if (residual > kResidualTol) {
    throw std::runtime_error("Lyapunov solve failed: residual " + std::to_string(residual));
  }
  return gp;
}

}  // namespace

StageWeights::StageWeights(MatrixXd wx, MatrixXd wu) : Wx(std::move(wx)), Wu(std::move(wu)) {
  check_weights(Wx, "Wx");
  check_weights(Wu, "Wu");
}

std::string to_string(Approach approach) {
  switch (approach) {
    case Approach::kYu:
      return "yu";
    case Approach::kArbitraryController:
      return "arbitrary_controller";
    case Approach::kLqrInflated:
      return "lqr_inflated";
  }
  throw std::logic_error("unreachable");
}

Approach approach_from_string(const std::string& name) {
  if (name == "yu") return Approach::kYu;
  if (name == "arbitrary_controller") return Approach::kArbitraryController;
  if (name == "lqr_inflated") return Approach::kLqrInflated;
  throw std::invalid_argument("unknown approach '" + name + "'");
}

void TuningParams::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("beta must lie in (0, 1)");
  }
  if (boundary_samples <= 0) {
    throw std::invalid_argument("boundary_samples must be positive");
  }
  switch (approach) {
    case Approach::kYu:
      if (!(kappa > 1.0)) {
        throw std::invalid_argument("yu approach requires kappa > 1");
      }
      break;
    case Approach::kArbitraryController:
      if (rho_x < 0.0 || rho_u < 0.0 || (rho_x == 0.0 && rho_u == 0.0)) {
        throw std::invalid_argument(
            "arbitrary_controller approach requires rho_x > 0 or rho_u > 0");
      }
      break;
    case Approach::kLqrInflated:
      if (rho_x < 1.0 || rho_u < 1.0 || (rho_x == 1.0 && rho_u == 1.0)) {
        throw std::invalid_argument(
            "lqr_inflated approach requires rho_x >= 1, rho_u >= 1 with one strict");
      }
      break;
  }
}

double spectral_radius(const MatrixXd& A) {
  return A.eigenvalues().cwiseAbs().maxCoeff();
}

MatrixXd solve_discrete_lyapunov(const MatrixXd& A, const MatrixXd& Q) {
  if (A.rows() != A.cols() || Q.rows() != Q.cols() || A.rows() != Q.rows()) {
    throw std::invalid_argument("solve_discrete_lyapunov: dimension mismatch");
  }
  const double rho = spectral_radius(A);
  if (rho >= 1.0) {
    throw std::runtime_error("unstable closed loop: spectral radius " + std::to_string(rho));
  }
  MatrixXd P = A.rows() <= 20 ? solve_lyapunov_kron(A, Q) : solve_lyapunov_smith(A, Q);
  P = 0.5 * (P + P.transpose()).eval();
  const double residual = lyapunov_residual(A, P, Q);
  if (residual > kResidualTol) {
    throw std::runtime_error("Lyapunov solve failed: residual " + std::to_string(residual));
  }
  return P;
}

GainPenalty lqr_gain(const Linearization& lin, const StageWeights& weights) {
  const Eigen::Index nx = lin.A.rows();
  MatrixXd P = MatrixXd::Identity(nx, nx);
  MatrixXd K;
  for (int it = 0; it < kRiccatiMaxIter; ++it) {
    K = (weights.Wu + lin.B.transpose() * P * lin.B)
            .ldlt()
            .solve(lin.B.transpose() * P * lin.A);
    const MatrixXd A_cl = lin.A - lin.B * K;
    MatrixXd P_next = A_cl.transpose() * P * A_cl + weights.Wx +
                      K.transpose() * weights.Wu * K;
    P_next = 0.5 * (P_next + P_next.transpose()).eval();
    if (!P_next.allFinite()) {
      throw std::runtime_error("Riccati iteration failed: iterates diverged");
    }
    const double delta = (P_next - P).lpNorm<Eigen::Infinity>();
    P = std::move(P_next);
    if (delta <= kRiccatiTol) {
      const MatrixXd A_cl_final = lin.A - lin.B * K;
      const MatrixXd Q_cl = weights.Wx + K.transpose() * weights.Wu * K;
      return make_gain_penalty(K, P, A_cl_final, Q_cl, MatrixXd::Zero(nx, nx));
    }
  }
  throw std::runtime_error("Riccati iteration failed: no convergence in " +
                           std::to_string(kRiccatiMaxIter) + " iterations");
}

GainPenalty penalty_yu(const Linearization& lin, const StageWeights& weights, const MatrixXd& K,
                       double kappa) {
  const MatrixXd A_cl = lin.A - lin.B * K;
  const double rho = spectral_radius(A_cl);
  if (rho >= 1.0) {
    throw std::runtime_error("unstable closed loop: spectral radius " + std::to_string(rho));
  }
  if (!(kappa > 1.0 && kappa < 1.0 / rho)) {
    throw std::runtime_error("kappa violates spectral bound: require 1 < kappa < " +
                             std::to_string(1.0 / rho) + " (rho_max = " + std::to_string(rho) +
                             "), got " + std::to_string(kappa));
  }
  const MatrixXd Q_cl = weights.Wx + K.transpose() * weights.Wu * K;
  const MatrixXd P = solve_discrete_lyapunov(kappa * A_cl, Q_cl);
  const MatrixXd margin = (kappa * kappa - 1.0) * A_cl.transpose() * P * A_cl;
  return make_gain_penalty(K, P, A_cl, Q_cl, margin);
}

GainPenalty penalty_arbitrary_controller(const Linearization& lin, const StageWeights& weights,
                                         const MatrixXd& K, double rho_x, double rho_u) {
  const MatrixXd A_cl = lin.A - lin.B * K;
  const MatrixXd delta_q = additive_margin(weights, K, rho_x, rho_u);
  if (!is_positive_definite(delta_q)) {
    throw std::runtime_error("DeltaQ must be positive definite");
  }
  const MatrixXd Q_cl = weights.Wx + K.transpose() * weights.Wu * K;
  const MatrixXd P = solve_discrete_lyapunov(A_cl, Q_cl + delta_q);
  return make_gain_penalty(K, P, A_cl, Q_cl, delta_q);
}

GainPenalty penalty_lqr_inflated(const Linearization& lin, const StageWeights& weights,
                                 const MatrixXd& K, double rho_x, double rho_u,
                                 bool coupled_gain) {
  if (rho_x < 1.0 || rho_u < 1.0) {
    throw std::invalid_argument("penalty_lqr_inflated requires rho_x >= 1 and rho_u >= 1");
  }
  MatrixXd gain = K;
  MatrixXd P;
  if (coupled_gain) {
    // Gain and penalty solved jointly from the inflated weights; the penalty
    // is then the inflated-LQR cost-to-go.
    const StageWeights inflated(rho_x * weights.Wx, rho_u * weights.Wu);
    GainPenalty lqr = lqr_gain(lin, inflated);
    gain = lqr.K;
    P = lqr.P;
  } else {
    P = solve_discrete_lyapunov(lin.A - lin.B * gain,
                                additive_margin(weights, gain, rho_x, rho_u));
  }
  const MatrixXd delta_q = additive_margin(weights, gain, rho_x - 1.0, rho_u - 1.0);
  if (!is_positive_definite(delta_q)) {
    throw std::runtime_error("DeltaQ must be positive definite");
  }
  const MatrixXd A_cl = lin.A - lin.B * gain;
  const MatrixXd Q_cl = weights.Wx + gain.transpose() * weights.Wu * gain;
  return make_gain_penalty(gain, P, A_cl, Q_cl, delta_q);
}

MatrixXd additive_margin(const StageWeights& weights, const MatrixXd& K, double rho_x,
                         double rho_u) {
  return rho_x * weights.Wx + rho_u * K.transpose() * weights.Wu * K;
}

}  // namespace qih
