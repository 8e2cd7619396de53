#pragma once

#include "qih/model.hpp"

#include <optional>
#include <string>

namespace qih {

/// Symmetric positive-definite stage cost weights.
struct StageWeights {
  MatrixXd Wx;
  MatrixXd Wu;

  StageWeights(MatrixXd wx, MatrixXd wu);
};

enum class Approach { kYu, kArbitraryController, kLqrInflated };

std::string to_string(Approach approach);
Approach approach_from_string(const std::string& name);

/// Tuning knobs for terminal-region synthesis. Which fields matter depends on
/// the approach: kappa for Yu, (rho_x, rho_u) for the other two.
struct TuningParams {
  Approach approach = Approach::kArbitraryController;
  double rho_x = 0.0;
  double rho_u = 0.0;
  double kappa = 0.0;
  double beta = 0.99;
  int boundary_samples = 3600;
  /// Re-derive the gain from the inflated weights (LQR approach only). The
  /// additive approaches always use the gain they are given.
  bool coupled_gain = true;
  std::optional<MatrixXd> gain_override;

  /// Static parameter checks; the kappa spectral bound is checked at solve time.
  void validate() const;
};

/// Gain/penalty pair together with the closed-loop matrix, the effective
/// stage weight and the certification margin. The defining relation is
///   A_cl' P A_cl - P = -(Q_cl + margin)
/// which every factory below establishes to residual <= 1e-10.
struct GainPenalty {
  MatrixXd K;       // stabilizing feedback gain, u = -K x
  MatrixXd P;       // terminal penalty
  MatrixXd A_cl;    // A - B K
  MatrixXd Q_cl;    // Wx + K' Wu K
  MatrixXd margin;  // positive-semidefinite certification slack
};

double spectral_radius(const MatrixXd& A);

/// Unique SPD solution of A' P A - P = -Q for Schur-stable A and SPD Q.
/// Dense Kronecker elimination up to 20 states, squared-Smith summation above.
MatrixXd solve_discrete_lyapunov(const MatrixXd& A, const MatrixXd& Q);

/// Infinite-horizon LQR gain and cost-to-go by fixed-point iteration of
///   P <- A_cl' P A_cl + Wx + K' Wu K,   K <- (Wu + B' P B)^-1 B' P A.
GainPenalty lqr_gain(const Linearization& lin, const StageWeights& weights);

/// Yu-style penalty: P solves  kappa^2 A_cl' P A_cl - P = -Q_cl  for a given
/// stabilizing gain and 1 < kappa < 1 / rho_max(A_cl).
GainPenalty penalty_yu(const Linearization& lin, const StageWeights& weights, const MatrixXd& K,
                       double kappa);

/// Additive-margin penalty: P solves  A_cl' P A_cl - P = -(Q_cl + DeltaQ)  with
/// DeltaQ = rho_x Wx + rho_u K' Wu K, which must be positive definite.
GainPenalty penalty_arbitrary_controller(const Linearization& lin, const StageWeights& weights,
                                         const MatrixXd& K, double rho_x, double rho_u);

/// Inflated-weight LQR penalty: P solves  A_cl' P A_cl - P = -(rho_x Wx + rho_u K' Wu K)
/// with rho_x >= 1, rho_u >= 1 and an implied margin
/// DeltaQ = (rho_x - 1) Wx + (rho_u - 1) K' Wu K that must be positive definite.
/// With coupled_gain the gain is re-derived from the inflated weights
/// (rho_x Wx, rho_u Wu); otherwise the supplied gain is kept.
GainPenalty penalty_lqr_inflated(const Linearization& lin, const StageWeights& weights,
                                 const MatrixXd& K, double rho_x, double rho_u,
                                 bool coupled_gain = true);

/// rho_x Wx + rho_u K' Wu K.
MatrixXd additive_margin(const StageWeights& weights, const MatrixXd& K, double rho_x,
                         double rho_u);

}  // namespace qih
