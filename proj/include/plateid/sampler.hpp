#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "plateid/assembly.hpp"
#include "plateid/rng.hpp"

namespace plateid {

/// Hyperpriors nu_s ~ IG(a_nu, b_nu), sigma^2 ~ IG(a_sigma, b_sigma),
/// p0 ~ Beta(a_p, b_p), plus chain layout.
struct SpikeSlabConfig {
  double a_nu = 0.5, b_nu = 0.5;
  double a_sigma = 1e-4, b_sigma = 1e-4;
  double a_p = 1.0, b_p = 1.0;
  int chains = 3;
  int chain_length = 500;
  int burn_in = 100;
  /// Coordinate sweeps of the truncated-normal update per Gibbs sweep.
  int tmvn_sweeps = 10;
  std::uint64_t seed = 0;
  /// false replaces the nonnegative slab by the untruncated Gaussian one,
  /// for which the chain has an exact closed-form target (used in tests).
  bool nonnegative = true;
  /// Run chains on separate threads. Results do not depend on this.
  bool threaded = true;

  void validate() const;
};

struct SamplerState {
  Eigen::VectorXd theta;
  std::vector<char> z;
  double sigma2 = 1.0;
  double nu = 1.0;
  double p0 = 0.5;

  int active() const;
};

/// Retained draws of all chains in chain order, with summaries over every
/// retained draw (inactive coefficients count as zero).
struct PosteriorEnsemble {
  int width = 0;
  int chains = 0;
  int per_chain = 0;
  std::vector<SamplerState> draws;
  Eigen::VectorXd theta_mean;
  Eigen::VectorXd theta_std;
  Eigen::VectorXd inclusion;

  void summarize();
  /// Coefficient draws as rows.
  Eigen::MatrixXd theta_matrix() const;
};

/// The regression data in a form that keeps every subset computation in the
/// column dimension: A = Q R, c = Q^T b and the part of |b|^2 outside the
/// column space of A.
class RegressionData {
 public:
  RegressionData(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);
  explicit RegressionData(const EquilibriumSystem& system) : RegressionData(system.A, system.b) {}

  int rows() const { return rows_; }
  int width() const { return static_cast<int>(R_.cols()); }
  const Eigen::MatrixXd& R() const { return R_; }
  const Eigen::VectorXd& c() const { return c_; }
  double outside() const { return outside_; }
  /// Least-squares solution on all columns (minimum norm when rank deficient).
  const Eigen::VectorXd& least_squares() const { return ls_; }

 private:
  int rows_ = 0;
  Eigen::MatrixXd R_;
  Eigen::VectorXd c_;
  double outside_ = 0.0;
  Eigen::VectorXd ls_;
};

/// Posterior quantities of the active block for fixed z and nu:
/// Sigma = (A_r^T A_r + I / nu)^-1, mu = Sigma A_r^T b and
/// q = b^T b - mu^T Sigma^-1 mu.
struct ActiveBlock {
  std::vector<int> index;
  Eigen::MatrixXd precision;  // Sigma^-1
  Eigen::VectorXd mu;
  double q = 0.0;
  double log_det_precision = 0.0;
};

ActiveBlock active_block(const RegressionData& data, const std::vector<char>& z, double nu);

/// log p(b | z, nu, A) with theta and sigma^2 integrated out.
double log_marginal_likelihood(const RegressionData& data, const std::vector<char>& z, double nu,
                               const SpikeSlabConfig& cfg);

/// Bernoulli parameter of z_i given the rest of the state.
double conditional_z(const RegressionData& data, int i, const SamplerState& state,
                     const SpikeSlabConfig& cfg);

/// One draw of sigma^2 ~ IG(a_sigma + N/2, b_sigma + q/2) with theta
/// integrated out.
double draw_sigma2(const RegressionData& data, const std::vector<char>& z, double nu,
                   const SpikeSlabConfig& cfg, Rng& rng);

/// Inverse-gamma and beta draws.
double draw_inverse_gamma(double shape, double rate, Rng& rng);
double draw_beta(double a, double b, Rng& rng);

/// N(mean, sd^2) restricted to [0, inf).
double draw_truncated_normal(double mean, double sd, Rng& rng);

/// Nonnegative-orthant truncated N(mu, cov) by coordinate-wise Gibbs,
/// `sweeps` sweeps from `start` (clamped to the orthant; defaults to
/// max(mu, 0)). Successive calls that pass the previous draw as the start
/// form a chain whose stationary law is the truncated normal. Throws
/// InvalidArgument above 64 dimensions and NumericalError when cov is not
/// positive definite.
Eigen::VectorXd sample_truncated_mvn(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov,
                                     Rng& rng, const std::optional<Eigen::VectorXd>& start = {},
                                     int sweeps = 10);

/// Same, parameterised by the precision matrix.
Eigen::VectorXd sample_truncated_mvn_precision(const Eigen::VectorXd& mu,
                                               const Eigen::MatrixXd& precision, Rng& rng,
                                               const Eigen::VectorXd& start, int sweeps);

/// Initial state of chain `chain`: z all ones, theta the least-squares fit
/// clamped at zero and scaled per coefficient by a factor in [0.5, 2],
/// sigma^2 the residual variance of that fit, nu = 1, p0 = 0.5.
SamplerState initial_state(const RegressionData& data, const SpikeSlabConfig& cfg, int chain);

/// One sweep z -> sigma^2 -> theta -> nu_s -> p0, in place.
void gibbs_sweep(const RegressionData& data, const SpikeSlabConfig& cfg, SamplerState& state,
                 Rng& rng);

PosteriorEnsemble gibbs_run(const RegressionData& data, const SpikeSlabConfig& cfg);
PosteriorEnsemble gibbs_run(const EquilibriumSystem& system, const SpikeSlabConfig& cfg);

}  // namespace plateid
