#include "plateid/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

#include "plateid/error.hpp"

namespace plateid {

namespace {

constexpr int kMaxDimension = 64;

double logistic_of_negative(double log_odds_against) {
  // 1 / (1 + exp(t)) without overflow.
  if (log_odds_against > 0.0) {
    const double e = std::exp(-log_odds_against);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(log_odds_against));
}

}  // namespace

void SpikeSlabConfig::validate() const {
  const std::pair<const char*, double> hyper[] = {{"a_nu", a_nu},       {"b_nu", b_nu},
                                                  {"a_sigma", a_sigma}, {"b_sigma", b_sigma},
                                                  {"a_p", a_p},         {"b_p", b_p}};
  for (const auto& [name, v] : hyper)
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(std::string("sampler.") + name + " must be positive and finite");
  if (chains < 1) throw ConfigError("sampler.chains must be at least 1");
  if (burn_in < 0) throw ConfigError("sampler.burn_in must be non-negative");
  if (chain_length <= burn_in)
    throw ConfigError("sampler.chain_length must exceed sampler.burn_in");
  if (tmvn_sweeps < 1) throw ConfigError("sampler.tmvn_sweeps must be at least 1");
}

int SamplerState::active() const { return static_cast<int>(std::count(z.begin(), z.end(), 1)); }

void PosteriorEnsemble::summarize() {
  theta_mean = Eigen::VectorXd::Zero(width);
  theta_std = Eigen::VectorXd::Zero(width);
  inclusion = Eigen::VectorXd::Zero(width);
  if (draws.empty()) return;
  const double n = static_cast<double>(draws.size());
  for (const auto& d : draws) {
    theta_mean += d.theta;
    for (int i = 0; i < width; ++i) inclusion[i] += d.z[static_cast<std::size_t>(i)];
  }
  theta_mean /= n;
  inclusion /= n;
  for (const auto& d : draws) theta_std += (d.theta - theta_mean).cwiseAbs2();
  theta_std = (theta_std / n).cwiseSqrt();
}

Eigen::MatrixXd PosteriorEnsemble::theta_matrix() const {
  Eigen::MatrixXd M(static_cast<Eigen::Index>(draws.size()), width);
  for (std::size_t k = 0; k < draws.size(); ++k)
    M.row(static_cast<Eigen::Index>(k)) = draws[k].theta.transpose();
  return M;
}

RegressionData::RegressionData(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  if (A.rows() != b.size()) throw InvalidArgument("regression matrix and rhs differ in rows");
  if (A.rows() == 0 || A.cols() == 0) throw InvalidArgument("empty regression system");
  if (A.cols() > kMaxDimension) {
    throw InvalidArgument("regression width " + std::to_string(A.cols()) +
                          " exceeds the supported maximum of " + std::to_string(kMaxDimension));
  }
  if (!A.allFinite() || !b.allFinite()) throw NumericalError("regression data is not finite");
  rows_ = static_cast<int>(A.rows());
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::Index k = std::min(A.rows(), A.cols());
  R_ = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Eigen::VectorXd qtb = qr.householderQ().adjoint() * b;
  c_ = qtb.head(k);
  outside_ = qtb.tail(A.rows() - k).squaredNorm();
  ls_ = A.completeOrthogonalDecomposition().solve(b);
}

ActiveBlock active_block(const RegressionData& data, const std::vector<char>& z, double nu) {
  if (static_cast<int>(z.size()) != data.width()) throw InvalidArgument("z has the wrong width");
  if (!(nu > 0.0)) throw InvalidArgument("slab variance ratio nu must be positive");
  ActiveBlock blk;
  for (int i = 0; i < data.width(); ++i)
    if (z[static_cast<std::size_t>(i)]) blk.index.push_back(i);
  const Eigen::MatrixXd B = data.R()(Eigen::all, blk.index);
  const auto s = static_cast<Eigen::Index>(blk.index.size());
  blk.precision = B.transpose() * B;
  blk.precision.diagonal().array() += 1.0 / nu;
  if (s == 0) {
    blk.mu.resize(0);
    blk.q = data.outside() + data.c().squaredNorm();
    return blk;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(blk.precision);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("A_r^T A_r + I/nu is not positive definite (active set of " +
                         std::to_string(s) + ", nu = " + std::to_string(nu) + ")");
  }
  blk.mu = llt.solve(B.transpose() * data.c());
  // b^T b - mu^T Sigma^-1 mu, written as a sum of squares.
  blk.q = data.outside() + (data.c() - B * blk.mu).squaredNorm() + blk.mu.squaredNorm() / nu;
  blk.log_det_precision = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return blk;
}

double log_marginal_likelihood(const RegressionData& data, const std::vector<char>& z, double nu,
                               const SpikeSlabConfig& cfg) {
  const ActiveBlock blk = active_block(data, z, nu);
  const double n = data.rows();
  const double s = static_cast<double>(blk.index.size());
  const double shape = cfg.a_sigma + 0.5 * n;
  return std::lgamma(shape) + cfg.a_sigma * std::log(cfg.b_sigma) -
         0.5 * n * std::log(2.0 * M_PI) - std::lgamma(cfg.a_sigma) - 0.5 * s * std::log(nu) -
         0.5 * blk.log_det_precision - shape * std::log(cfg.b_sigma + 0.5 * blk.q);
}

double conditional_z(const RegressionData& data, int i, const SamplerState& state,
                     const SpikeSlabConfig& cfg) {
  if (i < 0 || i >= data.width()) throw InvalidArgument("feature index out of range");
  if (state.p0 <= 0.0) return 0.0;
  if (state.p0 >= 1.0) return 1.0;
  std::vector<char> z = state.z;
  z[static_cast<std::size_t>(i)] = 0;
  const double l0 = log_marginal_likelihood(data, z, state.nu, cfg);
  z[static_cast<std::size_t>(i)] = 1;
  const double l1 = log_marginal_likelihood(data, z, state.nu, cfg);
  return logistic_of_negative(std::log1p(-state.p0) - std::log(state.p0) + l0 - l1);
}

double draw_inverse_gamma(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> g(shape, 1.0);
  double x = g(rng);
  // A shape near zero can underflow the gamma draw.
  if (!(x > 0.0)) x = std::numeric_limits<double>::min();
  return rate / x;
}

double draw_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng), y = gb(rng);
  if (x + y <= 0.0) return a / (a + b);
  return x / (x + y);
}

double draw_sigma2(const RegressionData& data, const std::vector<char>& z, double nu,
                   const SpikeSlabConfig& cfg, Rng& rng) {
  const ActiveBlock blk = active_block(data, z, nu);
  return draw_inverse_gamma(cfg.a_sigma + 0.5 * data.rows(), cfg.b_sigma + 0.5 * blk.q, rng);
}

double draw_truncated_normal(double mean, double sd, Rng& rng) {
  if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean))
    throw NumericalError("truncated normal needs a finite mean and positive finite sd");
  const double alpha = -mean / sd;
  double z;
  if (alpha < 0.45) {
    std::normal_distribution<double> nd;
    do {
      z = nd(rng);
    } while (z < alpha);
  } else {
    // Robert (1995): translated exponential proposal with the optimal rate.
    std::uniform_real_distribution<double> ud;
    const double rate = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
    while (true) {
      z = alpha - std::log1p(-ud(rng)) / rate;
      if (ud(rng) <= std::exp(-0.5 * (z - rate) * (z - rate))) break;
    }
  }
  const double x = mean + sd * z;
  // z >= alpha gives x >= 0; keep the draw strictly inside the support so
  // that an active coefficient is never an exact zero.
  return x > 0.0 ? x : std::numeric_limits<double>::denorm_min();
}

Eigen::VectorXd sample_truncated_mvn_precision(const Eigen::VectorXd& mu,
                                               const Eigen::MatrixXd& precision, Rng& rng,
                                               const Eigen::VectorXd& start, int sweeps) {
  const Eigen::Index d = mu.size();
  Eigen::VectorXd x = start.cwiseMax(0.0);
  for (int s = 0; s < sweeps; ++s) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double pii = precision(i, i);
      const double off = precision.row(i).dot(x - mu) - pii * (x[i] - mu[i]);
      x[i] = draw_truncated_normal(mu[i] - off / pii, 1.0 / std::sqrt(pii), rng);
    }
  }
  return x;
}

Eigen::VectorXd sample_truncated_mvn(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov,
                                     Rng& rng, const std::optional<Eigen::VectorXd>& start,
                                     int sweeps) {
  const Eigen::Index d = mu.size();
  if (d > kMaxDimension) {
    throw InvalidArgument("truncated normal of dimension " + std::to_string(d) +
                          " exceeds the supported maximum of " + std::to_string(kMaxDimension));
  }
  if (cov.rows() != d || cov.cols() != d) throw InvalidArgument("covariance has the wrong shape");
  if (start && start->size() != d) throw InvalidArgument("start point has the wrong size");
  if (sweeps < 1) throw InvalidArgument("at least one sweep is required");
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  const Eigen::MatrixXd precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
  return sample_truncated_mvn_precision(mu, precision, rng, start ? *start : mu.cwiseMax(0.0),
                                        sweeps);
}

SamplerState initial_state(const RegressionData& data, const SpikeSlabConfig& cfg, int chain) {
  Rng rng = make_rng(cfg.seed, "chain-init", static_cast<std::uint64_t>(chain));
  std::uniform_real_distribution<double> scale(0.5, 2.0);
  SamplerState st;
  st.theta = data.least_squares().cwiseMax(0.0);
  for (Eigen::Index i = 0; i < st.theta.size(); ++i) st.theta[i] *= scale(rng);
  st.z.assign(static_cast<std::size_t>(data.width()), 1);
  const double rss = data.outside() + (data.c() - data.R() * st.theta).squaredNorm();
  st.sigma2 = std::max(rss / data.rows(), std::numeric_limits<double>::min());
  st.nu = 1.0;
  st.p0 = 0.5;
  return st;
}

void gibbs_sweep(const RegressionData& data, const SpikeSlabConfig& cfg, SamplerState& state,
                 Rng& rng) {
  const int w = data.width();
  std::vector<int> order(static_cast<std::size_t>(w));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> ud;
  for (int i : order) {
    const double xi = conditional_z(data, i, state, cfg);
    const char zi = ud(rng) < xi ? 1 : 0;
    state.z[static_cast<std::size_t>(i)] = zi;
    if (!zi) state.theta[i] = 0.0;
  }

  const ActiveBlock blk = active_block(data, state.z, state.nu);
  state.sigma2 =
      draw_inverse_gamma(cfg.a_sigma + 0.5 * data.rows(), cfg.b_sigma + 0.5 * blk.q, rng);

  const auto s = static_cast<Eigen::Index>(blk.index.size());
  if (s > 0) {
    Eigen::VectorXd x;
    if (cfg.nonnegative) {
      // Warm start from the previous draw; newly activated entries are 0.
      const Eigen::VectorXd start = state.theta(blk.index);
      x = sample_truncated_mvn_precision(blk.mu, blk.precision / state.sigma2, rng, start,
                                         cfg.tmvn_sweeps);
    } else {
      const Eigen::LLT<Eigen::MatrixXd> llt(blk.precision);
      std::normal_distribution<double> nd;
      Eigen::VectorXd e(s);
      for (Eigen::Index k = 0; k < s; ++k) e[k] = nd(rng);
      x = blk.mu + std::sqrt(state.sigma2) * llt.matrixU().solve(e);
    }
    state.theta.setZero();
    state.theta(blk.index) = x;
  } else {
    state.theta.setZero();
  }

  const double tt = state.theta.squaredNorm();
  state.nu = draw_inverse_gamma(cfg.a_nu + 0.5 * static_cast<double>(s),
                                cfg.b_nu + tt / (2.0 * state.sigma2), rng);
  state.p0 = draw_beta(cfg.a_p + static_cast<double>(s), cfg.b_p + static_cast<double>(w - s), rng);
}

PosteriorEnsemble gibbs_run(const RegressionData& data, const SpikeSlabConfig& cfg) {
  cfg.validate();
  const int kept = cfg.chain_length - cfg.burn_in;
  std::vector<std::vector<SamplerState>> per_chain(static_cast<std::size_t>(cfg.chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.chains));

  auto run_chain = [&](int c) {
    try {
      Rng rng = make_rng(cfg.seed, "chain", static_cast<std::uint64_t>(c));
      SamplerState st = initial_state(data, cfg, c);
      auto& out = per_chain[static_cast<std::size_t>(c)];
      out.reserve(static_cast<std::size_t>(kept));
      for (int it = 0; it < cfg.chain_length; ++it) {
        gibbs_sweep(data, cfg, st, rng);
        if (it >= cfg.burn_in) out.push_back(st);
      }
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  };

  if (cfg.threaded && cfg.chains > 1) {
    std::vector<std::thread> pool;
    for (int c = 0; c < cfg.chains; ++c) pool.emplace_back(run_chain, c);
    for (auto& t : pool) t.join();
  } else {
    for (int c = 0; c < cfg.chains; ++c) run_chain(c);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  PosteriorEnsemble ens;
  ens.width = data.width();
  ens.chains = cfg.chains;
  ens.per_chain = kept;
  for (auto& chain : per_chain)
    for (auto& st : chain) ens.draws.push_back(std::move(st));
  ens.summarize();
  return ens;
}

PosteriorEnsemble gibbs_run(const EquilibriumSystem& system, const SpikeSlabConfig& cfg) {
  return gibbs_run(RegressionData(system), cfg);
}

}  // namespace plateid
