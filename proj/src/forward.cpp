#include "plateid/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/LU>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "plateid/error.hpp"

namespace plateid {

void LoadProgram::validate() const {
  if (!(lambda_x > 0.0) || !(lambda_y > 0.0) || !std::isfinite(lambda_x) ||
      !std::isfinite(lambda_y)) {
    throw ConfigError("load stretches must be positive and finite");
  }
  if (steps < 1) throw ConfigError("load.steps must be at least 1");
}

std::vector<std::size_t> pinned_nodes(const WedgeMesh& mesh) {
  const auto& e = mesh.element(0);
  std::vector<std::size_t> out{e[0], e[1], e[2]};
  std::sort(out.begin(), out.end());
  return out;
}

double stored_energy(const WedgeMesh& mesh, const DisplacementField& field,
                     const SegmentMap& segments, const FeatureLibrary& library,
                     const std::vector<MaterialParams>& params) {
  double W = 0.0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const ElementKinematics k = element_kinematics(mesh, field, e);
    W += k.volume *
         library.strain_energy(k.F, params[static_cast<std::size_t>(segments[e] - 1)].theta);
  }
  return W;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

class NewtonSolver {
 public:
  NewtonSolver(const WedgeMesh& mesh, const SegmentMap& segments,
               const std::vector<MaterialParams>& params, const LoadProgram& load,
               const FeatureLibrary& library, const NewtonOptions& options)
      : mesh_(mesh), segments_(segments), params_(params), load_(load), library_(library),
        options_(options) {
    const std::size_t nn = mesh.num_nodes();
    geometry_.reserve(mesh.num_elements());
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) geometry_.push_back(element_geometry(mesh, e));

    prescribed_.assign(3 * nn, 0);
    for (const auto& b : mesh.boundaries()) {
      for (std::size_t a : b.nodes) {
        prescribed_[3 * a] = 1;
        prescribed_[3 * a + 1] = 1;
      }
    }
    pinned_ = pinned_nodes(mesh);
    for (std::size_t a : pinned_) prescribed_[3 * a + 2] = 1;

    index_.assign(3 * nn, -1);
    for (std::size_t d = 0; d < 3 * nn; ++d) {
      if (!prescribed_[d]) index_[d] = n_free_++;
    }

    double vol_coeff = 0.0;
    for (const auto& p : params) {
      for (int k = 0; k < library.size(); ++k) {
        const auto& t = library.terms()[static_cast<std::size_t>(k)];
        if (t.p == 0 && t.q == 0) vol_coeff += p.theta[k];
      }
    }
    vol_coeff /= static_cast<double>(params.size());
    double vol = 0.0;
    for (const auto& g : geometry_) vol += g.volume;
    vol /= static_cast<double>(geometry_.size());
    tolerance_ = options.relative_tolerance * vol_coeff * vol;

    u_.assign(nn, Vec3::Zero());
  }

  ForwardResult run() {
    ForwardResult res;
    res.tolerance = tolerance_;
    res.pinned = pinned_;
    double s0 = 0.0;
    for (int k = 1; k <= load_.steps; ++k) {
      const double s1 = static_cast<double>(k) / load_.steps;
      advance(s0, s1, 0);
      s0 = s1;
      res.step_energy.push_back(stored_energy(mesh_, field(), segments_, library_, params_));
    }
    res.field = field();
    res.iterations = iterations_;

    const std::vector<Vec3> f = internal_forces(mesh_, res.field, segments_, library_, params_);
    res.residual = free_residual_norm(f);
    res.forces.R.resize(static_cast<Eigen::Index>(mesh_.num_boundaries()), 3);
    for (std::size_t k = 0; k < mesh_.num_boundaries(); ++k) {
      Vec3 sum = Vec3::Zero();
      for (std::size_t a : mesh_.boundary(k).nodes) sum += f[a];
      res.forces.names.push_back(mesh_.boundary(k).name);
      res.forces.R.row(static_cast<Eigen::Index>(k)) = sum;
    }
    return res;
  }

 private:
  DisplacementField field() const { return DisplacementField(u_, mesh_.id()); }

  const Eigen::VectorXd& theta(std::size_t e) const {
    return params_[static_cast<std::size_t>(segments_[e] - 1)].theta;
  }

  double free_residual_norm(const std::vector<Vec3>& f) const {
    double m = 0.0;
    for (std::size_t a = 0; a < f.size(); ++a)
      for (int i = 0; i < 3; ++i)
        if (!prescribed_[3 * a + i]) m = std::max(m, std::abs(f[a][i]));
    return m;
  }

  // Free residual; throws ElementInversion.
  Eigen::VectorXd residual(const std::vector<Vec3>& u) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n_free_);
    for (std::size_t e = 0; e < mesh_.num_elements(); ++e) {
      const auto& en = mesh_.element(e);
      const auto& g = geometry_[e];
      Mat3 F = Mat3::Identity();
      for (int a = 0; a < 6; ++a) F += u[en[a]] * g.grad.row(a);
      const double det = F.determinant();
      if (!(det > 0.0)) throw ElementInversion(e, det);
      const Mat3 P = library_.piola(F, theta(e));
      for (int a = 0; a < 6; ++a) {
        const Vec3 fa = g.volume * P * g.grad.row(a).transpose();
        for (int i = 0; i < 3; ++i) {
          const long d = index_[3 * en[a] + i];
          if (d >= 0) r[d] += fa[i];
        }
      }
    }
    return r;
  }

  // Tangent of the free residual; dP/dF by central differences.
  SpMat tangent() const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh_.num_elements() * 324);
    for (std::size_t e = 0; e < mesh_.num_elements(); ++e) {
      const auto& en = mesh_.element(e);
      const auto& g = geometry_[e];
      Mat3 F = Mat3::Identity();
      for (int a = 0; a < 6; ++a) F += u_[en[a]] * g.grad.row(a);
      Eigen::Matrix<double, 9, 9> C;
      const double h = 1e-6 * std::max(1.0, F.cwiseAbs().maxCoeff());
      for (int m = 0; m < 9; ++m) {
        Mat3 Fp = F, Fm = F;
        Fp(m / 3, m % 3) += h;
        Fm(m / 3, m % 3) -= h;
        const Mat3 dP = (library_.piola(Fp, theta(e)) - library_.piola(Fm, theta(e))) / (2 * h);
        for (int n = 0; n < 9; ++n) C(n, m) = dP(n / 3, n % 3);
      }
      C = 0.5 * (C + C.transpose()).eval();

      // B maps the 18 element dofs (3a + i) to the 9 entries (3i + J) of F.
      Eigen::Matrix<double, 9, 18> B = Eigen::Matrix<double, 9, 18>::Zero();
      for (int a = 0; a < 6; ++a)
        for (int i = 0; i < 3; ++i)
          for (int J = 0; J < 3; ++J) B(3 * i + J, 3 * a + i) = g.grad(a, J);
      const Eigen::Matrix<double, 18, 18> K = g.volume * B.transpose() * C * B;

      for (int p = 0; p < 18; ++p) {
        const long dp = index_[3 * en[p / 3] + p % 3];
        if (dp < 0) continue;
        for (int q = 0; q < 18; ++q) {
          const long dq = index_[3 * en[q / 3] + q % 3];
          if (dq >= 0) trip.emplace_back(dp, dq, K(p, q));
        }
      }
    }
    SpMat K(n_free_, n_free_);
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
  }

  Eigen::VectorXd solve(const SpMat& K, const Eigen::VectorXd& rhs) const {
    Eigen::SimplicialLDLT<SpMat> ldlt(K);
    if (ldlt.info() == Eigen::Success) {
      Eigen::VectorXd x = ldlt.solve(rhs);
      if (ldlt.info() == Eigen::Success && x.allFinite()) return x;
    }
    Eigen::SparseLU<SpMat> lu(K);
    if (lu.info() != Eigen::Success) throw NonConvergence("tangent stiffness is singular");
    return lu.solve(rhs);
  }

  void set_prescribed(std::vector<Vec3>& u, double s) const {
    for (std::size_t a = 0; a < u.size(); ++a) {
      const Vec3& X = mesh_.node(a);
      if (prescribed_[3 * a]) u[a].x() = s * (load_.lambda_x - 1.0) * X.x();
      if (prescribed_[3 * a + 1]) u[a].y() = s * (load_.lambda_y - 1.0) * X.y();
      if (prescribed_[3 * a + 2]) u[a].z() = 0.0;
    }
  }

  void apply(std::vector<Vec3>& u, const Eigen::VectorXd& du, double alpha) const {
    for (std::size_t a = 0; a < u.size(); ++a)
      for (int i = 0; i < 3; ++i) {
        const long d = index_[3 * a + i];
        if (d >= 0) u[a][i] += alpha * du[d];
      }
  }

  void advance(double s0, double s1, int depth) {
    const std::vector<Vec3> saved = u_;
    try {
      // Affine predictor for the in-plane components.
      for (std::size_t a = 0; a < u_.size(); ++a) {
        const Vec3& X = mesh_.node(a);
        u_[a].x() += (s1 - s0) * (load_.lambda_x - 1.0) * X.x();
        u_[a].y() += (s1 - s0) * (load_.lambda_y - 1.0) * X.y();
      }
      set_prescribed(u_, s1);
      newton();
    } catch (const NumericalError& err) {
      u_ = saved;
      if (depth >= options_.max_bisections) {
        throw NonConvergence("load step " + std::to_string(s0) + " -> " + std::to_string(s1) +
                             " failed after " + std::to_string(depth) +
                             " bisections: " + err.what());
      }
      const double mid = 0.5 * (s0 + s1);
      advance(s0, mid, depth + 1);
      advance(mid, s1, depth + 1);
    }
  }

  void newton() {
    Eigen::VectorXd r = residual(u_);
    for (int it = 0; it < options_.max_iterations; ++it) {
      if (r.lpNorm<Eigen::Infinity>() < tolerance_) return;
      ++iterations_;
      const Eigen::VectorXd du = solve(tangent(), -r);
      const double r0 = r.norm();
      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 10 && !accepted; ++ls, alpha *= 0.5) {
        std::vector<Vec3> trial = u_;
        apply(trial, du, alpha);
        try {
          Eigen::VectorXd rt = residual(trial);
          if (rt.norm() < (1.0 - 1e-4 * alpha) * r0 || rt.lpNorm<Eigen::Infinity>() < tolerance_) {
            u_ = std::move(trial);
            r = std::move(rt);
            accepted = true;
          }
        } catch (const ElementInversion&) {
        }
      }
      if (!accepted) throw NonConvergence("line search failed to reduce the residual");
    }
    if (r.lpNorm<Eigen::Infinity>() < tolerance_) return;
    throw NonConvergence("Newton iteration did not converge (residual " +
                         std::to_string(r.lpNorm<Eigen::Infinity>()) + ", tolerance " +
                         std::to_string(tolerance_) + ")");
  }

  const WedgeMesh& mesh_;
  const SegmentMap& segments_;
  const std::vector<MaterialParams>& params_;
  LoadProgram load_;
  const FeatureLibrary& library_;
  NewtonOptions options_;
  std::vector<ElementGeometry> geometry_;
  std::vector<char> prescribed_;
  std::vector<std::size_t> pinned_;
  std::vector<long> index_;
  long n_free_ = 0;
  double tolerance_ = 0.0;
  std::vector<Vec3> u_;
  int iterations_ = 0;
};

}  // namespace

ForwardResult forward_solve(const WedgeMesh& mesh, const SegmentMap& segments,
                            const std::vector<MaterialParams>& params, const LoadProgram& load,
                            const FeatureLibrary& library, const NewtonOptions& options) {
  load.validate();
  if (segments.size() != mesh.num_elements()) {
    throw InvalidArgument("segment map does not match the mesh");
  }
  if (static_cast<int>(params.size()) != segments.num_segments) {
    throw InvalidArgument("forward solve needs one parameter set per segment (" +
                          std::to_string(segments.num_segments) + "), got " +
                          std::to_string(params.size()));
  }
  for (std::size_t s = 0; s < params.size(); ++s) {
    if (params[s].theta.size() != library.size()) {
      throw InvalidArgument("segment " + std::to_string(s + 1) +
                            " parameter count does not match the feature library");
    }
    double vol = 0.0;
    for (int k = 0; k < library.size(); ++k) {
      const auto& t = library.terms()[static_cast<std::size_t>(k)];
      if (t.p == 0 && t.q == 0) vol += params[s].theta[k];
    }
    if (!(vol > 0.0)) {
      throw InvalidArgument("segment " + std::to_string(s + 1) +
                            " needs a positive volumetric coefficient");
    }
  }
  return NewtonSolver(mesh, segments, params, load, library, options).run();
}

DisplacementField add_noise(const DisplacementField& field, double sigma_u, std::uint64_t seed) {
  if (!(sigma_u >= 0.0) || !std::isfinite(sigma_u)) {
    throw InvalidArgument("noise level must be finite and non-negative");
  }
  DisplacementField out = field;
  if (sigma_u == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma_u);
  for (auto& u : out.values)
    for (int i = 0; i < 3; ++i) u[i] += n(rng);
  return out;
}

DisplacementField recover_through_thickness(const WedgeMesh& mesh, const DisplacementField& field) {
  check_field(mesh, field);
  std::vector<Vec3> column(mesh.num_nodes(), Vec3::Zero());
  std::vector<double> weight(mesh.num_nodes(), 0.0);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const Vec3 f3 = element_kinematics(mesh, field, e).F.col(2);
    const double area = mesh.element_area(e);
    for (int i = 0; i < 3; ++i) {
      column[mesh.element(e)[i]] += area * f3;
      weight[mesh.element(e)[i]] += area;
    }
  }
  DisplacementField out = field;
  for (const auto& el : mesh.elements()) {
    for (int i = 0; i < 3; ++i) {
      const std::size_t bottom = el[i], top = el[i + 3];
      const Vec3 diff = mesh.thickness() * (column[bottom] / weight[bottom] - Vec3::UnitZ());
      const Vec3 mid = 0.5 * (field[bottom] + field[top]);
      out[top] = mid + 0.5 * diff;
      out[bottom] = mid - 0.5 * diff;
    }
  }
  return out;
}

}  // namespace plateid
