#include "plateid/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/LU>
#include <Eigen/QR>

#include "plateid/error.hpp"
#include "plateid/rng.hpp"

namespace plateid {

DofPartition DofPartition::plate(const WedgeMesh& mesh) {
  DofPartition d;
  d.fixed.assign(3 * mesh.num_nodes(), 0);
  for (const auto& b : mesh.boundaries()) {
    for (std::size_t a : b.nodes) {
      d.fixed[3 * a] = 1;
      d.fixed[3 * a + 1] = 1;
    }
  }
  return d;
}

std::vector<std::size_t> DofPartition::free_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t a = 0; 3 * a < fixed.size(); ++a) {
    if (!fixed[3 * a] && !fixed[3 * a + 1] && !fixed[3 * a + 2]) out.push_back(a);
  }
  return out;
}

std::size_t DofPartition::num_free() const {
  return static_cast<std::size_t>(std::count(fixed.begin(), fixed.end(), 0));
}

Eigen::Index EquilibriumSystem::num_free_rows() const {
  return std::count_if(rows.begin(), rows.end(),
                       [](const RowTag& r) { return r.kind == RowTag::Kind::Free; });
}

ElementGeometry element_geometry(const WedgeMesh& mesh, std::size_t element) {
  const auto& en = mesh.element(element);
  const Vec3& x0 = mesh.node(en[0]);
  const Vec3& x1 = mesh.node(en[1]);
  const Vec3& x2 = mesh.node(en[2]);
  const double area2 = (x1.x() - x0.x()) * (x2.y() - x0.y()) - (x2.x() - x0.x()) * (x1.y() - x0.y());
  const double t = mesh.thickness();

  // Barycentric gradients of the bottom triangle.
  Eigen::Matrix<double, 3, 2> dL;
  dL << x1.y() - x2.y(), x2.x() - x1.x(),
        x2.y() - x0.y(), x0.x() - x2.x(),
        x0.y() - x1.y(), x1.x() - x0.x();
  dL /= area2;

  // N = L_i (1 - zeta) on the bottom, L_i zeta on the top, evaluated at
  // L_i = 1/3, zeta = 1/2.
  ElementGeometry g;
  for (int i = 0; i < 3; ++i) {
    g.grad.row(i) << 0.5 * dL(i, 0), 0.5 * dL(i, 1), -1.0 / (3.0 * t);
    g.grad.row(i + 3) << 0.5 * dL(i, 0), 0.5 * dL(i, 1), 1.0 / (3.0 * t);
  }
  g.volume = 0.5 * area2 * t;
  return g;
}

ElementKinematics element_kinematics(const WedgeMesh& mesh, const DisplacementField& field,
                                     std::size_t element) {
  const ElementGeometry g = element_geometry(mesh, element);
  const auto& en = mesh.element(element);
  ElementKinematics k;
  k.F = Mat3::Identity();
  for (int a = 0; a < 6; ++a) k.F += field[en[a]] * g.grad.row(a);
  k.grad = g.grad;
  k.volume = g.volume;
  const double det = k.F.determinant();
  if (!(det > 0.0)) throw ElementInversion(element, det);
  return k;
}

namespace {

void check_inputs(const WedgeMesh& mesh, const DisplacementField& field,
                  const SegmentMap& segments) {
  check_field(mesh, field);
  if (segments.size() != mesh.num_elements()) {
    throw InvalidArgument("segment map has " + std::to_string(segments.size()) +
                          " entries for " + std::to_string(mesh.num_elements()) + " elements");
  }
}

// Per-element weak-form contribution: block(a, i) = V sum_J dQ/dF_iJ N^a_,J
// as an (n_f) row for each local node a and direction i.
struct ElementBlock {
  std::array<Eigen::VectorXd, 18> row;  // index 3*a + i
  int segment = 0;
};

ElementBlock element_block(const WedgeMesh& mesh, const DisplacementField& field,
                           const SegmentMap& segments, const FeatureLibrary& library,
                           std::size_t e) {
  const ElementKinematics k = element_kinematics(mesh, field, e);
  const FeatureDerivatives D = library.piola_derivatives(k.F);
  ElementBlock blk;
  blk.segment = segments[e];
  for (int a = 0; a < 6; ++a) {
    for (int i = 0; i < 3; ++i) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(library.size());
      for (int J = 0; J < 3; ++J) r += D.col(3 * i + J) * k.grad(a, J);
      blk.row[3 * a + i] = r * k.volume;
    }
  }
  return blk;
}

}  // namespace

EquilibriumSystem assemble_free_rows(const WedgeMesh& mesh, const DisplacementField& field,
                                     const SegmentMap& segments, const FeatureLibrary& library,
                                     const DofPartition& dofs) {
  check_inputs(mesh, field, segments);
  if (dofs.fixed.size() != 3 * mesh.num_nodes()) {
    throw InvalidArgument("dof partition does not match mesh");
  }
  const int nf = library.size();
  EquilibriumSystem sys;
  sys.n_features = nf;
  sys.n_segments = segments.num_segments;

  std::vector<long> row_of(3 * mesh.num_nodes(), -1);
  for (std::size_t a = 0; a < mesh.num_nodes(); ++a) {
    for (int i = 0; i < 3; ++i) {
      if (dofs.is_fixed(a, i)) continue;
      row_of[3 * a + i] = static_cast<long>(sys.rows.size());
      sys.rows.push_back({RowTag::Kind::Free, a, i});
    }
  }
  const auto n_rows = static_cast<Eigen::Index>(sys.rows.size());
  sys.A = Eigen::MatrixXd::Zero(n_rows, nf * sys.n_segments);
  sys.b = Eigen::VectorXd::Zero(n_rows);

  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const ElementBlock blk = element_block(mesh, field, segments, library, e);
    const auto& en = mesh.element(e);
    const Eigen::Index col = static_cast<Eigen::Index>(blk.segment - 1) * nf;
    for (int a = 0; a < 6; ++a) {
      for (int i = 0; i < 3; ++i) {
        const long r = row_of[3 * en[a] + i];
        if (r < 0) continue;
        sys.A.row(r).segment(col, nf) += blk.row[3 * a + i].transpose();
      }
    }
  }
  return sys;
}

EquilibriumSystem assemble_fixed_rows(const WedgeMesh& mesh, const DisplacementField& field,
                                      const SegmentMap& segments, const FeatureLibrary& library,
                                      const BoundaryForces& forces) {
  check_inputs(mesh, field, segments);
  const std::size_t nb = mesh.num_boundaries();
  if (forces.R.rows() != static_cast<Eigen::Index>(nb)) {
    throw InvalidArgument("boundary forces have " + std::to_string(forces.R.rows()) +
                          " rows for " + std::to_string(nb) + " boundaries");
  }
  const int nf = library.size();
  EquilibriumSystem sys;
  sys.n_features = nf;
  sys.n_segments = segments.num_segments;
  sys.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(3 * nb), nf * sys.n_segments);
  sys.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * nb));

  // Membership of each node in each boundary set.
  std::vector<std::vector<int>> sets_of(mesh.num_nodes());
  for (std::size_t k = 0; k < nb; ++k) {
    const auto& bs = mesh.boundary(k);
    if (bs.nodes.empty()) throw ConfigError("boundary set '" + bs.name + "' is empty");
    for (std::size_t a : bs.nodes) sets_of[a].push_back(static_cast<int>(k));
  }
  for (std::size_t k = 0; k < nb; ++k) {
    for (int i = 0; i < 3; ++i) {
      sys.rows.push_back({RowTag::Kind::Fixed, k, i});
      sys.b[static_cast<Eigen::Index>(3 * k + i)] = forces.R(static_cast<Eigen::Index>(k), i);
    }
  }

  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& en = mesh.element(e);
    bool touches = false;
    for (std::size_t a : en) touches = touches || !sets_of[a].empty();
    if (!touches) continue;
    const ElementBlock blk = element_block(mesh, field, segments, library, e);
    const Eigen::Index col = static_cast<Eigen::Index>(blk.segment - 1) * nf;
    for (int a = 0; a < 6; ++a) {
      for (int k : sets_of[en[a]]) {
        for (int i = 0; i < 3; ++i) {
          sys.A.row(3 * k + i).segment(col, nf) += blk.row[3 * a + i].transpose();
        }
      }
    }
  }
  return sys;
}

double balanced_lambda_r(const EquilibriumSystem& free_part, const EquilibriumSystem& fixed_part) {
  const double nfix = fixed_part.A.norm();
  if (nfix == 0.0) return 1.0;
  return free_part.A.norm() / nfix;
}

EquilibriumSystem combine(const EquilibriumSystem& free_part, const EquilibriumSystem& fixed_part,
                          std::optional<double> lambda_r) {
  if (free_part.A.cols() != fixed_part.A.cols()) {
    throw InvalidArgument("free and fixed blocks have different column counts");
  }
  const double lam = lambda_r ? *lambda_r : balanced_lambda_r(free_part, fixed_part);
  if (!std::isfinite(lam) || lam < 0.0) throw InvalidArgument("lambda_r must be finite and >= 0");

  EquilibriumSystem sys;
  sys.n_features = free_part.n_features;
  sys.n_segments = free_part.n_segments;
  sys.lambda_r = lam;
  const Eigen::Index nf = free_part.A.rows(), nx = fixed_part.A.rows();
  sys.A.resize(nf + nx, free_part.A.cols());
  sys.A << free_part.A, lam * fixed_part.A;
  sys.b.resize(nf + nx);
  sys.b << Eigen::VectorXd::Zero(nf), lam * fixed_part.b;
  sys.rows = free_part.rows;
  sys.rows.insert(sys.rows.end(), fixed_part.rows.begin(), fixed_part.rows.end());
  return sys;
}

EquilibriumSystem assemble_system(const WedgeMesh& mesh, const DisplacementField& field,
                                  const SegmentMap& segments, const FeatureLibrary& library,
                                  const BoundaryForces& forces, std::optional<double> lambda_r) {
  const DofPartition dofs = DofPartition::plate(mesh);
  return combine(assemble_free_rows(mesh, field, segments, library, dofs),
                 assemble_fixed_rows(mesh, field, segments, library, forces), lambda_r);
}

EquilibriumSystem subsample(const EquilibriumSystem& system, const InterfaceNodes& interface,
                            double frac_free, double frac_flag, std::uint64_t seed) {
  if (!(frac_free > 0.0 && frac_free <= 1.0)) {
    throw ConfigError("frac_free must lie in (0, 1], got " + std::to_string(frac_free));
  }
  if (!(frac_flag > 0.0 && frac_flag <= 1.0)) {
    throw ConfigError("frac_flag must lie in (0, 1], got " + std::to_string(frac_flag));
  }
  if (interface.nodes.size() != interface.residual.size() ||
      interface.nodes.size() != interface.group.size()) {
    throw InvalidArgument("interface node lists have inconsistent lengths");
  }

  // Free rows per node; only nodes with all three rows form the random pool.
  std::map<std::size_t, std::vector<Eigen::Index>> node_rows;
  for (Eigen::Index r = 0; r < system.num_rows(); ++r) {
    const RowTag& tag = system.rows[static_cast<std::size_t>(r)];
    if (tag.kind == RowTag::Kind::Free) node_rows[tag.index].push_back(r);
  }
  std::vector<char> flagged;
  for (std::size_t a : interface.nodes) {
    if (a >= flagged.size()) flagged.resize(a + 1, 0);
    flagged[a] = 1;
  }
  auto is_flagged = [&](std::size_t a) { return a < flagged.size() && flagged[a]; };

  std::vector<std::size_t> pool;
  for (const auto& [a, rows] : node_rows) {
    if (rows.size() == 3 && !is_flagged(a)) pool.push_back(a);
  }
  if (pool.empty()) throw ConfigError("no free nodes available for sub-sampling");

  std::vector<std::size_t> keep_nodes;
  const auto take = [](double frac, std::size_t n) {
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(frac * n + 1e-9)), 1, n);
  };
  {
    Rng rng(seed);
    std::vector<std::size_t> shuffled = pool;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    shuffled.resize(take(frac_free, pool.size()));
    keep_nodes = std::move(shuffled);
  }

  std::map<std::uint64_t, std::vector<std::size_t>> groups;  // group -> indices into interface
  for (std::size_t j = 0; j < interface.nodes.size(); ++j) {
    if (node_rows.count(interface.nodes[j])) groups[interface.group[j]].push_back(j);
  }
  for (auto& [g, idx] : groups) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t p, std::size_t q) {
      if (interface.residual[p] != interface.residual[q]) {
        return interface.residual[p] < interface.residual[q];
      }
      return interface.nodes[p] < interface.nodes[q];
    });
    const std::size_t n = take(frac_flag, idx.size());
    for (std::size_t j = 0; j < n; ++j) keep_nodes.push_back(interface.nodes[idx[j]]);
  }

  std::vector<char> keep_row(static_cast<std::size_t>(system.num_rows()), 0);
  for (std::size_t a : keep_nodes)
    for (Eigen::Index r : node_rows[a]) keep_row[static_cast<std::size_t>(r)] = 1;
  for (Eigen::Index r = 0; r < system.num_rows(); ++r) {
    if (system.rows[static_cast<std::size_t>(r)].kind == RowTag::Kind::Fixed) {
      keep_row[static_cast<std::size_t>(r)] = 1;
    }
  }

  // Identity selection keeps the partially free rows as well.
  if (frac_free >= 1.0 && frac_flag >= 1.0) std::fill(keep_row.begin(), keep_row.end(), 1);

  std::vector<Eigen::Index> idx;
  for (Eigen::Index r = 0; r < system.num_rows(); ++r)
    if (keep_row[static_cast<std::size_t>(r)]) idx.push_back(r);

  EquilibriumSystem out;
  out.n_features = system.n_features;
  out.n_segments = system.n_segments;
  out.lambda_r = system.lambda_r;
  out.A = system.A(idx, Eigen::all);
  out.b = system.b(idx);
  for (Eigen::Index r : idx) out.rows.push_back(system.rows[static_cast<std::size_t>(r)]);
  return out;
}

Eigen::VectorXd ols_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const Eigen::Index n = A.cols();
  if (A.rows() != b.size()) throw InvalidArgument("row count of A and b differ");
  if (A.rows() < n) {
    throw SingularSystem("least-squares system has fewer rows than columns", A.rows(), n);
  }
  Eigen::VectorXd scale = A.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (scale[j] == 0.0) throw SingularSystem("column " + std::to_string(j) + " is identically zero", n - 1, n);
  }
  const Eigen::MatrixXd As = A * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(As);
  qr.setThreshold(1e-12 * std::sqrt(static_cast<double>(n)));
  if (qr.rank() < n) throw SingularSystem("least-squares system is rank deficient", qr.rank(), n);
  if (b.norm() == 0.0) {
    throw SingularSystem("right-hand side vanishes, so the parameter scale is indeterminate",
                         qr.rank(), n);
  }
  return qr.solve(b).cwiseQuotient(scale);
}

Eigen::VectorXd ols_solve(const EquilibriumSystem& system) { return ols_solve(system.A, system.b); }

NodalForces free_row_forces(const EquilibriumSystem& system, const Eigen::VectorXd& theta,
                            std::size_t num_nodes) {
  NodalForces out;
  out.force.assign(num_nodes, Vec3::Zero());
  std::vector<int> count(num_nodes, 0);
  const Eigen::VectorXd f = system.A * theta;
  for (Eigen::Index r = 0; r < system.num_rows(); ++r) {
    const RowTag& tag = system.rows[static_cast<std::size_t>(r)];
    if (tag.kind != RowTag::Kind::Free) continue;
    out.force[tag.index][tag.dir] = f[r];
    ++count[tag.index];
  }
  out.complete.resize(num_nodes);
  for (std::size_t a = 0; a < num_nodes; ++a) out.complete[a] = count[a] == 3;
  return out;
}

std::vector<Vec3> internal_forces(const WedgeMesh& mesh, const DisplacementField& field,
                                  const SegmentMap& segments, const FeatureLibrary& library,
                                  const std::vector<MaterialParams>& params) {
  check_inputs(mesh, field, segments);
  if (static_cast<int>(params.size()) != segments.num_segments) {
    throw InvalidArgument("need one parameter set per segment");
  }
  std::vector<Vec3> f(mesh.num_nodes(), Vec3::Zero());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const ElementKinematics k = element_kinematics(mesh, field, e);
    const Mat3 P = library.piola(k.F, params[static_cast<std::size_t>(segments[e] - 1)].theta);
    const auto& en = mesh.element(e);
    for (int a = 0; a < 6; ++a) f[en[a]] += k.volume * P * k.grad.row(a).transpose();
  }
  return f;
}

Eigen::VectorXd stack_params(const std::vector<MaterialParams>& params) {
  Eigen::Index n = 0;
  for (const auto& p : params) n += p.theta.size();
  Eigen::VectorXd out(n);
  Eigen::Index off = 0;
  for (const auto& p : params) {
    out.segment(off, p.theta.size()) = p.theta;
    off += p.theta.size();
  }
  return out;
}

}  // namespace plateid
