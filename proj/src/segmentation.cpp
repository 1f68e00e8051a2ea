#include "plateid/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include "plateid/error.hpp"
#include "plateid/rng.hpp"

namespace plateid {

ResidualField make_residual_field(std::vector<std::size_t> nodes, std::vector<Vec3> force) {
  ResidualField r;
  r.nodes = std::move(nodes);
  r.force = std::move(force);
  r.f_res.reserve(r.force.size());
  for (const auto& f : r.force) r.f_res.push_back(std::hypot(f.x(), f.y()));
  if (!r.f_res.empty()) {
    const double n = static_cast<double>(r.f_res.size());
    r.mean = std::accumulate(r.f_res.begin(), r.f_res.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : r.f_res) ss += (v - r.mean) * (v - r.mean);
    r.sigma = std::sqrt(ss / n);
  }
  return r;
}

ResidualField residual_forces(const WedgeMesh& mesh, const DisplacementField& field,
                              const BoundaryForces& forces, std::optional<double> lambda_r,
                              const FeatureLibrary& library) {
  const SegmentMap single(std::vector<int>(mesh.num_elements(), 1));
  const EquilibriumSystem sys = assemble_system(mesh, field, single, library, forces, lambda_r);
  // No load and no reaction: the homogeneous fit is theta = 0 and every
  // residual vanishes.
  const Eigen::VectorXd theta = sys.b.isZero(0.0) && sys.A.isZero(0.0)
                                    ? Eigen::VectorXd::Zero(sys.A.cols())
                                    : ols_solve(sys);
  const NodalForces nf = free_row_forces(sys, theta, mesh.num_nodes());
  std::vector<std::size_t> nodes;
  std::vector<Vec3> f;
  for (std::size_t a = 0; a < mesh.num_nodes(); ++a) {
    if (!nf.complete[a]) continue;
    nodes.push_back(a);
    f.push_back(nf.force[a]);
  }
  ResidualField r = make_residual_field(std::move(nodes), std::move(f));
  r.theta = theta;
  return r;
}

std::vector<std::size_t> flag_nodes(const ResidualField& res, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("flag threshold lambda must be positive");
  const double thr = lambda * res.sigma;
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < res.size(); ++k)
    if (res.f_res[k] > thr) out.push_back(res.nodes[k]);
  std::sort(out.begin(), out.end());
  return out;
}

SegmentationResult grow_segments(const WedgeMesh& mesh, const std::vector<std::size_t>& flagged,
                                 std::uint64_t seed) {
  const std::size_t ne = mesh.num_elements();
  std::vector<char> node_flag(mesh.num_nodes(), 0);
  for (std::size_t a : flagged) {
    if (a >= mesh.num_nodes()) throw InvalidArgument("flagged node out of range");
    node_flag[a] = 1;
  }
  // 0: no flagged node, 1: some flagged, 2: all flagged.
  std::vector<int> touch(ne, 0);
  for (std::size_t e = 0; e < ne; ++e) {
    int n = 0;
    for (std::size_t a : mesh.element(e)) n += node_flag[a];
    touch[e] = n == 0 ? 0 : (n == 6 ? 2 : 1);
  }

  SegmentationResult res;
  res.flagged = flagged;
  std::sort(res.flagged.begin(), res.flagged.end());
  res.flagged.erase(std::unique(res.flagged.begin(), res.flagged.end()), res.flagged.end());

  std::vector<std::size_t> seeds;
  for (std::size_t e = 0; e < ne; ++e)
    if (touch[e] == 0) seeds.push_back(e);
  if (seeds.empty()) {
    throw SegmentationFailure(
        "every element touches a flagged node; raise the flag threshold lambda");
  }

  Rng rng(seed);
  std::vector<char> assigned(ne, 0);
  std::size_t remaining = seeds.size();
  while (remaining > 0) {
    // Uniform choice among the remaining seed candidates (swap-remove).
    std::uniform_int_distribution<std::size_t> pick(0, remaining - 1);
    std::size_t i = pick(rng);
    const std::size_t s = seeds[i];
    std::swap(seeds[i], seeds[--remaining]);
    if (assigned[s]) continue;

    std::vector<std::size_t> segment{s};
    assigned[s] = 1;
    std::deque<std::size_t> frontier{s};
    while (!frontier.empty()) {
      const std::size_t e = frontier.front();
      frontier.pop_front();
      for (std::size_t f : mesh.neighbors(e)) {
        if (assigned[f] || touch[f] == 2) continue;
        assigned[f] = 1;
        segment.push_back(f);
        if (touch[f] == 0) frontier.push_back(f);
      }
    }
    res.segments.push_back(std::move(segment));
  }
  for (std::size_t e = 0; e < ne; ++e)
    if (!assigned[e]) res.unassigned.push_back(e);
  return res;
}

SegmentMap resolve_segments(const WedgeMesh& mesh, const SegmentationResult& result) {
  const std::size_t ne = mesh.num_elements();
  if (result.segments.empty()) throw SegmentationFailure("segmentation produced no segments");
  std::vector<int> label(ne, -1);
  for (std::size_t k = 0; k < result.segments.size(); ++k)
    for (std::size_t e : result.segments[k]) label[e] = static_cast<int>(k);

  std::vector<char> node_flag(mesh.num_nodes(), 0);
  for (std::size_t a : result.flagged) node_flag[a] = 1;

  std::vector<std::size_t> pending = result.unassigned;
  while (!pending.empty()) {
    std::vector<std::pair<std::size_t, int>> updates;
    std::vector<std::size_t> still;
    for (std::size_t e : pending) {
      std::map<int, int> score;  // segment -> shared unflagged nodes
      for (std::size_t f : mesh.neighbors(e)) {
        if (label[f] < 0) continue;
        int shared = 0;
        for (std::size_t a : mesh.element(e)) {
          if (node_flag[a]) continue;
          const auto& fe = mesh.element(f);
          shared += std::find(fe.begin(), fe.end(), a) != fe.end();
        }
        auto [it, inserted] = score.emplace(label[f], shared);
        if (!inserted) it->second = std::max(it->second, shared);
      }
      if (score.empty()) {
        still.push_back(e);
        continue;
      }
      int best = score.begin()->first, best_score = score.begin()->second;
      for (const auto& [seg, sc] : score) {
        if (sc > best_score) {
          best = seg;
          best_score = sc;
        }
      }
      updates.emplace_back(e, best);
    }
    if (updates.empty()) {
      throw SegmentationFailure(std::to_string(still.size()) +
                                " elements cannot be attached to any segment");
    }
    for (const auto& [e, s] : updates) label[e] = s;
    pending = std::move(still);
  }

  // Number segments by their smallest element.
  const int ns = static_cast<int>(result.segments.size());
  std::vector<std::size_t> first(static_cast<std::size_t>(ns), ne);
  for (std::size_t e = 0; e < ne; ++e)
    first[static_cast<std::size_t>(label[e])] = std::min(first[static_cast<std::size_t>(label[e])], e);
  std::vector<int> order(static_cast<std::size_t>(ns));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return first[static_cast<std::size_t>(a)] < first[static_cast<std::size_t>(b)];
  });
  std::vector<int> rank(static_cast<std::size_t>(ns));
  for (int r = 0; r < ns; ++r) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r + 1;
  std::vector<int> out(ne);
  for (std::size_t e = 0; e < ne; ++e) out[e] = rank[static_cast<std::size_t>(label[e])];
  return SegmentMap(std::move(out));
}

NoiseDiagnostics noise_diagnostics(const ResidualField& res, const BoundaryForces& forces) {
  NoiseDiagnostics d;
  if (res.sigma == 0.0 && res.mean == 0.0) return d;
  const double rmax = forces.max_abs();
  if (rmax == 0.0) throw NumericalError("boundary forces vanish; sigma / R_max is undefined");
  d.mu_over_sigma = res.sigma > 0.0 ? res.mean / res.sigma : std::numeric_limits<double>::infinity();
  d.sigma_over_rmax = res.sigma / rmax;
  d.nominally_homogeneous = d.sigma_over_rmax <= 1e-5 && d.mu_over_sigma >= 1.0;
  return d;
}

InterfaceNodes interface_nodes(const WedgeMesh& mesh, const SegmentMap& segments,
                               const std::vector<std::size_t>& flagged,
                               const EquilibriumSystem& system, const Eigen::VectorXd& theta) {
  const NodalForces nf = free_row_forces(system, theta, mesh.num_nodes());
  InterfaceNodes out;
  for (std::size_t a : flagged) {
    if (!nf.complete[a]) continue;
    std::vector<int> segs;
    for (std::size_t e : mesh.elements_of_node(a)) segs.push_back(segments[e]);
    std::sort(segs.begin(), segs.end());
    segs.erase(std::unique(segs.begin(), segs.end()), segs.end());
    std::uint64_t key = 0;
    for (int s : segs) key = mix64(key ^ static_cast<std::uint64_t>(s));
    out.nodes.push_back(a);
    out.residual.push_back(std::hypot(nf.force[a].x(), nf.force[a].y()));
    out.group.push_back(key);
  }
  return out;
}

std::vector<int> match_segments(const SegmentMap& found, const SegmentMap& truth) {
  if (found.size() != truth.size()) throw InvalidArgument("segment maps differ in size");
  std::vector<std::vector<std::size_t>> overlap(
      static_cast<std::size_t>(found.num_segments),
      std::vector<std::size_t>(static_cast<std::size_t>(truth.num_segments) + 1, 0));
  for (std::size_t e = 0; e < found.size(); ++e)
    ++overlap[static_cast<std::size_t>(found[e] - 1)][static_cast<std::size_t>(truth[e])];
  std::vector<int> out;
  for (const auto& row : overlap) {
    out.push_back(static_cast<int>(std::max_element(row.begin() + 1, row.end()) - row.begin()));
  }
  return out;
}

double misassignment(const SegmentMap& found, const SegmentMap& truth) {
  const std::vector<int> m = match_segments(found, truth);
  std::size_t wrong = 0;
  for (std::size_t e = 0; e < found.size(); ++e)
    wrong += m[static_cast<std::size_t>(found[e] - 1)] != truth[e];
  return static_cast<double>(wrong) / static_cast<double>(found.size());
}

}  // namespace plateid
