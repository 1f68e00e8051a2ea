#pragma once

// Independent reference computations used by the tests. None of these call
// into the library routines they are compared against.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Central finite difference of a scalar function of a 3x3 matrix.
inline Eigen::Matrix3d fd_gradient(const std::function<double(const Eigen::Matrix3d&)>& f,
                                   const Eigen::Matrix3d& F, double h = 1e-6) {
  Eigen::Matrix3d g;
  for (int i = 0; i < 3; ++i) {
    for (int J = 0; J < 3; ++J) {
      Eigen::Matrix3d Fp = F, Fm = F;
      Fp(i, J) += h;
      Fm(i, J) -= h;
      g(i, J) = (f(Fp) - f(Fm)) / (2 * h);
    }
  }
  return g;
}

/// Fourth-order central difference; used where second-order truncation
/// error would dominate a 1e-6 relative comparison.
inline Eigen::Matrix3d fd_gradient4(const std::function<double(const Eigen::Matrix3d&)>& f,
                                    const Eigen::Matrix3d& F, double h = 1e-3) {
  Eigen::Matrix3d g;
  for (int i = 0; i < 3; ++i) {
    for (int J = 0; J < 3; ++J) {
      auto at = [&](double s) {
        Eigen::Matrix3d G = F;
        G(i, J) += s;
        return f(G);
      };
      g(i, J) = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    }
  }
  return g;
}

/// Invariants from principal stretches (singular values of F).
struct PrincipalInvariants {
  double I1t, I2t, J;
};
inline PrincipalInvariants principal_invariants(const Eigen::Matrix3d& F) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(F);
  const Eigen::Vector3d l = svd.singularValues();
  const double J = l.prod();
  const double l1 = l[0] * l[0], l2 = l[1] * l[1], l3 = l[2] * l[2];
  const double I1 = l1 + l2 + l3;
  const double I2 = l1 * l2 + l2 * l3 + l3 * l1;
  return {std::pow(J, -2.0 / 3.0) * I1, std::pow(J, -4.0 / 3.0) * I2, J};
}

/// Default six-term energy evaluated from principal stretches.
inline double energy6(const Eigen::Matrix3d& F, const Eigen::VectorXd& theta) {
  const auto inv = principal_invariants(F);
  const double a = inv.I1t - 3, c = inv.I2t - 3, v = inv.J - 1;
  const double q[6] = {a, c, a * a, a * c, a * a * a, v * v};
  double W = 0;
  for (int k = 0; k < 6; ++k) W += theta[k] * q[k];
  return W;
}

/// Connected components of the graph restricted to `active` vertices.
/// Returns a label per vertex (-1 for inactive), labels 0.. in discovery
/// order of the smallest vertex.
inline std::vector<int> components(const std::vector<std::vector<std::size_t>>& adj,
                                   const std::vector<char>& active) {
  std::vector<int> label(adj.size(), -1);
  int next = 0;
  for (std::size_t s = 0; s < adj.size(); ++s) {
    if (!active[s] || label[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    label[s] = next;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w : adj[v]) {
        if (active[w] && label[w] < 0) {
          label[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  return label;
}

/// Normal-equation least squares.
inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  return (A.transpose() * A).ldlt().solve(A.transpose() * b);
}

/// Composite trapezoid rule of f on [a, b] with n intervals.
inline double trapezoid(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n; ++i) s += f(a + i * h);
  return s * h;
}

}  // namespace oracle
