// Test-only reference implementations, written straight from the defining
// formulas and kept independent of the library code paths they check.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <vector>

namespace oracle {

// Raw Potts tables for a small instance: theta(j, k-1), coupling[(j,r)](k-1,l-1)
// for j < r, state 0 carrying no parameters.
struct RawPotts {
  int d = 0, K = 0;
  Eigen::MatrixXd theta;
  std::map<std::pair<int, int>, Eigen::MatrixXd> coupling;

  double coupling_at(int j, int r, int k, int l) const {
    if (k == 0 || l == 0) return 0.0;
    if (j > r) {
      std::swap(j, r);
      std::swap(k, l);
    }
    auto it = coupling.find({j, r});
    return it == coupling.end() ? 0.0 : it->second(k - 1, l - 1);
  }
};

// Energy computed directly from the defining double sum.
inline double energy(const RawPotts& p, const std::vector<int>& z) {
  double e = 0.0;
  for (int j = 0; j < p.d; ++j)
    if (z[j] > 0) e += p.theta(j, z[j] - 1);
  for (int j = 0; j < p.d; ++j)
    for (int r = j + 1; r < p.d; ++r) e += p.coupling_at(j, r, z[j], z[r]);
  return e;
}

// Full joint over all (K+1)^d states by enumeration.
inline std::vector<double> enumerate_joint(const RawPotts& p) {
  const int A = p.K + 1;
  long total = 1;
  for (int j = 0; j < p.d; ++j) total *= A;
  std::vector<double> logp(total);
  std::vector<int> z(p.d, 0);
  double maxe = -1e300;
  for (long s = 0; s < total; ++s) {
    long rem = s;
    for (int j = 0; j < p.d; ++j) {
      z[j] = static_cast<int>(rem % A);
      rem /= A;
    }
    logp[s] = energy(p, z);
    maxe = std::max(maxe, logp[s]);
  }
  double zsum = 0.0;
  for (double& v : logp) {
    v = std::exp(v - maxe);
    zsum += v;
  }
  for (double& v : logp) v /= zsum;
  return logp;
}

inline std::vector<int> state_of_index(long s, int d, int A) {
  std::vector<int> z(d);
  for (int j = 0; j < d; ++j) {
    z[j] = static_cast<int>(s % A);
    s /= A;
  }
  return z;
}

inline long index_of_state(const std::vector<int>& z, int A) {
  long s = 0;
  for (int j = static_cast<int>(z.size()) - 1; j >= 0; --j) s = s * A + z[j];
  return s;
}

// Naive weighted multinomial nll for one site, no max subtraction.
inline double naive_site_nll(const Eigen::VectorXd& theta,
                             const std::vector<Eigen::MatrixXd>& blocks,
                             const Eigen::MatrixXi& codes, int j,
                             const Eigen::VectorXd& w) {
  const int n = static_cast<int>(codes.rows());
  const int d = static_cast<int>(codes.cols());
  const int K = static_cast<int>(theta.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> eta(K);
    for (int k = 0; k < K; ++k) {
      eta[k] = theta(k);
      for (int r = 0; r < d; ++r) {
        if (r == j || blocks[r].size() == 0) continue;
        int c = codes(i, r);
        if (c > 0) eta[k] += blocks[r](k, c - 1);
      }
    }
    double denom = 1.0;
    for (int k = 0; k < K; ++k) denom += std::exp(eta[k]);
    double term = std::log(denom);
    int y = codes(i, j);
    if (y > 0) term -= eta[y - 1];
    total += w(i) * term;
  }
  return total;
}

// Central finite differences of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double orig = x(i);
    xp(i) = orig + h;
    double fp = f(xp);
    xp(i) = orig - h;
    double fm = f(xp);
    xp(i) = orig;
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& x, double h = 1e-4) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd H(n, n);
  Eigen::VectorXd xp = x;
  double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = i; k < n; ++k) {
      if (i == k) {
        xp(i) = x(i) + h;
        double fp = f(xp);
        xp(i) = x(i) - h;
        double fm = f(xp);
        xp(i) = x(i);
        H(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
      } else {
        xp(i) = x(i) + h;
        xp(k) = x(k) + h;
        double fpp = f(xp);
        xp(k) = x(k) - h;
        double fpm = f(xp);
        xp(i) = x(i) - h;
        double fmm = f(xp);
        xp(k) = x(k) + h;
        double fmp = f(xp);
        xp(i) = x(i);
        xp(k) = x(k);
        H(i, k) = H(k, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
      }
    }
  }
  return H;
}

// Generic unpenalized minimizer: damped Newton on finite-difference
// derivatives. Only suitable for small, smooth, well-conditioned problems.
inline Eigen::VectorXd newton_minimize(
    const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
    int max_iter = 200, double grad_tol = 1e-9) {
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd g = fd_gradient(f, x, 1e-6);
    if (g.cwiseAbs().maxCoeff() < grad_tol) break;
    Eigen::MatrixXd H = fd_hessian(f, x);
    // mild ridge so early iterations stay decently conditioned
    H.diagonal().array() += 1e-9;
    Eigen::VectorXd step = H.ldlt().solve(-g);
    double fx = f(x);
    double t = 1.0;
    while (t > 1e-8 && f(x + t * step) > fx) t *= 0.5;
    x += t * step;
  }
  return x;
}

}  // namespace oracle
