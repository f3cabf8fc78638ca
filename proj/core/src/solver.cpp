#include "pottsfit/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <numeric>
#include <random>
#include <stdexcept>

#include "pottsfit/io_util.hpp"
#include "pottsfit/rng.hpp"

namespace pottsfit {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// log(1 + sum_k exp(eta_k)) with max subtraction
double lse_row(const Eigen::Ref<const Eigen::RowVectorXd>& eta) {
  double m = std::max(0.0, eta.maxCoeff());
  double s = std::exp(-m);
  for (Eigen::Index k = 0; k < eta.size(); ++k) s += std::exp(eta(k) - m);
  return m + std::log(s);
}

void softmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& eta,
                 Eigen::Ref<Eigen::RowVectorXd> prob) {
  double m = std::max(0.0, eta.maxCoeff());
  double denom = std::exp(-m);
  for (Eigen::Index k = 0; k < eta.size(); ++k) {
    prob(k) = std::exp(eta(k) - m);
    denom += prob(k);
  }
  prob /= denom;
}

}  // namespace

PenaltyKind penalty_kind_from_string(const std::string& s) {
  if (s == "sparse-group") return PenaltyKind::SparseGroup;
  if (s == "lasso" || s == "lasso-only") return PenaltyKind::LassoOnly;
  if (s == "group" || s == "group-only") return PenaltyKind::GroupOnly;
  if (s == "ridge") return PenaltyKind::Ridge;
  fail("unknown penalty kind: '" + s + "'");
}

std::string to_string(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::SparseGroup: return "sparse-group";
    case PenaltyKind::LassoOnly: return "lasso-only";
    case PenaltyKind::GroupOnly: return "group-only";
    case PenaltyKind::Ridge: return "ridge";
  }
  return "?";
}

FitConfig FitConfig::normalized() const {
  FitConfig c = *this;
  if (c.lambda < 0 || c.lambda_g < 0 || c.ridge_lambda < 0)
    fail("penalty levels must be nonnegative");
  if (c.tol_outer < 0 || c.tol_middle < 0 || c.tol_inner < 0)
    fail("tolerances must be nonnegative");
  switch (c.penalty_kind) {
    case PenaltyKind::LassoOnly: c.lambda_g = 0.0; break;
    case PenaltyKind::GroupOnly: c.lambda = 0.0; break;
    case PenaltyKind::Ridge: c.lambda = 0.0; c.lambda_g = 0.0; break;
    case PenaltyKind::SparseGroup: break;
  }
  return c;
}

double FitConfig::group_weight(int j, int r) const {
  return weights ? weights->w(j, r) : 1.0;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& a, double b) {
  if (b < 0) fail("soft_threshold needs b >= 0");
  return a.unaryExpr([b](double x) {
    double m = std::abs(x) - b;
    return m > 0 ? (x > 0 ? m : -m) : 0.0;
  });
}

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& a, double b) {
  if (b < 0) fail("soft_threshold needs b >= 0");
  return a.unaryExpr([b](double x) {
    double m = std::abs(x) - b;
    return m > 0 ? (x > 0 ? m : -m) : 0.0;
  });
}

bool screen_group(const Eigen::MatrixXd& grad_at_zero, double lambda, double lambda_g,
                  double w) {
  if (lambda < 0 || lambda_g < 0) fail("penalty levels must be nonnegative");
  if (w == 0.0) return false;  // zero-weight groups keep their element penalty only
  return soft_threshold(grad_at_zero, lambda).norm() <= lambda_g * w;
}

// ---------------------------------------------------------------------------
// Node-wise problem state. Holds the response/covariate view for one site,
// the effective sample weights after the rare-state exclusion rule, the
// pinned-coordinate masks, and the linear predictor / probability caches.
// ---------------------------------------------------------------------------
namespace {

class SiteProblem {
 public:
  SiteProblem(int j, const EncodedAlignment& enc, const FitConfig& cfg)
      : j_(j), enc_(enc), cfg_(cfg.normalized()) {
    n_ = enc.count();
    d_ = enc.length();
    K_ = enc.K;
    if (j < 0 || j >= d_) fail("site index out of range");
    if (enc.weights.size() != n_) fail("weight vector length != n");

    // Exclude observations whose response category is rare-masked; the
    // reference category keeps its rows (it carries no coefficients).
    w_ = enc.weights;
    for (int i = 0; i < n_; ++i) {
      int y = enc.codes(i, j_);
      if (y > 0 && enc.rare_code(j_, y)) w_(i) = 0.0;
    }
    wsum_ = w_.sum();

    // Response classes pinned to zero: rare-masked or unobserved in the
    // effective sample (an unpenalized theta would diverge otherwise).
    Eigen::VectorXd class_count = Eigen::VectorXd::Zero(K_);
    for (int i = 0; i < n_; ++i) {
      int y = enc_.codes(i, j_);
      if (y > 0) class_count(y - 1) += w_(i);
    }
    class_pinned_.assign(K_, 0);
    for (int k = 0; k < K_; ++k)
      if (enc.rare_code(j_, k + 1) || class_count(k) == 0.0) class_pinned_[k] = 1;

    // Covariate columns: weighted state counts give the curvature bound;
    // zero-count or rare-masked columns are pinned.
    col_count_.assign(d_, Eigen::VectorXd::Zero(K_));
    for (int r = 0; r < d_; ++r) {
      if (r == j_) continue;
      for (int i = 0; i < n_; ++i) {
        int c = enc_.codes(i, r);
        if (c > 0) col_count_[r](c - 1) += w_(i);
      }
    }
    col_pinned_.assign(d_, std::vector<char>(K_, 0));
    for (int r = 0; r < d_; ++r) {
      if (r == j_) continue;
      for (int l = 0; l < K_; ++l)
        if (enc.rare_code(r, l + 1) || col_count_[r](l) == 0.0) col_pinned_[r][l] = 1;
    }

    theta_ = Eigen::VectorXd::Zero(K_);
    gamma_.assign(d_, Eigen::MatrixXd::Zero(K_, K_));
    eta_ = RowMat::Zero(n_, K_);
    prob_ = RowMat::Zero(n_, K_);
    refresh_rows_all();
  }

  void load(const SiteEstimate& est) {
    theta_ = est.theta;
    for (int r = 0; r < d_; ++r) {
      if (r == j_ || r >= static_cast<int>(est.blocks.size())) continue;
      if (est.blocks[r].size() != 0) gamma_[r] = est.blocks[r];
    }
    sanitize();
    refresh_eta();
  }

  // Forces pinned coordinates to exact zero (warm starts may carry values).
  void sanitize() {
    for (int k = 0; k < K_; ++k)
      if (class_pinned_[k]) theta_(k) = 0.0;
    for (int r = 0; r < d_; ++r) {
      if (r == j_) continue;
      for (int k = 0; k < K_; ++k)
        if (class_pinned_[k]) gamma_[r].row(k).setZero();
      for (int l = 0; l < K_; ++l)
        if (col_pinned_[r][l]) gamma_[r].col(l).setZero();
    }
  }

  void refresh_eta() {
    for (int i = 0; i < n_; ++i) eta_.row(i) = theta_.transpose();
    for (int r = 0; r < d_; ++r) {
      if (r == j_) continue;
      if (gamma_[r].cwiseAbs().maxCoeff() == 0.0) continue;
      for (int i = 0; i < n_; ++i) {
        int c = enc_.codes(i, r);
        if (c > 0) eta_.row(i) += gamma_[r].col(c - 1).transpose();
      }
    }
    refresh_rows_all();
  }

  double objective() const { return nll() + penalty(); }

  double nll() const {
    double v = 0.0;
    for (int i = 0; i < n_; ++i) {
      if (w_(i) == 0.0) continue;
      double t = lse_row(eta_.row(i));
      int y = enc_.codes(i, j_);
      if (y > 0) t -= eta_(i, y - 1);
      v += w_(i) * t;
    }
    return v;
  }

  double penalty() const {
    double v = 0.0;
    for (int r = 0; r < d_; ++r) {
      if (r == j_) continue;
      const auto& B = gamma_[r];
      switch (cfg_.penalty_kind) {
        case PenaltyKind::Ridge:
          v += cfg_.ridge_lambda * B.squaredNorm();
          break;
        default:
          v += cfg_.lambda * B.cwiseAbs().sum() +
               cfg_.lambda_g * cfg_.group_weight(j_, r) * B.norm();
      }
    }
    return v;
  }

  // Gradient of the weighted nll block toward site r at the current state.
  Eigen::MatrixXd block_gradient(int r) const {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(K_, K_);
    for (int i = 0; i < n_; ++i) {
      double wi = w_(i);
      if (wi == 0.0) continue;
      int c = enc_.codes(i, r);
      if (c == 0) continue;
      int y = enc_.codes(i, j_);
      for (int k = 0; k < K_; ++k) {
        double res = prob_(i, k) - (y == k + 1 ? 1.0 : 0.0);
        G(k, c - 1) += wi * res;
      }
    }
    for (int k = 0; k < K_; ++k)
      if (class_pinned_[k]) G.row(k).setZero();
    for (int l = 0; l < K_; ++l)
      if (col_pinned_[r][l]) G.col(l).setZero();
    return G;
  }

  Eigen::VectorXd theta_gradient() const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(K_);
    for (int i = 0; i < n_; ++i) {
      double wi = w_(i);
      if (wi == 0.0) continue;
      int y = enc_.codes(i, j_);
      for (int k = 0; k < K_; ++k)
        g(k) += wi * (prob_(i, k) - (y == k + 1 ? 1.0 : 0.0));
    }
    for (int k = 0; k < K_; ++k)
      if (class_pinned_[k]) g(k) = 0.0;
    return g;
  }

  // Majorized step on the unpenalized intercepts; curvature sum(w)/2.
  double theta_step() {
    if (wsum_ == 0.0) return 0.0;
    Eigen::VectorXd g = theta_gradient();
    Eigen::VectorXd delta = -g / (0.5 * wsum_);
    for (int k = 0; k < K_; ++k)
      if (class_pinned_[k]) delta(k) = 0.0;
    double ch = delta.cwiseAbs().maxCoeff();
    if (ch == 0.0) return 0.0;
    theta_ += delta;
    for (int i = 0; i < n_; ++i) {
      eta_.row(i) += delta.transpose();
      if (w_(i) != 0.0) softmax_row(eta_.row(i), prob_.row(i));
    }
    return ch;
  }

  // One majorized proximal visit of the coupling block toward site r.
  // Returns the max absolute coefficient change.
  double block_visit(int r) {
    const Eigen::VectorXd& cnt = col_count_[r];
    double L = 0.0;
    for (int l = 0; l < K_; ++l)
      if (!col_pinned_[r][l]) L = std::max(L, 0.5 * cnt(l));
    if (L == 0.0) return 0.0;  // no usable covariate states at r

    Eigen::MatrixXd G = block_gradient(r);
    Eigen::MatrixXd& B = gamma_[r];
    const double wjr = cfg_.group_weight(j_, r);

    Eigen::MatrixXd V;
    if (cfg_.penalty_kind == PenaltyKind::Ridge) {
      V = Eigen::MatrixXd::Zero(K_, K_);
      for (int l = 0; l < K_; ++l) {
        if (col_pinned_[r][l]) continue;
        double h = 0.5 * cnt(l);
        for (int k = 0; k < K_; ++k) {
          if (class_pinned_[k]) continue;
          V(k, l) = (h * B(k, l) - G(k, l)) / (h + 2.0 * cfg_.ridge_lambda);
        }
      }
    } else {
      const double lam = cfg_.lambda;
      const double lam_g = cfg_.lambda_g * wjr;
      const bool at_zero = B.cwiseAbs().maxCoeff() == 0.0;
      if (at_zero && lam_g > 0.0 &&
          screen_group(G, lam, cfg_.lambda_g, wjr)) {
        return 0.0;  // printed screening rule; block stays exactly zero
      }
      V = B;
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(K_, K_);
      for (int l = 0; l < K_; ++l)
        if (!col_pinned_[r][l])
          for (int k = 0; k < K_; ++k) h(k, l) = 0.5 * cnt(l);
      for (int it = 0; it < cfg_.max_inner; ++it) {
        Eigen::MatrixXd U = V - (G + (V - B).cwiseProduct(h)) / L;
        Eigen::MatrixXd S = soft_threshold(U, lam / L);
        double gn = S.norm();
        double shrink;
        if (gn == 0.0)
          shrink = 0.0;
        else if (lam_g > 0.0)
          shrink = std::max(0.0, 1.0 - (lam_g / L) / gn);
        else
          shrink = 1.0;
        Eigen::MatrixXd Vn;
        if (shrink == 0.0)
          Vn = Eigen::MatrixXd::Zero(K_, K_);
        else
          Vn = shrink * S;
        double ch = (Vn - V).cwiseAbs().maxCoeff();
        V = std::move(Vn);
        if (ch < cfg_.tol_inner) break;
      }
    }

    Eigen::MatrixXd delta = V - B;
    double ch = delta.cwiseAbs().maxCoeff();
    if (ch == 0.0) return 0.0;
    B = V;
    for (int i = 0; i < n_; ++i) {
      int c = enc_.codes(i, r);
      if (c == 0) continue;
      eta_.row(i) += delta.col(c - 1).transpose();
      if (w_(i) != 0.0) softmax_row(eta_.row(i), prob_.row(i));
    }
    return ch;
  }

  // One pass over theta and a set of blocks; returns max coefficient change.
  template <class Pred>
  double pass(Pred visit_block) {
    double ch = theta_step();
    for (int r = 0; r < d_; ++r) {
      if (r == j_) continue;
      if (!visit_block(r)) continue;
      ch = std::max(ch, block_visit(r));
    }
    return ch;
  }

  bool block_active(int r) const {
    return r != j_ && gamma_[r].cwiseAbs().maxCoeff() != 0.0;
  }

  // Subgradient optimality residual at the current state.
  double kkt() const {
    double worst = 0.0;
    Eigen::VectorXd gt = theta_gradient();
    for (int k = 0; k < K_; ++k)
      if (!class_pinned_[k]) worst = std::max(worst, std::abs(gt(k)));
    for (int r = 0; r < d_; ++r) {
      if (r == j_) continue;
      Eigen::MatrixXd G = block_gradient(r);
      const Eigen::MatrixXd& B = gamma_[r];
      const double wjr = cfg_.group_weight(j_, r);
      if (cfg_.penalty_kind == PenaltyKind::Ridge) {
        for (int k = 0; k < K_; ++k)
          for (int l = 0; l < K_; ++l) {
            if (class_pinned_[k] || col_pinned_[r][l]) continue;
            worst = std::max(worst,
                             std::abs(G(k, l) + 2.0 * cfg_.ridge_lambda * B(k, l)));
          }
        continue;
      }
      double bnorm = B.norm();
      if (bnorm == 0.0) {
        double lam_g = cfg_.lambda_g * wjr;
        double slack = soft_threshold(G, cfg_.lambda).norm() - lam_g;
        worst = std::max(worst, std::max(0.0, slack));
      } else {
        for (int k = 0; k < K_; ++k)
          for (int l = 0; l < K_; ++l) {
            if (class_pinned_[k] || col_pinned_[r][l]) continue;
            double g = G(k, l);
            double b = B(k, l);
            if (b != 0.0) {
              double grad = g + cfg_.lambda * (b > 0 ? 1.0 : -1.0) +
                            cfg_.lambda_g * wjr * b / bnorm;
              worst = std::max(worst, std::abs(grad));
            } else {
              worst = std::max(worst, std::max(0.0, std::abs(g) - cfg_.lambda));
            }
          }
      }
    }
    return worst;
  }

  SiteEstimate extract() const {
    SiteEstimate est;
    est.theta = theta_;
    est.blocks.assign(d_, Eigen::MatrixXd());
    for (int r = 0; r < d_; ++r)
      if (block_active(r)) est.blocks[r] = gamma_[r];
    return est;
  }

  void restore(const Eigen::VectorXd& theta, const std::vector<Eigen::MatrixXd>& gamma) {
    theta_ = theta;
    gamma_ = gamma;
    refresh_eta();
  }

  int j_;
  const EncodedAlignment& enc_;
  FitConfig cfg_;
  int n_ = 0, d_ = 0, K_ = 0;
  Eigen::VectorXd w_;
  double wsum_ = 0.0;
  std::vector<char> class_pinned_;
  std::vector<std::vector<char>> col_pinned_;
  std::vector<Eigen::VectorXd> col_count_;
  Eigen::VectorXd theta_;
  std::vector<Eigen::MatrixXd> gamma_;
  RowMat eta_, prob_;

 private:
  void refresh_rows_all() {
    for (int i = 0; i < n_; ++i)
      if (w_(i) != 0.0) softmax_row(eta_.row(i), prob_.row(i));
  }
};

}  // namespace

double site_nll(const SiteEstimate& par, const EncodedAlignment& enc, int j) {
  const int n = enc.count();
  const int d = enc.length();
  const int K = enc.K;
  if (par.theta.size() != K) fail("theta dimension mismatch");
  double v = 0.0;
  Eigen::RowVectorXd eta(K);
  for (int i = 0; i < n; ++i) {
    double wi = enc.weights(i);
    if (wi == 0.0) continue;
    eta = par.theta.transpose();
    for (int r = 0; r < d; ++r) {
      if (r == j || r >= static_cast<int>(par.blocks.size())) continue;
      const auto& B = par.blocks[r];
      if (B.size() == 0) continue;
      int c = enc.codes(i, r);
      if (c > 0) eta += B.col(c - 1).transpose();
    }
    double t = lse_row(eta);
    int y = enc.codes(i, j);
    if (y > 0) t -= eta(y - 1);
    v += wi * t;
  }
  return v;
}

SiteGradient site_nll_gradient(const SiteEstimate& par, const EncodedAlignment& enc,
                               int j) {
  const int n = enc.count();
  const int d = enc.length();
  const int K = enc.K;
  if (par.theta.size() != K) fail("theta dimension mismatch");
  SiteGradient g;
  g.theta = Eigen::VectorXd::Zero(K);
  g.blocks.assign(d, Eigen::MatrixXd::Zero(K, K));
  g.blocks[j].resize(0, 0);
  Eigen::RowVectorXd eta(K), prob(K);
  for (int i = 0; i < n; ++i) {
    double wi = enc.weights(i);
    if (wi == 0.0) continue;
    eta = par.theta.transpose();
    for (int r = 0; r < d; ++r) {
      if (r == j || r >= static_cast<int>(par.blocks.size())) continue;
      const auto& B = par.blocks[r];
      if (B.size() == 0) continue;
      int c = enc.codes(i, r);
      if (c > 0) eta += B.col(c - 1).transpose();
    }
    softmax_row(eta, prob);
    int y = enc.codes(i, j);
    for (int k = 0; k < K; ++k) {
      double res = wi * (prob(k) - (y == k + 1 ? 1.0 : 0.0));
      g.theta(k) += res;
      for (int r = 0; r < d; ++r) {
        if (r == j) continue;
        int c = enc.codes(i, r);
        if (c > 0) g.blocks[r](k, c - 1) += res;
      }
    }
  }
  return g;
}

SiteFit fit_site(int j, const EncodedAlignment& enc, const FitConfig& cfg,
                 const SiteEstimate* warm_start) {
  SiteProblem prob(j, enc, cfg);
  const FitConfig& c = prob.cfg_;
  if (warm_start) prob.load(*warm_start);

  SiteFit fit;
  fit.site = j;
  for (int k = 0; k < prob.K_; ++k)
    if (prob.class_pinned_[k]) fit.dropped_classes.push_back(k + 1);

  double obj = prob.objective();
  fit.objective_trace.push_back(obj);
  if (!std::isfinite(obj)) fail("site " + std::to_string(j) + ": non-finite objective");

  for (int outer = 0; outer < c.max_outer; ++outer) {
    fit.outer_iterations = outer + 1;
    const Eigen::VectorXd theta0 = prob.theta_;
    const std::vector<Eigen::MatrixXd> gamma0 = prob.gamma_;

    // Middle loop: full passes with active-set refinement in between.
    int passes = 0;
    while (passes < c.max_middle) {
      double ch = prob.pass([](int) { return true; });
      ++passes;
      if (ch < c.tol_middle) break;
      while (passes < c.max_middle) {
        double ca = prob.pass([&](int r) { return prob.block_active(r); });
        ++passes;
        if (ca < c.tol_middle) break;
      }
    }

    double obj_new = prob.objective();
    if (!std::isfinite(obj_new))
      fail("site " + std::to_string(j) +
           ": objective diverged; consider lowering the step size via tighter "
           "tolerances or larger penalties");

    if (obj_new > obj) {
      // The majorized updates cannot increase the objective in exact
      // arithmetic; treat any increase as round-off and damp toward the
      // new iterate until the objective stops growing.
      double t = 1.0;
      Eigen::VectorXd theta_new = prob.theta_;
      std::vector<Eigen::MatrixXd> gamma_new = prob.gamma_;
      bool accepted = false;
      for (int bt = 0; bt < c.max_backtrack; ++bt) {
        t *= 0.5;
        Eigen::VectorXd theta_t = theta0 + t * (theta_new - theta0);
        std::vector<Eigen::MatrixXd> gamma_t = gamma0;
        for (size_t r = 0; r < gamma_t.size(); ++r)
          gamma_t[r] += t * (gamma_new[r] - gamma0[r]);
        prob.restore(theta_t, gamma_t);
        obj_new = prob.objective();
        if (obj_new < obj) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        prob.restore(theta0, gamma0);
        fit.stalled = true;
        fit.objective_trace.push_back(obj);
        break;
      }
    }

    fit.objective_trace.push_back(obj_new);
    double rel = (obj - obj_new) / std::max(1.0, std::abs(obj));
    obj = obj_new;
    if (rel < c.tol_outer) {
      double kk = prob.kkt();
      if (kk <= c.kkt_tol || prob.wsum_ == 0.0) {
        fit.converged = true;
        fit.kkt = kk;
        break;
      }
    }
  }

  if (std::isnan(fit.kkt)) fit.kkt = prob.kkt();
  fit.est = prob.extract();
  for (int r = 0; r < prob.d_; ++r)
    if (prob.block_active(r)) fit.active_groups.push_back(r);
  return fit;
}

namespace {

// Runs fn(j) for every j in [0, d) across `threads` workers; blocks until done.
void parallel_sites(int d, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, threads);
  if (threads == 1) {
    for (int j = 0; j < d; ++j) fn(j);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int j = next.fetch_add(1);
      if (j >= d) return;
      fn(j);
    }
  };
  std::vector<std::future<void>> futs;
  for (int t = 0; t < threads; ++t)
    futs.push_back(std::async(std::launch::async, worker));
  for (auto& f : futs) f.get();
}

}  // namespace

PottsParams fit_all(const EncodedAlignment& enc, const FitConfig& cfg, int threads,
                    std::vector<SiteFit>* diagnostics) {
  const int d = enc.length();
  std::vector<SiteFit> fits(d);
  std::vector<std::string> errors(d);
  parallel_sites(d, threads, [&](int j) {
    try {
      fits[j] = fit_site(j, enc, cfg);
    } catch (const std::exception& e) {
      errors[j] = e.what();
    }
  });
  for (int j = 0; j < d; ++j)
    if (!errors[j].empty())
      fail("site " + std::to_string(j) + ": " + errors[j]);

  std::vector<SiteEstimate> ests;
  ests.reserve(d);
  for (auto& f : fits) ests.push_back(f.est);
  PottsParams p = symmetrize(ests);

  p.alphabet.clear();
  for (int s = 0; s < enc.alphabet.size(); ++s)
    p.alphabet.push_back(enc.alphabet.symbol(s));
  p.wildtype = enc.reference;
  p.rare = MaskMatrix::Zero(d, enc.K + 1);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k <= enc.K; ++k) p.rare(j, k) = enc.rare_code(j, k) ? 1 : 0;

  if (diagnostics) *diagnostics = std::move(fits);
  return p;
}

double kkt_residual(const SiteFit& fit, const EncodedAlignment& enc,
                    const FitConfig& cfg) {
  SiteProblem prob(fit.site, enc, cfg);
  prob.load(fit.est);
  return prob.kkt();
}

CvGrid CvGrid::paper_default() {
  CvGrid g;
  g.mix = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  g.exponent = {-5, -4, -3, -2, -1, -0.5, 0, 0.5, 1, 2};
  g.folds = 5;
  return g;
}

std::vector<std::pair<double, double>> CvGrid::points() const {
  std::vector<std::pair<double, double>> pts;
  for (double j : exponent) {
    double total = std::pow(2.0, j);
    for (double i : mix) {
      double a = i * total, b = (1.0 - i) * total;
      if (swap_assignment) std::swap(a, b);
      pts.emplace_back(a, b);  // (lambda_g, lambda)
    }
  }
  return pts;
}

CvResult cross_validate(const EncodedAlignment& enc, const CvGrid& grid,
                        const FitConfig& cfg_template, uint64_t seed, int threads) {
  const int n = enc.count();
  const int d = enc.length();
  if (grid.folds < 2) fail("need at least 2 folds");
  if (n < grid.folds) fail("need n >= folds");

  // Seeded shuffle, then round-robin fold assignment.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold_of(n);
  for (int pos = 0; pos < n; ++pos) fold_of[order[pos]] = pos % grid.folds;

  auto pts = grid.points();
  if (pts.empty()) fail("empty CV grid");
  // Path order: strong penalties first so warm starts relax along the path.
  std::vector<int> path(pts.size());
  std::iota(path.begin(), path.end(), 0);
  std::stable_sort(path.begin(), path.end(), [&](int a, int b) {
    double ta = pts[a].first + pts[a].second, tb = pts[b].first + pts[b].second;
    if (ta != tb) return ta > tb;
    return pts[a].first > pts[b].first;
  });

  Eigen::MatrixXd heldout(pts.size(), grid.folds);
  for (int f = 0; f < grid.folds; ++f) {
    std::vector<int> train_rows, test_rows;
    for (int i = 0; i < n; ++i)
      (fold_of[i] == f ? test_rows : train_rows).push_back(i);
    EncodedAlignment train = enc.subset(train_rows);
    EncodedAlignment test = enc.subset(test_rows);

    std::vector<SiteEstimate> warm(d);
    std::vector<char> has_warm(d, 0);
    for (int pi : path) {
      FitConfig cfg = cfg_template;
      cfg.lambda_g = pts[pi].first;
      cfg.lambda = pts[pi].second;
      cfg = cfg.normalized();
      std::vector<double> site_loss(d, 0.0);
      std::vector<std::string> errors(d);
      parallel_sites(d, threads, [&](int j) {
        try {
          SiteFit fit = fit_site(j, train, cfg, has_warm[j] ? &warm[j] : nullptr);
          warm[j] = fit.est;
          site_loss[j] = site_nll(fit.est, test, j);
        } catch (const std::exception& e) {
          errors[j] = e.what();
        }
      });
      for (int j = 0; j < d; ++j)
        if (!errors[j].empty())
          fail("cv fold " + std::to_string(f) + ", site " + std::to_string(j) + ": " +
               errors[j]);
      for (int j = 0; j < d; ++j) has_warm[j] = 1;
      heldout(pi, f) = std::accumulate(site_loss.begin(), site_loss.end(), 0.0);
    }
  }

  CvResult result;
  int best = -1;
  for (int pi = 0; pi < static_cast<int>(pts.size()); ++pi) {
    for (int f = 0; f < grid.folds; ++f)
      result.table.push_back({pts[pi].first, pts[pi].second, f, heldout(pi, f)});
    double mean = heldout.row(pi).mean();
    result.table.push_back({pts[pi].first, pts[pi].second, -1, mean});
    if (best < 0) {
      best = pi;
      continue;
    }
    double bm = heldout.row(best).mean();
    auto total = [&](int idx) { return pts[idx].first + pts[idx].second; };
    if (mean < bm ||
        (mean == bm && (total(pi) < total(best) ||
                        (total(pi) == total(best) && pts[pi].first < pts[best].first))))
      best = pi;
  }
  result.best_lambda_g = pts[best].first;
  result.best_lambda = pts[best].second;
  result.best_score = heldout.row(best).mean();
  return result;
}

void write_cv_table(const CvResult& cv, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open for writing: " + path);
  out << "lambda_g,lambda,fold,heldout_nll\n";
  for (const auto& e : cv.table) {
    out << fmt_full(e.lambda_g) << ',' << fmt_full(e.lambda) << ',';
    if (e.fold < 0)
      out << "mean";
    else
      out << e.fold;
    out << ',' << fmt_full(e.heldout_nll) << '\n';
  }
}

void write_fit_diagnostics(const std::vector<SiteFit>& fits, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open for writing: " + path);
  out << "[\n";
  for (size_t j = 0; j < fits.size(); ++j) {
    const auto& f = fits[j];
    out << "  {\"site\": " << f.site << ", \"converged\": " << (f.converged ? "true" : "false")
        << ", \"stalled\": " << (f.stalled ? "true" : "false")
        << ", \"outer_iterations\": " << f.outer_iterations
        << ", \"active_groups\": " << f.active_groups.size()
        << ", \"dropped_classes\": " << f.dropped_classes.size()
        << ", \"kkt_residual\": " << fmt_full(f.kkt) << ", \"objective_trace\": [";
    for (size_t t = 0; t < f.objective_trace.size(); ++t)
      out << (t ? "," : "") << fmt_full(f.objective_trace[t]);
    out << "]}" << (j + 1 < fits.size() ? "," : "") << "\n";
  }
  out << "]\n";
}

}  // namespace pottsfit
