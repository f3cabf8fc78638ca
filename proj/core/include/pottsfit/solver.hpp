#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pottsfit/alignment.hpp"
#include "pottsfit/model.hpp"
#include "pottsfit/structure.hpp"

namespace pottsfit {

enum class PenaltyKind { SparseGroup, LassoOnly, GroupOnly, Ridge };

PenaltyKind penalty_kind_from_string(const std::string& s);
std::string to_string(PenaltyKind k);

// Node-wise fit configuration. Sequence weights ride on the encoded
// alignment (EncodedAlignment::weights); lasso-only forces lambda_g = 0 and
// group-only forces lambda = 0 at validation time.
struct FitConfig {
  double lambda = 0.0;
  double lambda_g = 0.0;
  std::optional<StructureWeights> weights;  // group weights; absent = w_jr == 1
  PenaltyKind penalty_kind = PenaltyKind::SparseGroup;
  double ridge_lambda = 0.0;

  double tol_outer = 1e-5;   // relative objective change
  double tol_middle = 1e-5;  // max parameter change per block pass
  double tol_inner = 1e-7;   // within-block prox iteration change
  int max_outer = 200;
  int max_middle = 200;
  int max_inner = 1000;
  // First-order optimality gate appended to the objective-based stop; the
  // objective criterion alone leaves parameters far less accurate than the
  // gradients imply (flat likelihoods), so both must hold to declare
  // convergence.
  double kkt_tol = 5e-5;
  int max_backtrack = 30;

  FitConfig normalized() const;  // applies penalty_kind coupling, validates
  double group_weight(int j, int r) const;
};

struct SiteFit {
  int site = -1;
  SiteEstimate est;  // theta (K) and d block slots, exact zeros when inactive
  std::vector<double> objective_trace;  // one value per outer iteration
  std::vector<int> active_groups;       // sites r with a nonzero block
  std::vector<int> dropped_classes;     // response categories pinned to zero
  bool converged = false;
  bool stalled = false;  // line search exhausted before tolerances met
  int outer_iterations = 0;
  double kkt = std::numeric_limits<double>::quiet_NaN();
};

// Weighted negative log-likelihood of site j's multinomial regression,
// evaluated with max-subtracted log-sum-exp.
double site_nll(const SiteEstimate& par, const EncodedAlignment& enc, int j);

struct SiteGradient {
  Eigen::VectorXd theta;
  std::vector<Eigen::MatrixXd> blocks;  // d slots; [j] empty
};
SiteGradient site_nll_gradient(const SiteEstimate& par, const EncodedAlignment& enc,
                               int j);

// Coordinate-wise soft thresholding S(a, b).
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& a, double b);
Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& a, double b);

// Block screening rule: the group is set exactly to zero iff
// ||S(grad_at_zero, lambda)||_2 <= lambda_g * w. Groups with w == 0 are
// never screened by this rule.
bool screen_group(const Eigen::MatrixXd& grad_at_zero, double lambda, double lambda_g,
                  double w);

SiteFit fit_site(int j, const EncodedAlignment& enc, const FitConfig& cfg,
                 const SiteEstimate* warm_start = nullptr);

// Fits every site (optionally in parallel) and symmetrizes. Per-site
// diagnostics are returned through the optional out-parameter.
PottsParams fit_all(const EncodedAlignment& enc, const FitConfig& cfg, int threads = 1,
                    std::vector<SiteFit>* diagnostics = nullptr);

// Maximum violation of the subgradient optimality conditions of the fitted
// site problem (theta unpenalized; active/zero coordinate and group rules).
double kkt_residual(const SiteFit& fit, const EncodedAlignment& enc,
                    const FitConfig& cfg);

// Penalty grid {(i*2^j, (1-i)*2^j)}; with swap_assignment the roles of
// (lambda_g, lambda) are exchanged.
struct CvGrid {
  std::vector<double> mix;       // i values
  std::vector<double> exponent;  // j values
  int folds = 5;
  bool swap_assignment = false;

  static CvGrid paper_default();
  std::vector<std::pair<double, double>> points() const;  // (lambda_g, lambda)
};

struct CvEntry {
  double lambda_g, lambda;
  int fold;  // -1 marks the mean row
  double heldout_nll;
};

struct CvResult {
  double best_lambda_g = 0.0, best_lambda = 0.0;
  double best_score = 0.0;
  std::vector<CvEntry> table;
};

// 5-fold CV over the grid; held-out loss is the weighted deviance summed
// over all sites. Fold assignment is a seeded shuffle; ties break toward
// smaller lambda_g + lambda, then smaller lambda_g.
CvResult cross_validate(const EncodedAlignment& enc, const CvGrid& grid,
                        const FitConfig& cfg_template, uint64_t seed, int threads = 1);

void write_cv_table(const CvResult& cv, const std::string& path);
void write_fit_diagnostics(const std::vector<SiteFit>& fits, const std::string& path);

}  // namespace pottsfit
