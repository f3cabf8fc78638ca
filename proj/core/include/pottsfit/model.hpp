#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "pottsfit/alignment.hpp"

namespace pottsfit {

// Per-site raw estimate from one node-wise regression. blocks has one slot
// per site; blocks[r] is the K x K coupling block toward site r (entry (k-1,
// l-1) pairs state k at the fitted site with state l at r). An empty matrix
// means an exactly-zero block; the slot for the fitted site itself is unused.
struct SiteEstimate {
  Eigen::VectorXd theta;
  std::vector<Eigen::MatrixXd> blocks;
};

// Potts parameters under the reference-state convention: state 0 at each
// site (the wild-type) has zero field and zero couplings, so only states
// 1..K carry parameters. Couplings are stored once per unordered pair
// {j < r}; the transposed view serves the other orientation.
class PottsParams {
 public:
  PottsParams(int d, int K);

  int sites() const { return d_; }
  int states() const { return K_; }  // non-reference states per site

  // k, l are state codes in 0..K; any index 0 contributes zero.
  double theta_at(int j, int k) const;
  double gamma_at(int j, int r, int k, int l) const;

  Eigen::MatrixXd& theta() { return theta_; }
  const Eigen::MatrixXd& theta() const { return theta_; }

  // B(k-1, l-1) couples state k at j with state l at r; stored under the
  // unordered key, transposed when j > r. An all-zero B erases the block.
  void set_block(int j, int r, const Eigen::MatrixXd& B);
  // Oriented copy for pair (j, r); zero matrix when no block is stored.
  Eigen::MatrixXd block(int j, int r) const;
  bool has_block(int j, int r) const;

  const std::map<std::pair<int, int>, Eigen::MatrixXd>& pair_blocks() const {
    return gamma_;
  }

  struct Neighbor {
    int site;
    const Eigen::MatrixXd* block;  // oriented so rows index states at the owner
    bool transposed;
  };
  const std::vector<Neighbor>& neighbors(int j) const;

  // Symbol metadata so mutation specs and landscapes can speak symbols.
  std::vector<std::string> alphabet;  // K+1 tokens; index = alphabet order
  std::vector<int> wildtype;          // per-site alphabet index of state 0
  MaskMatrix rare;                    // optional d x (K+1) code-indexed flags

  bool rare_state(int j, int code) const;

 private:
  int d_, K_;
  Eigen::MatrixXd theta_;  // d x K
  std::map<std::pair<int, int>, Eigen::MatrixXd> gamma_;
  mutable std::vector<std::vector<Neighbor>> neighbor_index_;
  mutable bool index_dirty_ = true;
  void rebuild_index() const;
};

// Evolutionary statistical energy of a full state assignment (codes 0..K).
double energy(const PottsParams& p, const std::vector<int>& z);

// Energy change of a single mutation on the wild-type background; with the
// reference convention the coupling cross terms vanish and this is theta_jk.
double delta_e_single(const PottsParams& p, int j, int k);

struct MutationSpec {
  // (site, target state code); sites distinct, codes in 1..K.
  std::vector<std::pair<int, int>> targets;
  void validate(int d, int K) const;
};

// Energy change of a multi-site mutation against an arbitrary background;
// empty background means the wild-type (all reference states).
double delta_e_multi(const PottsParams& p, const MutationSpec& m,
                     const std::vector<int>& background = {});

// Conditional distribution of site j given the other sites' states
// (context[j] is ignored). Returns K+1 probabilities summing to 1.
Eigen::VectorXd conditional_prob(const PottsParams& p, int j,
                                 const std::vector<int>& context);

// Averages the two node-wise estimates of every unordered pair.
PottsParams symmetrize(const std::vector<SiteEstimate>& site_fits);

// Text serialization: header lines (d, K, alphabet, wildtype), then
// "theta j k value" / "gamma j r k l value" for nonzero entries and
// optional "rare j k" flags. Sites 0-based, states 1..K. Lossless.
void save_potts(const PottsParams& p, const std::string& path);
PottsParams load_potts(const std::string& path);

}  // namespace pottsfit
