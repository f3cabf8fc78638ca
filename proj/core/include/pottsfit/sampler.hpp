#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "pottsfit/alignment.hpp"
#include "pottsfit/model.hpp"

namespace pottsfit {

// Synthetic Potts instance with its generating metadata. adjacency(j, r) = 0
// implies the coupling block {j, r} is exactly zero; nonzero coupling
// entries are confined to states 1..5 on both sides.
struct SyntheticGroundTruth {
  PottsParams params;
  Eigen::MatrixXi adjacency;  // d x d symmetric 0/1, zero diagonal
  Eigen::MatrixXd distances;  // d x d
  std::vector<int> element_sparsity;  // per site: nonzero coefficient count
  std::vector<int> group_sparsity;    // per site: nonzero block count
  uint64_t seed = 0;
};

// Upper-triangle distances i.i.d. 40*Beta(2,2), mirrored, zero diagonal.
Eigen::MatrixXd gen_distances(int d, uint64_t seed);

// Field entries i.i.d. Unif(0, 2).
Eigen::MatrixXd gen_theta(int d, int K, uint64_t seed);

// Setting with distance-dependent signal strength: connections appear with
// probability log(d)/(2d); a present block gets entries
// exp(-D_jr^2 / MS_j) * Unif(±[0.5, 2]) for states 1..5, MS_j taken at the
// smaller site index. theta is left at zero for the caller to fill.
SyntheticGroundTruth gen_coupling_m1(int d, int K, const Eigen::MatrixXd& D,
                                     uint64_t seed);

// Setting with distance-dependent connection probability:
// p_jr = tau * exp(-D_jr^2/MS_j) / sum_{r' != j} exp(-D_jr'^2/MS_j), row sums
// equal tau by construction (clipped at 1 with a warning). Entries
// Unif(±[0.5, 2]) for states 1..5.
SyntheticGroundTruth gen_coupling_m2(int d, int K, const Eigen::MatrixXd& D,
                                     double tau, uint64_t seed);

// Row of unclipped M2 connection probabilities for site j (diagonal slot 0).
Eigen::VectorXd m2_connection_row(const Eigen::MatrixXd& D, int j, double tau);

enum class GibbsInit { RandomUniform, AllReference };

struct GibbsConfig {
  int burn_in = 200;  // sweeps discarded
  int thin = 10;      // sweeps between retained samples
  GibbsInit init = GibbsInit::RandomUniform;
  uint64_t seed = 0;
};

// Single-chain systematic-scan Gibbs sampler over the conditional
// distributions; one sweep resamples every site once in index order.
// Returns n integer-state sequences (numeric alphabet, state 0 = reference).
Alignment gibbs_sample(const PottsParams& truth, int n, const GibbsConfig& cfg);

// Dataset directory layout shared with the CLI: alignment.csv (integer
// states), truth.potts, distances.csv, adjacency.csv.
void save_synthetic_dataset(const SyntheticGroundTruth& truth, const Alignment& data,
                            const std::string& dir);

}  // namespace pottsfit
