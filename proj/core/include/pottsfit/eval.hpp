#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "pottsfit/model.hpp"
#include "pottsfit/sampler.hpp"

namespace pottsfit {

// Estimation / selection accuracy against a synthetic ground truth.
// Element-level counts range over all (j < r, k, l) coefficients,
// group-level counts over unordered site pairs. tpr is absent when the
// truth has no nonzeros; fdr of an empty discovery set is 0.
struct LevelCounts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<double> tpr() const {
    if (tp + fn == 0) return std::nullopt;
    return static_cast<double>(tp) / (tp + fn);
  }
  double fdr() const {
    return tp + fp == 0 ? 0.0 : static_cast<double>(fp) / (fp + tp);
  }
};

struct SelectionReport {
  double mse = 0.0;  // sum over sites of ||gamma_j* - gamma_j~||_2^2
  LevelCounts element;
  LevelCounts group;
};

SelectionReport selection_metrics(const PottsParams& estimate,
                                  const SyntheticGroundTruth& truth,
                                  double zero_tol = 1e-10);

void write_selection_report(const SelectionReport& r, const std::string& path);
// Mean MSE/TPR/FDR across replicates (missing TPRs skipped).
void write_aggregate_report(const std::vector<SelectionReport>& reps,
                            const std::string& path);

// Spearman rank correlation with mid-ranks for ties; absent when either
// argument is constant.
std::optional<double> spearman(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Energy change of every single-site substitution relative to the wild-type.
struct FitnessLandscape {
  Eigen::MatrixXd delta_e;              // d x K, state codes 1..K
  std::vector<std::string> site_label;  // "site{j}"
  std::vector<std::string> state_label; // per code symbol, landscape-wide only
                                        // meaningful per site; see CSV writer
};

FitnessLandscape landscape(const PottsParams& params);
// CSV "site,symbol,delta_e"; every alphabet symbol per site, wild-type cells 0.
void write_landscape_csv(const PottsParams& params, const std::string& path);

// K x K table gamma_{jr,kl} + theta_jk + theta_rl for one site pair.
Eigen::MatrixXd pair_dependency(const PottsParams& params, int j, int r);
// CSV "state_j,state_r,value" with alphabet symbols.
void write_pair_dependency_csv(const PottsParams& params, int j, int r,
                               const std::string& path);

// One single-site mutation paired with an experimental fitness value.
struct FitnessObservation {
  int site = 0;       // 0-based
  int state = 0;      // code 1..K
  double value = 0.0; // experimental measurement
};

struct FitnessBenchmark {
  std::optional<double> spearman_rho;
  std::vector<FitnessObservation> mutations;
  Eigen::VectorXd delta_e;      // predicted energy change per mutation
  std::vector<bool> rare_flag;  // mutation touches a rare-masked state
};

FitnessBenchmark fitness_benchmark(const PottsParams& params,
                                   const std::vector<FitnessObservation>& mutations);

// CSV "site,target_symbol,value" with 1-based sites; symbols resolved
// against the parameter file's alphabet and per-site wild-type.
std::vector<FitnessObservation> read_fitness_csv(const PottsParams& params,
                                                 const std::string& path);
void write_fitness_benchmark_csv(const PottsParams& params, const FitnessBenchmark& b,
                                 const std::string& path);

}  // namespace pottsfit
