#include "pottsfit/sampler.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "pottsfit/io_util.hpp"
#include "pottsfit/rng.hpp"
#include "pottsfit/structure.hpp"

namespace pottsfit {

namespace {
[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

constexpr int kCoupledStates = 5;  // nonzero entries confined to states 1..5

void fill_sparsity(SyntheticGroundTruth& t) {
  const int d = t.params.sites();
  t.element_sparsity.assign(d, 0);
  t.group_sparsity.assign(d, 0);
  for (const auto& [key, B] : t.params.pair_blocks()) {
    int nz = static_cast<int>((B.array() != 0.0).count());
    for (int site : {key.first, key.second}) {
      t.element_sparsity[site] += nz;
      t.group_sparsity[site] += 1;
    }
  }
}

}  // namespace

Eigen::MatrixXd gen_distances(int d, uint64_t seed) {
  if (d < 3) fail("gen_distances requires d >= 3");
  Rng rng(seed);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < d; ++j)
    for (int r = j + 1; r < d; ++r) D(j, r) = D(r, j) = 40.0 * beta22(rng);
  return D;
}

Eigen::MatrixXd gen_theta(int d, int K, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd theta(d, K);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < K; ++k) theta(j, k) = uniform(rng, 0.0, 2.0);
  return theta;
}

SyntheticGroundTruth gen_coupling_m1(int d, int K, const Eigen::MatrixXd& D,
                                     uint64_t seed) {
  if (K < kCoupledStates) fail("M1 needs K >= 5");
  validate_distance_matrix(D);
  if (D.rows() != d) fail("distance matrix dimension != d");
  Rng rng(seed);
  SyntheticGroundTruth t{PottsParams(d, K), Eigen::MatrixXi::Zero(d, d), D, {}, {}, seed};
  const double p = std::log(static_cast<double>(d)) / (2.0 * d);
  for (int j = 0; j < d; ++j) {
    double ms = site_normalizer(D, j);  // MS of the smaller index
    for (int r = j + 1; r < d; ++r) {
      if (uniform01(rng) >= p) continue;
      t.adjacency(j, r) = t.adjacency(r, j) = 1;
      double damp = std::exp(-D(j, r) * D(j, r) / ms);
      Eigen::MatrixXd B = Eigen::MatrixXd::Zero(K, K);
      for (int k = 0; k < kCoupledStates; ++k)
        for (int l = 0; l < kCoupledStates; ++l)
          B(k, l) = damp * uniform_signed_band(rng, 0.5, 2.0);
      t.params.set_block(j, r, B);
    }
  }
  fill_sparsity(t);
  return t;
}

Eigen::VectorXd m2_connection_row(const Eigen::MatrixXd& D, int j, double tau) {
  const int d = static_cast<int>(D.rows());
  double ms = site_normalizer(D, j);
  double denom = 0.0;
  for (int r = 0; r < d; ++r)
    if (r != j) denom += std::exp(-D(j, r) * D(j, r) / ms);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(d);
  for (int r = 0; r < d; ++r)
    if (r != j) p(r) = tau * std::exp(-D(j, r) * D(j, r) / ms) / denom;
  return p;
}

SyntheticGroundTruth gen_coupling_m2(int d, int K, const Eigen::MatrixXd& D,
                                     double tau, uint64_t seed) {
  if (K < kCoupledStates) fail("M2 needs K >= 5");
  if (tau < 0) fail("tau must be nonnegative");
  validate_distance_matrix(D);
  if (D.rows() != d) fail("distance matrix dimension != d");
  Rng rng(seed);
  SyntheticGroundTruth t{PottsParams(d, K), Eigen::MatrixXi::Zero(d, d), D, {}, {}, seed};
  bool clipped = false;
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd prow = m2_connection_row(D, j, tau);  // row of the smaller index
    for (int r = j + 1; r < d; ++r) {
      double p = prow(r);
      if (p > 1.0) {
        p = 1.0;
        clipped = true;
      }
      if (uniform01(rng) >= p) continue;
      t.adjacency(j, r) = t.adjacency(r, j) = 1;
      Eigen::MatrixXd B = Eigen::MatrixXd::Zero(K, K);
      for (int k = 0; k < kCoupledStates; ++k)
        for (int l = 0; l < kCoupledStates; ++l)
          B(k, l) = uniform_signed_band(rng, 0.5, 2.0);
      t.params.set_block(j, r, B);
    }
  }
  if (clipped)
    std::cerr << "warning: M2 connection probabilities clipped at 1 (tau too large)\n";
  fill_sparsity(t);
  return t;
}

Alignment gibbs_sample(const PottsParams& truth, int n, const GibbsConfig& cfg) {
  if (n < 1) fail("need n >= 1 samples");
  if (cfg.burn_in < 0 || cfg.thin < 1) fail("burn_in >= 0 and thin >= 1 required");
  const int d = truth.sites();
  const int K = truth.states();
  Rng rng(cfg.seed);

  std::vector<int> state(d, 0);
  if (cfg.init == GibbsInit::RandomUniform)
    for (int j = 0; j < d; ++j)
      state[j] = static_cast<int>(rng() % static_cast<uint64_t>(K + 1));

  Alignment out{Alphabet::numeric(K + 1), Eigen::MatrixXi(n, d), {}};
  auto sweep = [&]() {
    for (int j = 0; j < d; ++j) {
      Eigen::VectorXd p = conditional_prob(truth, j, state);
      double u = uniform01(rng);
      double acc = 0.0;
      int pick = K;
      for (int k = 0; k <= K; ++k) {
        acc += p(k);
        if (u < acc) {
          pick = k;
          break;
        }
      }
      state[j] = pick;
    }
  };

  for (int s = 0; s < cfg.burn_in; ++s) sweep();
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < cfg.thin; ++s) sweep();
    for (int j = 0; j < d; ++j) out.states(i, j) = state[j];
  }
  return out;
}

void save_synthetic_dataset(const SyntheticGroundTruth& truth, const Alignment& data,
                            const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  {
    std::ofstream out(base / "alignment.csv");
    if (!out) fail("cannot write alignment.csv under " + dir);
    for (int i = 0; i < data.count(); ++i) {
      for (int j = 0; j < data.length(); ++j)
        out << (j ? "," : "") << data.states(i, j);
      out << '\n';
    }
  }
  save_potts(truth.params, (base / "truth.potts").string());
  write_matrix_csv(truth.distances, (base / "distances.csv").string());
  write_matrix_csv(truth.adjacency.cast<double>(), (base / "adjacency.csv").string());
}

}  // namespace pottsfit
