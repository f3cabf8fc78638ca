#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <pottsfit/sampler.hpp>
#include <pottsfit/structure.hpp>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace pottsfit;

TEST_CASE("generated distances") {
  const int d = 40;
  Eigen::MatrixXd D = gen_distances(d, 11);
  validate_distance_matrix(D);
  double sum = 0.0;
  int m = 0;
  for (int j = 0; j < d; ++j)
    for (int r = j + 1; r < d; ++r) {
      CHECK(D(j, r) > 0.0);
      CHECK(D(j, r) < 40.0);
      sum += D(j, r);
      ++m;
    }
  // 40*Beta(2,2): mean 20, sd = 40/sqrt(20)
  double se = (40.0 / std::sqrt(20.0)) / std::sqrt(static_cast<double>(m));
  CHECK(std::abs(sum / m - 20.0) < 3.0 * se);
  CHECK(gen_distances(d, 11) == D);  // seed determinism
  CHECK_THROWS(gen_distances(2, 1));
}

TEST_CASE("generated fields") {
  Eigen::MatrixXd theta = gen_theta(50, 10, 3);
  CHECK(theta.minCoeff() >= 0.0);
  CHECK(theta.maxCoeff() <= 2.0);
  double se = (2.0 / std::sqrt(12.0)) / std::sqrt(500.0);
  CHECK(std::abs(theta.mean() - 1.0) < 3.0 * se);
  CHECK(gen_theta(50, 10, 3) == theta);
}

TEST_CASE("M1 coupling generation") {
  const int d = 25, K = 7;
  Eigen::MatrixXd D = gen_distances(d, 5);
  SyntheticGroundTruth t = gen_coupling_m1(d, K, D, 17);
  CHECK(t.adjacency == t.adjacency.transpose().eval());
  int pairs = 0;
  for (int j = 0; j < d; ++j)
    for (int r = j + 1; r < d; ++r) {
      bool adj = t.adjacency(j, r) == 1;
      CHECK(adj == t.params.has_block(j, r));
      if (!adj) continue;
      ++pairs;
      Eigen::MatrixXd B = t.params.block(j, r);
      // entries confined to states 1..5, magnitudes below 2
      for (int k = 0; k < K; ++k)
        for (int l = 0; l < K; ++l) {
          if (k < 5 && l < 5) {
            CHECK(B(k, l) != 0.0);
            CHECK(std::abs(B(k, l)) < 2.0);
          } else {
            CHECK(B(k, l) == 0.0);
          }
        }
    }
  CHECK(pairs >= 1);
  // recorded sparsity matches the stored blocks
  for (int j = 0; j < d; ++j) {
    int groups = 0, elems = 0;
    for (int r = 0; r < d; ++r) {
      if (r == j || !t.params.has_block(j, r)) continue;
      ++groups;
      elems += static_cast<int>((t.params.block(j, r).array() != 0.0).count());
    }
    CHECK(t.group_sparsity[j] == groups);
    CHECK(t.element_sparsity[j] == elems);
  }
}

TEST_CASE("M1 connection rate is log(d)/(2d)") {
  const int d = 40;
  Eigen::MatrixXd D = gen_distances(d, 2);
  const double p = std::log(static_cast<double>(d)) / (2.0 * d);
  const int npairs = d * (d - 1) / 2;
  double total = 0.0;
  const int reps = 40;
  for (int rep = 0; rep < reps; ++rep)
    total += gen_coupling_m1(d, 20, D, 100 + rep).adjacency.cast<double>().sum() / 2;
  double mean = total / reps;
  double se = std::sqrt(npairs * p * (1 - p) / reps);
  CHECK(std::abs(mean - npairs * p) < 3.0 * se);
}

TEST_CASE("M2 coupling generation") {
  const int d = 20, K = 6;
  Eigen::MatrixXd D = gen_distances(d, 9);
  SUBCASE("tau zero disables all connections") {
    SyntheticGroundTruth t = gen_coupling_m2(d, K, D, 0.0, 3);
    CHECK(t.adjacency.sum() == 0);
    CHECK(t.params.pair_blocks().empty());
  }
  SUBCASE("row sums of unclipped probabilities equal tau") {
    for (double tau : {0.5, 1.5, 3.0}) {
      for (int j = 0; j < d; ++j) {
        Eigen::VectorXd row = m2_connection_row(D, j, tau);
        CHECK(row(j) == 0.0);
        CHECK(row.sum() == doctest::Approx(tau).epsilon(1e-12));
      }
    }
  }
  SUBCASE("entries live in the signed band") {
    SyntheticGroundTruth t = gen_coupling_m2(d, K, D, 3.0, 4);
    for (const auto& [key, B] : t.params.pair_blocks())
      for (int k = 0; k < 5; ++k)
        for (int l = 0; l < 5; ++l) {
          CHECK(std::abs(B(k, l)) >= 0.5);
          CHECK(std::abs(B(k, l)) <= 2.0);
        }
  }
}

TEST_CASE("gibbs sampling") {
  SUBCASE("independent sites match the softmax marginals") {
    const int d = 3, K = 2, n = 10000;
    PottsParams p(d, K);
    p.theta() << 0.3, -0.4, 1.0, 0.2, -0.6, 0.5;
    GibbsConfig cfg;
    cfg.seed = 99;
    cfg.burn_in = 50;
    cfg.thin = 2;  // sites are independent; thinning is immaterial here
    Alignment a = gibbs_sample(p, n, cfg);
    for (int j = 0; j < d; ++j) {
      Eigen::Vector3d expect;
      expect << 1.0, std::exp(p.theta()(j, 0)), std::exp(p.theta()(j, 1));
      expect /= expect.sum();
      Eigen::Vector3d count = Eigen::Vector3d::Zero();
      for (int i = 0; i < n; ++i) count(a.states(i, j)) += 1.0;
      for (int k = 0; k <= K; ++k) {
        double se = std::sqrt(expect(k) * (1 - expect(k)) / n);
        CHECK(std::abs(count(k) / n - expect(k)) < 3.5 * se);
      }
    }
  }
  SUBCASE("Ising pair joint matches enumeration") {
    PottsParams p(2, 1);
    p.theta() << 0.5, -0.3;
    Eigen::MatrixXd B(1, 1);
    B << 0.8;
    p.set_block(0, 1, B);
    oracle::RawPotts raw;
    raw.d = 2;
    raw.K = 1;
    raw.theta = p.theta();
    raw.coupling[{0, 1}] = B;
    std::vector<double> joint = oracle::enumerate_joint(raw);

    const int n = 20000;
    GibbsConfig cfg;
    cfg.seed = 12345;
    cfg.burn_in = 200;
    cfg.thin = 5;
    Alignment a = gibbs_sample(p, n, cfg);
    Eigen::Vector4d count = Eigen::Vector4d::Zero();
    for (int i = 0; i < n; ++i)
      count(oracle::index_of_state({a.states(i, 0), a.states(i, 1)}, 2)) += 1.0;
    for (int s = 0; s < 4; ++s) {
      double se = std::sqrt(joint[s] * (1 - joint[s]) / n);
      // thinning leaves a little autocorrelation; allow 4 sigma
      CHECK(std::abs(count(s) / n - joint[s]) < 4.0 * se);
    }
  }
  SUBCASE("fixed seed reproduces the sample") {
    PottsParams p(3, 2);
    p.theta() << 0.3, -0.4, 1.0, 0.2, -0.6, 0.5;
    GibbsConfig cfg;
    cfg.seed = 7;
    Alignment a = gibbs_sample(p, 50, cfg);
    Alignment b = gibbs_sample(p, 50, cfg);
    CHECK(a.states == b.states);
  }
  SUBCASE("all-reference initialization") {
    PottsParams p(3, 2);
    GibbsConfig cfg;
    cfg.init = GibbsInit::AllReference;
    cfg.burn_in = 0;
    cfg.thin = 1;
    Alignment a = gibbs_sample(p, 5, cfg);
    CHECK(a.count() == 5);
  }
}

TEST_CASE("single-site kernel leaves the enumerated joint invariant") {
  // pi' = sum_z pi(z) K_j(z -> z') for the site-j resampling kernel
  PottsParams p(3, 2);
  p.theta() << 0.4, -0.2, 0.9, 0.1, -0.5, 0.7;
  Eigen::MatrixXd B(2, 2);
  B << 0.6, -0.4, 0.2, 0.3;
  p.set_block(0, 2, B);
  Eigen::MatrixXd C(2, 2);
  C << -0.3, 0.5, 0.0, 0.2;
  p.set_block(0, 1, C);

  oracle::RawPotts raw;
  raw.d = 3;
  raw.K = 2;
  raw.theta = p.theta();
  raw.coupling[{0, 2}] = B;
  raw.coupling[{0, 1}] = C;
  std::vector<double> joint = oracle::enumerate_joint(raw);
  const int A = 3;
  const long total = 27;
  for (int j = 0; j < 3; ++j) {
    std::vector<double> next(total, 0.0);
    for (long s = 0; s < total; ++s) {
      std::vector<int> z = oracle::state_of_index(s, 3, A);
      Eigen::VectorXd cond = conditional_prob(p, j, z);
      for (int k = 0; k < A; ++k) {
        std::vector<int> z2 = z;
        z2[j] = k;
        next[oracle::index_of_state(z2, A)] += joint[s] * cond(k);
      }
    }
    for (long s = 0; s < total; ++s)
      CHECK(next[s] == doctest::Approx(joint[s]).epsilon(1e-10));
  }
}

TEST_CASE("synthetic dataset directory") {
  testutil::TempDir tmp("synth");
  const int d = 6, K = 5;
  Eigen::MatrixXd D = gen_distances(d, 1);
  SyntheticGroundTruth t = gen_coupling_m1(d, K, D, 2);
  t.params.theta() = gen_theta(d, K, 3);
  GibbsConfig cfg;
  cfg.seed = 4;
  cfg.burn_in = 20;
  cfg.thin = 2;
  Alignment data = gibbs_sample(t.params, 30, cfg);
  save_synthetic_dataset(t, data, tmp.path("ds"));
  Alignment back = parse_alignment(tmp.path("ds/alignment.csv"), AlignmentFormat::StateCsv,
                                   Alphabet::protein(), K + 1);
  CHECK(back.states == data.states);
  PottsParams truth = load_potts(tmp.path("ds/truth.potts"));
  CHECK(truth.theta() == t.params.theta());
  Eigen::MatrixXd Dback = read_matrix_csv(tmp.path("ds/distances.csv"));
  CHECK(Dback == t.distances);
  Eigen::MatrixXd Aback = read_matrix_csv(tmp.path("ds/adjacency.csv"));
  CHECK(Aback.cast<int>() == t.adjacency);
}
