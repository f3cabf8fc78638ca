#include "pottsfit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "pottsfit/io_util.hpp"

namespace pottsfit {

namespace {
[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string opt_str(const std::optional<double>& v) {
  return v ? fmt_full(*v) : "null";
}
}  // namespace

SelectionReport selection_metrics(const PottsParams& estimate,
                                  const SyntheticGroundTruth& truth,
                                  double zero_tol) {
  const PottsParams& t = truth.params;
  if (estimate.sites() != t.sites() || estimate.states() != t.states())
    fail("estimate and truth dimensions differ");
  const int d = t.sites();
  const int K = t.states();

  SelectionReport rep;
  for (int j = 0; j < d; ++j)
    for (int r = j + 1; r < d; ++r) {
      Eigen::MatrixXd E = estimate.block(j, r);
      Eigen::MatrixXd T = t.block(j, r);
      // each unordered pair appears in both sites' vectors
      rep.mse += 2.0 * (E - T).squaredNorm();
      bool est_grp = E.norm() > zero_tol;
      bool tru_grp = T.norm() > zero_tol;
      rep.group.tp += est_grp && tru_grp;
      rep.group.fp += est_grp && !tru_grp;
      rep.group.fn += !est_grp && tru_grp;
      rep.group.tn += !est_grp && !tru_grp;
      for (int k = 0; k < K; ++k)
        for (int l = 0; l < K; ++l) {
          bool e = std::abs(E(k, l)) > zero_tol;
          bool tt = std::abs(T(k, l)) > zero_tol;
          rep.element.tp += e && tt;
          rep.element.fp += e && !tt;
          rep.element.fn += !e && tt;
          rep.element.tn += !e && !tt;
        }
    }
  return rep;
}

namespace {

void write_level(std::ofstream& out, const char* name, const LevelCounts& c) {
  out << "  \"" << name << "\": {\"tp\": " << c.tp << ", \"fp\": " << c.fp
      << ", \"fn\": " << c.fn << ", \"tn\": " << c.tn
      << ", \"tpr\": " << opt_str(c.tpr()) << ", \"fdr\": " << fmt_full(c.fdr())
      << "}";
}

}  // namespace

void write_selection_report(const SelectionReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open for writing: " + path);
  out << "{\n  \"mse\": " << fmt_full(r.mse) << ",\n";
  write_level(out, "element", r.element);
  out << ",\n";
  write_level(out, "group", r.group);
  out << "\n}\n";
}

void write_aggregate_report(const std::vector<SelectionReport>& reps,
                            const std::string& path) {
  if (reps.empty()) fail("no replicates to aggregate");
  std::ofstream out(path);
  if (!out) fail("cannot open for writing: " + path);
  auto mean_of = [&](auto get) -> std::string {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : reps) {
      std::optional<double> v = get(r);
      if (v) {
        sum += *v;
        ++count;
      }
    }
    if (count == 0) return "null";
    return fmt_full(sum / count);
  };
  using R = const SelectionReport&;
  out << "{\n  \"replicates\": " << reps.size() << ",\n";
  out << "  \"mean_mse\": " << mean_of([](R r) { return std::optional<double>(r.mse); })
      << ",\n";
  out << "  \"mean_tpr\": " << mean_of([](R r) { return r.element.tpr(); }) << ",\n";
  out << "  \"mean_fdr\": "
      << mean_of([](R r) { return std::optional<double>(r.element.fdr()); }) << ",\n";
  out << "  \"mean_tpr_g\": " << mean_of([](R r) { return r.group.tpr(); }) << ",\n";
  out << "  \"mean_fdr_g\": "
      << mean_of([](R r) { return std::optional<double>(r.group.fdr()); }) << "\n}\n";
}

std::optional<double> spearman(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.size();
  if (n != y.size()) fail("spearman needs equal-length vectors");
  if (n < 2) fail("spearman needs at least 2 observations");

  auto midranks = [](const Eigen::VectorXd& v) {
    const Eigen::Index m = v.size();
    std::vector<int> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v(a) < v(b); });
    Eigen::VectorXd rank(m);
    Eigen::Index i = 0;
    while (i < m) {
      Eigen::Index j = i;
      while (j + 1 < m && v(idx[j + 1]) == v(idx[i])) ++j;
      double mid = 0.5 * (i + j) + 1.0;  // average of 1-based positions
      for (Eigen::Index t = i; t <= j; ++t) rank(idx[t]) = mid;
      i = j + 1;
    }
    return rank;
  };

  Eigen::VectorXd rx = midranks(x), ry = midranks(y);
  double mx = rx.mean(), my = ry.mean();
  double sx = (rx.array() - mx).matrix().norm();
  double sy = (ry.array() - my).matrix().norm();
  if (sx == 0.0 || sy == 0.0) return std::nullopt;  // constant input
  double cov = ((rx.array() - mx) * (ry.array() - my)).sum();
  return cov / (sx * sy);
}

FitnessLandscape landscape(const PottsParams& params) {
  const int d = params.sites();
  const int K = params.states();
  FitnessLandscape ls;
  ls.delta_e.resize(d, K);
  for (int j = 0; j < d; ++j) {
    ls.site_label.push_back("site" + std::to_string(j));
    for (int k = 1; k <= K; ++k) ls.delta_e(j, k - 1) = delta_e_single(params, j, k);
  }
  for (int k = 1; k <= K; ++k) ls.state_label.push_back("state" + std::to_string(k));
  return ls;
}

void write_landscape_csv(const PottsParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open for writing: " + path);
  out << "site,symbol,delta_e\n";
  const int A = params.states() + 1;
  for (int j = 0; j < params.sites(); ++j) {
    for (int s = 0; s < A; ++s) {
      int wt = params.wildtype[j];
      int code = s == wt ? 0 : (s < wt ? s : s - 1) + 1;
      out << j + 1 << ',' << params.alphabet[s] << ','
          << fmt_full(delta_e_single(params, j, code)) << '\n';
    }
  }
}

Eigen::MatrixXd pair_dependency(const PottsParams& params, int j, int r) {
  if (j == r) fail("pair_dependency needs two distinct sites");
  const int K = params.states();
  Eigen::MatrixXd T(K, K);
  for (int k = 1; k <= K; ++k)
    for (int l = 1; l <= K; ++l)
      T(k - 1, l - 1) =
          params.gamma_at(j, r, k, l) + params.theta_at(j, k) + params.theta_at(r, l);
  return T;
}

namespace {
std::string code_symbol(const PottsParams& p, int site, int code) {
  int wt = p.wildtype[site];
  int s = code == 0 ? wt : (code - 1 < wt ? code - 1 : code);
  return p.alphabet[s];
}
}  // namespace

void write_pair_dependency_csv(const PottsParams& params, int j, int r,
                               const std::string& path) {
  Eigen::MatrixXd T = pair_dependency(params, j, r);
  std::ofstream out(path);
  if (!out) fail("cannot open for writing: " + path);
  out << "state_j,state_r,value\n";
  for (int k = 1; k <= params.states(); ++k)
    for (int l = 1; l <= params.states(); ++l)
      out << code_symbol(params, j, k) << ',' << code_symbol(params, r, l) << ','
          << fmt_full(T(k - 1, l - 1)) << '\n';
}

FitnessBenchmark fitness_benchmark(const PottsParams& params,
                                   const std::vector<FitnessObservation>& mutations) {
  FitnessBenchmark b;
  b.mutations = mutations;
  b.delta_e.resize(mutations.size());
  b.rare_flag.resize(mutations.size());
  Eigen::VectorXd exp_values(mutations.size());
  for (size_t i = 0; i < mutations.size(); ++i) {
    const auto& m = mutations[i];
    if (m.site < 0 || m.site >= params.sites()) fail("mutation site out of range");
    if (m.state < 0 || m.state > params.states()) fail("mutation state out of range");
    b.delta_e(static_cast<Eigen::Index>(i)) = delta_e_single(params, m.site, m.state);
    b.rare_flag[i] = params.rare_state(m.site, m.state);
    exp_values(static_cast<Eigen::Index>(i)) = m.value;
  }
  if (mutations.size() >= 2) b.spearman_rho = spearman(b.delta_e, exp_values);
  return b;
}

std::vector<FitnessObservation> read_fitness_csv(const PottsParams& params,
                                                 const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) fail(path + ": empty file");
  auto header = split(trim(line), ',');
  if (header.size() != 3 || trim(header[0]) != "site" ||
      trim(header[1]) != "target_symbol" || trim(header[2]) != "value")
    fail(path + ": expected header 'site,target_symbol,value'");
  std::vector<FitnessObservation> out;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto toks = split(line, ',');
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (toks.size() != 3) fail(ctx + ": expected 3 columns");
    long site1 = parse_long(trim(toks[0]), ctx);
    if (site1 < 1 || site1 > params.sites()) fail(ctx + ": site out of range");
    std::string sym = trim(toks[1]);
    auto it = std::find(params.alphabet.begin(), params.alphabet.end(), sym);
    if (it == params.alphabet.end()) fail(ctx + ": unknown symbol '" + sym + "'");
    int s = static_cast<int>(it - params.alphabet.begin());
    int j = static_cast<int>(site1 - 1);
    int wt = params.wildtype[j];
    int code = s == wt ? 0 : (s < wt ? s : s - 1) + 1;
    out.push_back({j, code, parse_double(trim(toks[2]), ctx)});
  }
  return out;
}

void write_fitness_benchmark_csv(const PottsParams& params, const FitnessBenchmark& b,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open for writing: " + path);
  out << "site,target_symbol,value,delta_e,rare\n";
  for (size_t i = 0; i < b.mutations.size(); ++i) {
    const auto& m = b.mutations[i];
    out << m.site + 1 << ',' << code_symbol(params, m.site, m.state) << ','
        << fmt_full(m.value) << ',' << fmt_full(b.delta_e(static_cast<Eigen::Index>(i)))
        << ',' << (b.rare_flag[i] ? 1 : 0) << '\n';
  }
  out << "# spearman," << opt_str(b.spearman_rho) << '\n';
}

}  // namespace pottsfit
