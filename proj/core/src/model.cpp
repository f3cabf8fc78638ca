#include "pottsfit/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pottsfit/io_util.hpp"

namespace pottsfit {

namespace {
[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void check_state(int k, int K, const char* what) {
  if (k < 0 || k > K) fail(std::string(what) + " state code out of range");
}
}  // namespace

PottsParams::PottsParams(int d, int K) : d_(d), K_(K) {
  if (d < 2 || K < 1) fail("PottsParams needs d >= 2 and K >= 1");
  theta_ = Eigen::MatrixXd::Zero(d, K);
  alphabet.resize(K + 1);
  for (int s = 0; s <= K; ++s) alphabet[s] = std::to_string(s);
  wildtype.assign(d, 0);
}

double PottsParams::theta_at(int j, int k) const {
  check_state(k, K_, "theta");
  return k == 0 ? 0.0 : theta_(j, k - 1);
}

double PottsParams::gamma_at(int j, int r, int k, int l) const {
  if (j == r) fail("gamma_at needs distinct sites");
  check_state(k, K_, "gamma");
  check_state(l, K_, "gamma");
  if (k == 0 || l == 0) return 0.0;
  const bool flip = j > r;
  auto it = gamma_.find({std::min(j, r), std::max(j, r)});
  if (it == gamma_.end()) return 0.0;
  return flip ? it->second(l - 1, k - 1) : it->second(k - 1, l - 1);
}

void PottsParams::set_block(int j, int r, const Eigen::MatrixXd& B) {
  if (j == r) fail("set_block needs distinct sites");
  if (B.rows() != K_ || B.cols() != K_) fail("coupling block must be K x K");
  auto key = std::make_pair(std::min(j, r), std::max(j, r));
  Eigen::MatrixXd stored = B;
  if (j > r) stored.transposeInPlace();
  if (stored.cwiseAbs().maxCoeff() == 0.0)
    gamma_.erase(key);
  else
    gamma_[key] = std::move(stored);
  index_dirty_ = true;
}

Eigen::MatrixXd PottsParams::block(int j, int r) const {
  auto it = gamma_.find({std::min(j, r), std::max(j, r)});
  if (it == gamma_.end()) return Eigen::MatrixXd::Zero(K_, K_);
  if (j < r) return it->second;
  return it->second.transpose();
}

bool PottsParams::has_block(int j, int r) const {
  return gamma_.count({std::min(j, r), std::max(j, r)}) > 0;
}

void PottsParams::rebuild_index() const {
  neighbor_index_.assign(d_, {});
  for (const auto& [key, B] : gamma_) {
    neighbor_index_[key.first].push_back({key.second, &B, false});
    neighbor_index_[key.second].push_back({key.first, &B, true});
  }
  index_dirty_ = false;
}

const std::vector<PottsParams::Neighbor>& PottsParams::neighbors(int j) const {
  if (index_dirty_) rebuild_index();
  return neighbor_index_[j];
}

bool PottsParams::rare_state(int j, int code) const {
  if (rare.size() == 0) return false;
  return rare(j, code) != 0;
}

double energy(const PottsParams& p, const std::vector<int>& z) {
  if (static_cast<int>(z.size()) != p.sites()) fail("state vector length != d");
  double e = 0.0;
  for (int j = 0; j < p.sites(); ++j) {
    check_state(z[j], p.states(), "energy");
    e += p.theta_at(j, z[j]);
  }
  for (const auto& [key, B] : p.pair_blocks()) {
    int zj = z[key.first], zr = z[key.second];
    if (zj > 0 && zr > 0) e += B(zj - 1, zr - 1);
  }
  return e;
}

double delta_e_single(const PottsParams& p, int j, int k) {
  if (j < 0 || j >= p.sites()) fail("site out of range");
  check_state(k, p.states(), "delta_e");
  return p.theta_at(j, k);
}

void MutationSpec::validate(int d, int K) const {
  if (targets.empty()) fail("mutation spec must name at least one site");
  std::vector<bool> seen(d, false);
  for (const auto& [site, k] : targets) {
    if (site < 0 || site >= d) fail("mutation site out of range");
    if (k < 1 || k > K) fail("mutation target must be a non-reference state");
    if (seen[site]) fail("duplicate mutation site " + std::to_string(site));
    seen[site] = true;
  }
}

double delta_e_multi(const PottsParams& p, const MutationSpec& m,
                     const std::vector<int>& background) {
  m.validate(p.sites(), p.states());
  std::vector<int> bg = background;
  if (bg.empty()) bg.assign(p.sites(), 0);
  if (static_cast<int>(bg.size()) != p.sites()) fail("background length != d");
  for (int j = 0; j < p.sites(); ++j) check_state(bg[j], p.states(), "background");

  std::vector<int> target(p.sites(), -1);  // -1 = unmutated
  for (const auto& [site, k] : m.targets) target[site] = k;

  double de = 0.0;
  for (const auto& [j, kj] : m.targets) {
    // single-site field change
    de += p.theta_at(j, kj) - p.theta_at(j, bg[j]);
    // couplings toward unmutated sites
    for (const auto& nb : p.neighbors(j)) {
      int r = nb.site;
      if (target[r] >= 0) continue;
      de += p.gamma_at(j, r, kj, bg[r]) - p.gamma_at(j, r, bg[j], bg[r]);
    }
  }
  // couplings inside the mutated set, each unordered pair once
  for (size_t a = 0; a < m.targets.size(); ++a)
    for (size_t b = a + 1; b < m.targets.size(); ++b) {
      const auto& [j, kj] = m.targets[a];
      const auto& [r, kr] = m.targets[b];
      de += p.gamma_at(j, r, kj, kr) - p.gamma_at(j, r, bg[j], bg[r]);
    }
  return de;
}

Eigen::VectorXd conditional_prob(const PottsParams& p, int j,
                                 const std::vector<int>& context) {
  if (j < 0 || j >= p.sites()) fail("site out of range");
  if (static_cast<int>(context.size()) != p.sites()) fail("context length != d");
  const int K = p.states();
  Eigen::VectorXd score(K + 1);
  score(0) = 0.0;
  for (int k = 1; k <= K; ++k) score(k) = p.theta_at(j, k);
  for (const auto& nb : p.neighbors(j)) {
    int zr = context[nb.site];
    check_state(zr, K, "context");
    if (zr == 0) continue;
    if (nb.transposed)
      score.tail(K) += nb.block->row(zr - 1).transpose();
    else
      score.tail(K) += nb.block->col(zr - 1);
  }
  double m = score.maxCoeff();
  Eigen::VectorXd prob = (score.array() - m).exp();
  prob /= prob.sum();
  return prob;
}

PottsParams symmetrize(const std::vector<SiteEstimate>& site_fits) {
  const int d = static_cast<int>(site_fits.size());
  if (d < 2) fail("symmetrize needs estimates for at least 2 sites");
  const int K = static_cast<int>(site_fits[0].theta.size());
  for (int j = 0; j < d; ++j) {
    if (site_fits[j].theta.size() != K)
      fail("site " + std::to_string(j) + ": theta dimension mismatch");
    if (static_cast<int>(site_fits[j].blocks.size()) != d)
      fail("site " + std::to_string(j) + ": expected one block slot per site");
  }
  PottsParams p(d, K);
  for (int j = 0; j < d; ++j) p.theta().row(j) = site_fits[j].theta.transpose();
  for (int j = 0; j < d; ++j)
    for (int r = j + 1; r < d; ++r) {
      const Eigen::MatrixXd& fwd = site_fits[j].blocks[r];
      const Eigen::MatrixXd& rev = site_fits[r].blocks[j];
      if (fwd.size() == 0 && rev.size() == 0) continue;
      if (fwd.size() != 0 && (fwd.rows() != K || fwd.cols() != K))
        fail("site " + std::to_string(j) + ": block toward " + std::to_string(r) +
             " has wrong shape");
      if (rev.size() != 0 && (rev.rows() != K || rev.cols() != K))
        fail("site " + std::to_string(r) + ": block toward " + std::to_string(j) +
             " has wrong shape");
      Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(K, K);
      if (fwd.size() != 0) avg += 0.5 * fwd;
      if (rev.size() != 0) avg += 0.5 * rev.transpose();
      p.set_block(j, r, avg);
    }
  return p;
}

void save_potts(const PottsParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open for writing: " + path);
  out << "pottsfit-params 1\n";
  out << "d " << p.sites() << "\n";
  out << "K " << p.states() << "\n";
  out << "alphabet";
  for (const auto& s : p.alphabet) out << ' ' << s;
  out << "\nwildtype";
  for (int w : p.wildtype) out << ' ' << p.alphabet[w];
  out << "\n";
  for (int j = 0; j < p.sites(); ++j)
    for (int k = 1; k <= p.states(); ++k)
      if (p.theta_at(j, k) != 0.0)
        out << "theta " << j << ' ' << k << ' ' << fmt_full(p.theta_at(j, k)) << "\n";
  for (const auto& [key, B] : p.pair_blocks())
    for (int k = 1; k <= p.states(); ++k)
      for (int l = 1; l <= p.states(); ++l)
        if (B(k - 1, l - 1) != 0.0)
          out << "gamma " << key.first << ' ' << key.second << ' ' << k << ' ' << l
              << ' ' << fmt_full(B(k - 1, l - 1)) << "\n";
  if (p.rare.size() != 0)
    for (int j = 0; j < p.sites(); ++j)
      for (int k = 0; k <= p.states(); ++k)
        if (p.rare(j, k)) out << "rare " << j << ' ' << k << "\n";
  out << "end\n";
}

PottsParams load_potts(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "pottsfit-params 1")
    fail(path + ": not a pottsfit parameter file");
  int d = -1, K = -1;
  std::vector<std::string> alphabet;
  std::vector<std::string> wildtype_tokens;
  // header
  while (std::getline(in, line)) {
    auto toks = split(trim(line), ' ');
    if (toks.empty() || toks[0].empty()) continue;
    const std::string& tag = toks[0];
    if (tag == "d") {
      d = static_cast<int>(parse_long(toks.at(1), path));
    } else if (tag == "K") {
      K = static_cast<int>(parse_long(toks.at(1), path));
    } else if (tag == "alphabet") {
      alphabet.assign(toks.begin() + 1, toks.end());
    } else if (tag == "wildtype") {
      wildtype_tokens.assign(toks.begin() + 1, toks.end());
      break;  // header complete; body follows
    } else {
      fail(path + ": unexpected header line: " + line);
    }
  }
  if (d < 2 || K < 1) fail(path + ": missing or invalid d/K header");
  if (static_cast<int>(alphabet.size()) != K + 1)
    fail(path + ": alphabet must list K+1 symbols");
  if (static_cast<int>(wildtype_tokens.size()) != d)
    fail(path + ": wildtype must list d symbols");

  PottsParams p(d, K);
  p.alphabet = alphabet;
  for (int j = 0; j < d; ++j) {
    auto it = std::find(alphabet.begin(), alphabet.end(), wildtype_tokens[j]);
    if (it == alphabet.end())
      fail(path + ": wildtype symbol '" + wildtype_tokens[j] + "' not in alphabet");
    p.wildtype[j] = static_cast<int>(it - alphabet.begin());
  }

  std::map<std::pair<int, int>, Eigen::MatrixXd> blocks;
  bool saw_end = false;
  while (std::getline(in, line)) {
    auto toks = split(trim(line), ' ');
    if (toks.empty() || toks[0].empty()) continue;
    const std::string& tag = toks[0];
    if (tag == "end") {
      saw_end = true;
      break;
    } else if (tag == "theta") {
      if (toks.size() != 4) fail(path + ": malformed theta line: " + line);
      int j = static_cast<int>(parse_long(toks[1], path));
      int k = static_cast<int>(parse_long(toks[2], path));
      if (j < 0 || j >= d || k < 1 || k > K) fail(path + ": theta index out of range");
      p.theta()(j, k - 1) = parse_double(toks[3], path);
    } else if (tag == "gamma") {
      if (toks.size() != 6) fail(path + ": malformed gamma line: " + line);
      int j = static_cast<int>(parse_long(toks[1], path));
      int r = static_cast<int>(parse_long(toks[2], path));
      int k = static_cast<int>(parse_long(toks[3], path));
      int l = static_cast<int>(parse_long(toks[4], path));
      if (j < 0 || r < 0 || j >= d || r >= d || j >= r || k < 1 || k > K || l < 1 ||
          l > K)
        fail(path + ": gamma index out of range (expects j < r)");
      auto& B = blocks.try_emplace({j, r}, Eigen::MatrixXd::Zero(K, K)).first->second;
      B(k - 1, l - 1) = parse_double(toks[5], path);
    } else if (tag == "rare") {
      if (toks.size() != 3) fail(path + ": malformed rare line: " + line);
      int j = static_cast<int>(parse_long(toks[1], path));
      int k = static_cast<int>(parse_long(toks[2], path));
      if (j < 0 || j >= d || k < 0 || k > K) fail(path + ": rare index out of range");
      if (p.rare.size() == 0) p.rare = MaskMatrix::Zero(d, K + 1);
      p.rare(j, k) = 1;
    } else {
      fail(path + ": unexpected line: " + line);
    }
  }
  if (!saw_end) fail(path + ": truncated file (missing 'end')");
  for (const auto& [key, B] : blocks) p.set_block(key.first, key.second, B);
  return p;
}

}  // namespace pottsfit
