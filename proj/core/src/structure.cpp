#include "pottsfit/structure.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include "pottsfit/io_util.hpp"

namespace pottsfit {

namespace {
[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }
}  // namespace

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "N1" || s == "n1") return KernelKind::N1;
  if (s == "N2" || s == "n2") return KernelKind::N2;
  if (s == "none") return KernelKind::None;
  fail("unknown kernel kind: '" + s + "' (expected N1, N2, none)");
}

std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::N1: return "N1";
    case KernelKind::N2: return "N2";
    case KernelKind::None: return "none";
  }
  return "?";
}

Eigen::MatrixXd parse_coordinates_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) fail(path + ": empty file");
  auto header = split(trim(line), ',');
  if (header.size() != 4 || trim(header[0]) != "site" || trim(header[1]) != "x" ||
      trim(header[2]) != "y" || trim(header[3]) != "z")
    fail(path + ": expected header 'site,x,y,z'");
  std::vector<Eigen::Vector3d> rows;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto toks = split(line, ',');
    if (toks.size() != 4)
      fail(path + ":" + std::to_string(lineno) + ": expected 4 columns, got " +
           std::to_string(toks.size()));
    const std::string ctx = path + ":" + std::to_string(lineno);
    long site = parse_long(trim(toks[0]), ctx);
    if (site != static_cast<long>(rows.size()) + 1)
      fail(ctx + ": site indices must be 1-based and contiguous; got " +
           std::to_string(site));
    rows.emplace_back(parse_double(trim(toks[1]), ctx), parse_double(trim(toks[2]), ctx),
                      parse_double(trim(toks[3]), ctx));
  }
  if (rows.empty()) fail(path + ": no coordinate rows");
  Eigen::MatrixXd coords(rows.size(), 3);
  for (size_t i = 0; i < rows.size(); ++i) coords.row(i) = rows[i].transpose();
  return coords;
}

Eigen::MatrixXd parse_coordinates_pdb_ca(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open: " + path);
  std::map<int, Eigen::Vector3d> by_residue;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("ENDMDL", 0) == 0) break;  // first model only
    if (line.rfind("ATOM", 0) != 0) continue;
    if (line.size() < 54) fail(path + ":" + std::to_string(lineno) + ": short ATOM record");
    // PDB fixed columns: atom name 13-16, altloc 17, resseq 23-26, xyz 31-54.
    if (trim(line.substr(12, 4)) != "CA") continue;
    char altloc = line[16];
    if (altloc != ' ' && altloc != 'A') continue;  // first alternate location
    const std::string ctx = path + ":" + std::to_string(lineno);
    int resseq = static_cast<int>(parse_long(trim(line.substr(22, 4)), ctx));
    Eigen::Vector3d xyz(parse_double(trim(line.substr(30, 8)), ctx),
                        parse_double(trim(line.substr(38, 8)), ctx),
                        parse_double(trim(line.substr(46, 8)), ctx));
    if (!by_residue.emplace(resseq, xyz).second)
      fail(ctx + ": duplicate CA record for residue " + std::to_string(resseq));
  }
  if (by_residue.empty()) fail(path + ": no CA ATOM records");
  // Residue indices must be contiguous so sites map 1:1 onto alignment columns.
  int first = by_residue.begin()->first;
  std::string missing;
  for (int r = first; r <= by_residue.rbegin()->first; ++r)
    if (!by_residue.count(r)) missing += (missing.empty() ? "" : ", ") + std::to_string(r);
  if (!missing.empty()) fail(path + ": missing CA records for residues: " + missing);
  Eigen::MatrixXd coords(by_residue.size(), 3);
  int i = 0;
  for (const auto& [res, xyz] : by_residue) coords.row(i++) = xyz.transpose();
  return coords;
}

Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& coords) {
  const Eigen::Index d = coords.rows();
  if (d < 2) fail("need at least 2 sites for a distance matrix");
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index r = j + 1; r < d; ++r) {
      double dist = (coords.row(j) - coords.row(r)).norm();
      D(j, r) = D(r, j) = dist;
    }
  return D;
}

void validate_distance_matrix(const Eigen::MatrixXd& D) {
  if (D.rows() != D.cols()) fail("distance matrix must be square");
  for (Eigen::Index j = 0; j < D.rows(); ++j) {
    if (D(j, j) != 0.0) fail("distance matrix diagonal must be zero");
    for (Eigen::Index r = 0; r < D.cols(); ++r) {
      if (D(j, r) < 0.0) fail("distances must be nonnegative");
      if (D(j, r) != D(r, j)) fail("distance matrix must be symmetric");
    }
  }
}

double site_normalizer(const Eigen::MatrixXd& D, int j) {
  const int d = static_cast<int>(D.rows());
  if (d < 3) fail("site_normalizer requires d >= 3");
  if (j < 0 || j >= d) fail("site index out of range");
  double mean = 0.0;
  for (int r = 0; r < d; ++r)
    if (r != j) mean += D(j, r);
  mean /= (d - 1);
  double var = 0.0;
  for (int r = 0; r < d; ++r)
    if (r != j) var += (D(j, r) - mean) * (D(j, r) - mean);
  var /= (d - 1);
  if (var <= 0.0)
    fail("degenerate normalizer: all distances from site " + std::to_string(j) +
         " are equal");
  return var;
}

double kernel_value(double distance, double ms, KernelKind kind) {
  switch (kind) {
    case KernelKind::N1:
      if (ms <= 0.0) fail("N1 kernel requires a positive normalizer");
      return 1.0 - std::exp(-distance * distance / ms);
    case KernelKind::N2:
      return 1.0 / (1.0 + std::exp(-distance));
    case KernelKind::None:
      return 1.0;
  }
  return 1.0;
}

StructureWeights group_weights(const Eigen::MatrixXd& D, double n, int group_size,
                               KernelKind kind, bool symmetrized_normalizer) {
  validate_distance_matrix(D);
  const int d = static_cast<int>(D.rows());
  if (n < 1) fail("sample size must be >= 1");
  if (group_size < 1) fail("group size must be >= 1");
  if (d == 2 && kind != KernelKind::None) {
    std::cerr << "warning: d == 2 leaves MS_j undefined; using kernel 'none'\n";
    kind = KernelKind::None;
  }

  StructureWeights sw;
  sw.kernel_kind = kind;
  sw.n_used = n;
  sw.symmetrized = symmetrized_normalizer;
  sw.ms = Eigen::VectorXd::Zero(d);
  if (kind == KernelKind::N1)
    for (int j = 0; j < d; ++j) sw.ms(j) = site_normalizer(D, j);

  const double scale = std::sqrt(static_cast<double>(group_size) / n) +
                       std::sqrt(2.0 * std::log(static_cast<double>(d - 1)) / n);
  sw.w = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < d; ++j)
    for (int r = 0; r < d; ++r) {
      if (r == j) continue;
      double ms = sw.ms(j);
      if (kind == KernelKind::N1 && symmetrized_normalizer) ms = 0.5 * (sw.ms(j) + sw.ms(r));
      sw.w(j, r) = scale * kernel_value(D(j, r), ms, kind);
    }
  return sw;
}

}  // namespace pottsfit
