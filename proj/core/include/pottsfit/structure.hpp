#pragma once

#include <Eigen/Dense>
#include <string>

namespace pottsfit {

enum class KernelKind { N1, N2, None };

KernelKind kernel_kind_from_string(const std::string& s);
std::string to_string(KernelKind k);

// csv-xyz: header "site,x,y,z", one row per site, 1-based contiguous indices.
Eigen::MatrixXd parse_coordinates_csv(const std::string& path);
// pdb-ca: fixed-column ATOM records, atom name CA, first model, first altloc.
Eigen::MatrixXd parse_coordinates_pdb_ca(const std::string& path);

// Pairwise Euclidean distances between coordinate rows.
Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& coords);

// Throws unless D is square, symmetric, nonnegative, with a zero diagonal.
void validate_distance_matrix(const Eigen::MatrixXd& D);

// MS_j: population variance of the distances from site j to all other sites.
// Throws when degenerate (all equal), which would break the N1 kernel.
double site_normalizer(const Eigen::MatrixXd& D, int j);

// N1: 1 - exp(-D^2/ms); N2: logistic(D), ms unused. Values in [0,1).
double kernel_value(double distance, double ms, KernelKind kind);

// Group-weight matrix for the weighted penalty:
//   w_jr = (sqrt(group_size/n) + sqrt(2 log(d-1)/n)) * kernel(D_jr).
// kernel_kind None sets the kernel to 1 everywhere (distance-free scale).
struct StructureWeights {
  Eigen::MatrixXd w;  // d x d, diagonal unused (0)
  KernelKind kernel_kind = KernelKind::None;
  Eigen::VectorXd ms;  // per-site normalizers (filled for N1 only)
  double n_used = 0;   // sample size entering the scale factor
  bool symmetrized = false;
};

// By default the N1 kernel uses the row-wise MS_j, so w is asymmetric;
// symmetrized_normalizer averages MS_j and MS_r instead. With d == 2 the
// normalizer is undefined and the kind falls back to None with a warning
// on stderr.
StructureWeights group_weights(const Eigen::MatrixXd& D, double n, int group_size,
                               KernelKind kind, bool symmetrized_normalizer = false);

}  // namespace pottsfit
