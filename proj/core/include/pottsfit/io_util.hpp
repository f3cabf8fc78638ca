#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace pottsfit {

// Shortest decimal form that round-trips a double ("%.17g").
std::string fmt_full(double x);

// Headerless CSV, one row per line, full-precision values.
void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

void write_vector_csv(const Eigen::VectorXd& v, const std::string& path);

std::vector<std::string> split(const std::string& line, char sep);
std::string trim(const std::string& s);

// Parses a double/integer or throws with the offending token in the message.
double parse_double(const std::string& tok, const std::string& context);
long parse_long(const std::string& tok, const std::string& context);

}  // namespace pottsfit
