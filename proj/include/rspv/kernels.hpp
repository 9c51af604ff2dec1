#pragma once

#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

// Hot loops with an OpenMP version and the serial reference it is tested against.
namespace rspv::kernels {

using Complex = std::complex<double>;
using SparseVec = std::vector<std::pair<std::uint64_t, Complex>>;  // sorted by index

// out += sum_k w_k v_k v_k^dagger
void accumulate_outer_serial(const std::vector<Eigen::VectorXcd>& vs, const std::vector<double>& ws,
                             Eigen::MatrixXcd& out);
void accumulate_outer_omp(const std::vector<Eigen::VectorXcd>& vs, const std::vector<double>& ws,
                          Eigen::MatrixXcd& out);
void accumulate_outer(const std::vector<Eigen::VectorXcd>& vs, const std::vector<double>& ws,
                      Eigen::MatrixXcd& out);

Complex sparse_dot(const SparseVec& a, const SparseVec& b);  // <a|b>

Eigen::MatrixXcd gram_serial(const std::vector<SparseVec>& vs);
Eigen::MatrixXcd gram_omp(const std::vector<SparseVec>& vs);
Eigen::MatrixXcd gram(const std::vector<SparseVec>& vs);

// Trace norm of sum_k c_k |v_k><v_k| (c_k may be negative), evaluated on the
// span of the v_k through their Gram matrix.
double lowrank_trace_norm(const std::vector<SparseVec>& vs, const std::vector<double>& coeffs);

// Worker count used by the dispatching overloads; 0 means the OpenMP default.
void set_workers(int n);
int workers();

}  // namespace rspv::kernels
