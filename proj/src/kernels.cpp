#include "rspv/kernels.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <omp.h>

namespace rspv::kernels {

namespace {
int g_workers = 0;
constexpr std::size_t kParallelMin = 64;

int thread_count() { return g_workers > 0 ? g_workers : omp_get_max_threads(); }
}  // namespace

void set_workers(int n) { g_workers = n < 0 ? 0 : n; }
int workers() { return thread_count(); }

void accumulate_outer_serial(const std::vector<Eigen::VectorXcd>& vs, const std::vector<double>& ws,
                             Eigen::MatrixXcd& out) {
    const Eigen::Index d = out.rows();
    for (std::size_t k = 0; k < vs.size(); ++k)
        for (Eigen::Index j = 0; j < d; ++j) {
            Complex c = ws[k] * std::conj(vs[k](j));
            if (c == Complex{}) continue;
            for (Eigen::Index i = 0; i < d; ++i) out(i, j) += vs[k](i) * c;
        }
}

void accumulate_outer_omp(const std::vector<Eigen::VectorXcd>& vs, const std::vector<double>& ws,
                          Eigen::MatrixXcd& out) {
    const Eigen::Index d = out.rows();
    // columns are disjoint across threads
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (Eigen::Index j = 0; j < d; ++j)
        for (std::size_t k = 0; k < vs.size(); ++k) {
            Complex c = ws[k] * std::conj(vs[k](j));
            if (c == Complex{}) continue;
            for (Eigen::Index i = 0; i < d; ++i) out(i, j) += vs[k](i) * c;
        }
}

void accumulate_outer(const std::vector<Eigen::VectorXcd>& vs, const std::vector<double>& ws,
                      Eigen::MatrixXcd& out) {
    if (static_cast<std::size_t>(out.rows()) >= kParallelMin && thread_count() > 1)
        accumulate_outer_omp(vs, ws, out);
    else
        accumulate_outer_serial(vs, ws, out);
}

Complex sparse_dot(const SparseVec& a, const SparseVec& b) {
    Complex s{};
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].first < b[j].first) ++i;
        else if (b[j].first < a[i].first) ++j;
        else s += std::conj(a[i++].second) * b[j++].second;
    }
    return s;
}

Eigen::MatrixXcd gram_serial(const std::vector<SparseVec>& vs) {
    const auto n = static_cast<Eigen::Index>(vs.size());
    Eigen::MatrixXcd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            g(i, j) = sparse_dot(vs[static_cast<std::size_t>(i)], vs[static_cast<std::size_t>(j)]);
            g(j, i) = std::conj(g(i, j));
        }
    return g;
}

Eigen::MatrixXcd gram_omp(const std::vector<SparseVec>& vs) {
    const auto n = static_cast<Eigen::Index>(vs.size());
    Eigen::MatrixXcd g(n, n);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            g(i, j) = sparse_dot(vs[static_cast<std::size_t>(i)], vs[static_cast<std::size_t>(j)]);
            g(j, i) = std::conj(g(i, j));
        }
    return g;
}

Eigen::MatrixXcd gram(const std::vector<SparseVec>& vs) {
    if (vs.size() >= kParallelMin && thread_count() > 1) return gram_omp(vs);
    return gram_serial(vs);
}

double lowrank_trace_norm(const std::vector<SparseVec>& vs, const std::vector<double>& coeffs) {
    if (vs.empty()) return 0.0;
    Eigen::MatrixXcd g = gram(vs);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g);
    const Eigen::VectorXd& lam = es.eigenvalues();
    const double cut = 1e-14 * std::max(1.0, lam.cwiseAbs().maxCoeff());
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < lam.size(); ++i)
        if (lam(i) > cut) keep.push_back(i);
    if (keep.empty()) return 0.0;
    // With G = U L U^dagger, sum c_k |v_k><v_k| restricted to the span is
    // unitarily equivalent to L^{1/2} U^dagger C U L^{1/2}.
    const auto r = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXcd b(static_cast<Eigen::Index>(vs.size()), r);
    for (Eigen::Index c = 0; c < r; ++c) b.col(c) = es.eigenvectors().col(keep[static_cast<std::size_t>(c)]) * std::sqrt(lam(keep[static_cast<std::size_t>(c)]));
    Eigen::VectorXd cv = Eigen::Map<const Eigen::VectorXd>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
    Eigen::MatrixXcd m = b.adjoint() * cv.asDiagonal() * b;
    m = (m + m.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ms(m, Eigen::EigenvaluesOnly);
    return ms.eigenvalues().cwiseAbs().sum();
}

}  // namespace rspv::kernels
