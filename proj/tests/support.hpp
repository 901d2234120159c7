#pragma once

#include "landau/discretize.hpp"
#include "landau/model.hpp"
#include "landau/sparse.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

extern "C" void zheevd_(const char* jobz, const char* uplo, const int* n, std::complex<double>* a, const int* lda,
                        double* w, std::complex<double>* work, const int* lwork, double* rwork, const int* lrwork,
                        int* iwork, const int* liwork, int* info);

namespace testing_support {

using namespace landau;

inline const double kTorusSide = std::sqrt(2.0 * std::numbers::pi);

inline ModelSpec planar_model(DomainKind kind, double side, double origin, const std::string& b, double b0,
                              const std::string& potential = "0") {
    ModelSpec m;
    m.domain = {kind, {side, side}, {origin, origin}};
    m.symbols.dimension = 2;
    m.symbols.constants["L"] = side;
    m.two_form = {Expression::parse(b, m.symbols)};
    m.two_form_is_density = true;
    m.potential = Expression::parse(potential, m.symbols);
    m.b0 = b0;
    return m;
}

/// b = 1 on the torus of area 2pi: one flux quantum per unit of p.
inline ModelSpec unit_torus() { return planar_model(DomainKind::Torus, kTorusSide, 0.0, "1", 1.0); }

inline const char* kVariableField = "1 + 0.3*cos(2*pi*x1/L)*cos(2*pi*x2/L)";

inline ModelSpec variable_torus() { return planar_model(DomainKind::Torus, kTorusSide, 0.0, kVariableField, 0.7); }

inline SparseHermitian operator_for(const ModelSpec& m, int cells, int p) {
    Grid g(m.domain, {cells, cells});
    GaugeData gauge = build_gauge(m, g, p);
    return assemble(m, g, p, gauge);
}

/// All eigenvalues of a dense Hermitian matrix through LAPACK.
inline Eigen::VectorXd dense_eigenvalues(Eigen::MatrixXcd a) {
    const int n = static_cast<int>(a.rows());
    Eigen::VectorXd w(n);
    int info = 0, lwork = -1, lrwork = -1, liwork = -1, iwork_query = 0;
    std::complex<double> work_query;
    double rwork_query = 0.0;
    zheevd_("N", "L", &n, a.data(), &n, w.data(), &work_query, &lwork, &rwork_query, &lrwork, &iwork_query,
            &liwork, &info);
    lwork = static_cast<int>(work_query.real());
    lrwork = static_cast<int>(rwork_query);
    liwork = iwork_query;
    std::vector<std::complex<double>> work(static_cast<std::size_t>(std::max(lwork, 1)));
    std::vector<double> rwork(static_cast<std::size_t>(std::max(lrwork, 1)));
    std::vector<int> iwork(static_cast<std::size_t>(std::max(liwork, 1)));
    zheevd_("N", "L", &n, a.data(), &n, w.data(), work.data(), &lwork, rwork.data(), &lrwork, iwork.data(),
            &liwork, &info);
    if (info != 0) throw std::runtime_error("zheevd failed: info " + std::to_string(info));
    return w;
}

inline long count_below(const Eigen::VectorXd& w, double sigma) {
    long c = 0;
    for (double x : w) c += x < sigma ? 1 : 0;
    return c;
}

/// Dense random Hermitian matrix with standard normal entries.
inline Eigen::MatrixXcd random_hermitian(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXcd a(n, n);
    for (int j = 0; j < n; ++j) {
        a(j, j) = normal(rng);
        for (int i = j + 1; i < n; ++i) {
            a(i, j) = {normal(rng), normal(rng)};
            a(j, i) = std::conj(a(i, j));
        }
    }
    return a;
}

inline SparseHermitian sparse_from_dense(const Eigen::MatrixXcd& a) {
    const int n = static_cast<int>(a.rows());
    SparseHermitian::Builder b(n);
    for (int j = 0; j < n; ++j)
        for (int i = j; i < n; ++i)
            if (a(i, j) != std::complex<double>(0.0, 0.0) || i == j) b.add(i, j, i == j ? a(i, j).real() : a(i, j));
    return b.build();
}

/// Random sparse Hermitian matrix: a few off-diagonal entries per row and a
/// random diagonal.
inline SparseHermitian random_sparse_hermitian(int n, int per_row, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<int> pick(0, n - 1);
    SparseHermitian::Builder b(n);
    for (int i = 0; i < n; ++i) {
        b.add_diagonal(i, 3.0 * normal(rng));
        for (int k = 0; k < per_row; ++k) {
            int j = pick(rng);
            if (j == i) continue;
            b.add(std::max(i, j), std::min(i, j), {normal(rng), normal(rng)});
        }
    }
    return b.build();
}

} // namespace testing_support
