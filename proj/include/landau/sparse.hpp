#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace landau {

using cplx = std::complex<double>;

/// Lattice shape behind an assembled operator: unknown k sits at lattice
/// position (k % nx, k / nx).
struct LatticeLayout {
    int nx = 0;
    int ny = 0;
    double hx = 0.0;
    double hy = 0.0;
    double x0 = 0.0; // coordinates of unknown 0
    double y0 = 0.0;
    bool periodic = true;
};

/// Complex Hermitian matrix in compressed row storage holding both
/// triangles.
///
/// Only the lower triangle is ever supplied; the upper triangle is its exact
/// conjugate mirror and the diagonal is real, so A(i,j) == conj(A(j,i))
/// holds bit for bit. Column indices within a row are sorted.
class SparseHermitian {
public:
    class Builder {
    public:
        explicit Builder(int n) : n_(n) {}
        /// Adds v to A(row, col) with row >= col. Duplicates accumulate.
        void add(int row, int col, cplx v);
        void add_diagonal(int i, double v) { add(i, i, {v, 0.0}); }
        SparseHermitian build(std::optional<LatticeLayout> layout = std::nullopt);

    private:
        struct Entry {
            int row, col;
            cplx value;
        };
        int n_;
        std::vector<Entry> entries_;
    };

    SparseHermitian() = default;

    int size() const noexcept { return n_; }
    std::size_t nonzeros() const noexcept { return values_.size(); }
    std::size_t lower_nonzeros() const noexcept { return (values_.size() + static_cast<std::size_t>(diag_count_)) / 2; }

    std::span<const std::int64_t> row_ptr() const noexcept { return row_ptr_; }
    std::span<const int> col_idx() const noexcept { return col_idx_; }
    std::span<const cplx> values() const noexcept { return values_; }
    const std::optional<LatticeLayout>& layout() const noexcept { return layout_; }

    cplx coeff(int row, int col) const;
    double max_abs() const;
    /// Lower bound of the spectrum from Gershgorin discs.
    double gershgorin_lower() const;
    double gershgorin_upper() const;
    bool is_real() const;

    void multiply(std::span<const cplx> x, std::span<cplx> y) const;
    Eigen::VectorXcd operator*(const Eigen::VectorXcd& x) const;
    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& X) const;
    Eigen::MatrixXcd to_dense() const;

    /// Largest |A(i,j) - conj(A(j,i))| and largest |Im A(i,i)|.
    double hermiticity_defect() const;

private:
    int n_ = 0;
    int diag_count_ = 0;
    std::vector<std::int64_t> row_ptr_{0};
    std::vector<int> col_idx_;
    std::vector<cplx> values_;
    std::optional<LatticeLayout> layout_;
};

/// Matrix Market coordinate format, `complex hermitian` symmetry.
///
/// Lower-triangle entries are written column by column (rows ascending
/// within a column) with 17 significant digits, so export, import and export
/// again reproduce the same bytes.
void export_matrix_market(const SparseHermitian& H, const std::filesystem::path& path);
std::string matrix_market_string(const SparseHermitian& H);
SparseHermitian import_matrix_market(const std::filesystem::path& path);
SparseHermitian parse_matrix_market(const std::string& text);

} // namespace landau
