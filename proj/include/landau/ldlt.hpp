#pragma once

#include "landau/sparse.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <vector>

namespace landau {

/// Counts of negative, zero and positive eigenvalues.
struct Inertia {
    long negative = 0;
    long zero = 0;
    long positive = 0;
};

/// Fill-reducing ordering by recursive graph bisection: breadth-first level
/// structures from a pseudo-peripheral vertex, a thin middle level as the
/// separator, separators numbered last. Returns perm with perm[new] = old.
std::vector<int> nested_dissection(const SparseHermitian& A, int leaf_size = 48);

/// Pattern-only analysis shared by every shifted factorization of a matrix:
/// ordering, elimination tree and relaxed supernodes.
class SymbolicLdlt {
public:
    explicit SymbolicLdlt(const SparseHermitian& A);

    int size() const noexcept { return n_; }
    int supernode_count() const noexcept { return static_cast<int>(first_.size()) - 1; }
    /// Stored entries of the factor (pivot blocks as full squares).
    std::int64_t factor_entries() const noexcept { return factor_entries_; }
    int largest_front() const noexcept { return largest_front_; }
    const std::vector<int>& permutation() const noexcept { return perm_; }

private:
    friend class LdltFactor;

    int n_ = 0;
    std::vector<int> perm_;          // new -> old
    std::vector<int> iperm_;         // old -> new
    std::vector<int> first_;         // supernode s owns columns first_[s] .. first_[s+1]-1
    std::vector<std::vector<int>> rows_; // rows below the pivot block, ascending
    std::vector<std::vector<int>> children_;
    std::int64_t factor_entries_ = 0;
    int largest_front_ = 0;
};

struct LdltOptions {
    /// Keep L and D for solves; counting alone discards each block once its
    /// update has been formed.
    bool keep_factor = true;
    /// A pivot block whose smallest eigenvalue magnitude falls below this
    /// multiple of max|A - shift I| is treated as singular.
    double pivot_tolerance = 1e-13;
};

/// Multifrontal L D L^H factorization of A - shift I.
///
/// Each pivot block is factored with rook-pivoted Bunch-Kaufman (LAPACK
/// zhetrf_rk), so D has 1x1 and 2x2 blocks and the inertia of A - shift I is
/// read off D by Sylvester's law. Throws ShiftTooClose when a pivot block is
/// numerically singular.
class LdltFactor {
public:
    LdltFactor(std::shared_ptr<const SymbolicLdlt> symbolic, const SparseHermitian& A, double shift,
               LdltOptions options = {});

    double shift() const noexcept { return shift_; }
    const Inertia& inertia() const noexcept { return inertia_; }
    /// Smallest |eigenvalue| over all D blocks.
    double smallest_pivot() const noexcept { return smallest_pivot_; }

    /// Overwrites B with (A - shift I)^{-1} B.
    void solve(Eigen::MatrixXcd& B) const;
    Eigen::VectorXcd solve(const Eigen::VectorXcd& b) const;

private:
    struct Block {
        Eigen::MatrixXcd L11;        // unit lower triangle of the pivot block
        Eigen::MatrixXcd L21;        // rows_[s] x block size
        Eigen::VectorXcd d;          // diagonal of D
        Eigen::VectorXcd e;          // subdiagonal of D (2x2 blocks)
        std::vector<int> pivot;      // local symmetric permutation
        std::vector<int> ipiv;       // LAPACK interchanges; negative marks 2x2 blocks
    };

    std::shared_ptr<const SymbolicLdlt> symbolic_;
    double shift_;
    Inertia inertia_;
    double smallest_pivot_ = 0.0;
    std::vector<Block> blocks_;
};

/// Inertia of a dense Hermitian matrix via one zhetrf_rk call.
Inertia dense_inertia(const Eigen::MatrixXcd& A, double pivot_tolerance = 1e-13);

} // namespace landau
