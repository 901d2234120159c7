#include "landau/ldlt.hpp"

#include "landau/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

extern "C" void zhetrf_rk_(const char* uplo, const int* n, std::complex<double>* a, const int* lda,
                           std::complex<double>* e, int* ipiv, std::complex<double>* work,
                           const int* lwork, int* info, std::size_t uplo_len);

namespace landau {

namespace {

// --- ordering -------------------------------------------------------------------

struct Graph {
    int n = 0;
    std::vector<std::int64_t> ptr;
    std::vector<int> adj;

    std::span<const int> neighbours(int v) const {
        return {adj.data() + ptr[static_cast<std::size_t>(v)],
                static_cast<std::size_t>(ptr[static_cast<std::size_t>(v) + 1] - ptr[static_cast<std::size_t>(v)])};
    }
};

Graph adjacency(const SparseHermitian& A) {
    Graph g;
    g.n = A.size();
    g.ptr.assign(static_cast<std::size_t>(g.n) + 1, 0);
    const auto rp = A.row_ptr();
    const auto ci = A.col_idx();
    g.adj.reserve(A.nonzeros());
    for (int i = 0; i < g.n; ++i) {
        for (auto p = rp[static_cast<std::size_t>(i)]; p < rp[static_cast<std::size_t>(i) + 1]; ++p)
            if (ci[static_cast<std::size_t>(p)] != i) g.adj.push_back(ci[static_cast<std::size_t>(p)]);
        g.ptr[static_cast<std::size_t>(i) + 1] = static_cast<std::int64_t>(g.adj.size());
    }
    return g;
}

class Dissector {
public:
    Dissector(const Graph& g, int leaf) : g_(g), leaf_(leaf), owner_(static_cast<std::size_t>(g.n), 0),
                                          level_(static_cast<std::size_t>(g.n), -1) {}

    std::vector<int> run() {
        std::vector<int> all(static_cast<std::size_t>(g_.n));
        std::iota(all.begin(), all.end(), 0);
        process(std::move(all), 0);
        return std::move(order_);
    }

private:
    // Breadth-first levels from `start` inside subset `id`; returns the
    // visited vertices in BFS order and sets level_.
    std::vector<int> bfs(int start, int id, int& depth) {
        std::vector<int> queue{start};
        level_[static_cast<std::size_t>(start)] = 0;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const int v = queue[head];
            for (int w : g_.neighbours(v)) {
                if (owner_[static_cast<std::size_t>(w)] != id || level_[static_cast<std::size_t>(w)] >= 0) continue;
                level_[static_cast<std::size_t>(w)] = level_[static_cast<std::size_t>(v)] + 1;
                queue.push_back(w);
            }
        }
        depth = level_[static_cast<std::size_t>(queue.back())];
        return queue;
    }

    void clear_levels(const std::vector<int>& nodes) {
        for (int v : nodes) level_[static_cast<std::size_t>(v)] = -1;
    }

    int degree_in(int v, int id) const {
        int d = 0;
        for (int w : g_.neighbours(v)) d += owner_[static_cast<std::size_t>(w)] == id;
        return d;
    }

    void emit(const std::vector<int>& nodes) {
        for (int v : nodes) owner_[static_cast<std::size_t>(v)] = -1;
        order_.insert(order_.end(), nodes.begin(), nodes.end());
    }

    void process(std::vector<int> nodes, int id) {
        if (static_cast<int>(nodes.size()) <= leaf_) {
            emit(nodes);
            return;
        }
        int depth = 0;
        std::vector<int> reach = bfs(nodes.front(), id, depth);
        if (reach.size() < nodes.size()) {
            // Disconnected: dissect each component on its own.
            std::vector<std::vector<int>> parts{reach};
            for (int v : nodes) {
                if (level_[static_cast<std::size_t>(v)] >= 0) continue;
                int dummy = 0;
                parts.push_back(bfs(v, id, dummy));
            }
            for (auto& part : parts) clear_levels(part);
            for (auto& part : parts) {
                const int sub = ++next_id_;
                for (int v : part) owner_[static_cast<std::size_t>(v)] = sub;
                process(std::move(part), sub);
            }
            return;
        }

        // Pseudo-peripheral start: restart from a minimum-degree vertex of
        // the deepest level while the eccentricity keeps growing.
        for (int iter = 0; iter < 4; ++iter) {
            int best = reach.back();
            int best_deg = std::numeric_limits<int>::max();
            for (auto it = reach.rbegin(); it != reach.rend() && level_[static_cast<std::size_t>(*it)] == depth; ++it) {
                const int deg = degree_in(*it, id);
                if (deg < best_deg) best_deg = deg, best = *it;
            }
            clear_levels(reach);
            int new_depth = 0;
            std::vector<int> again = bfs(best, id, new_depth);
            const bool grew = new_depth > depth;
            reach = std::move(again);
            depth = new_depth;
            if (!grew) break;
        }

        if (depth < 2) {
            clear_levels(reach);
            emit(nodes);
            return;
        }

        std::vector<int> count(static_cast<std::size_t>(depth) + 1, 0);
        for (int v : reach) ++count[static_cast<std::size_t>(level_[static_cast<std::size_t>(v)])];
        const long total = static_cast<long>(reach.size());
        int chosen = -1;
        long before = 0;
        long best_size = std::numeric_limits<long>::max();
        long best_balance = 0;
        for (int l = 0; l <= depth; ++l) {
            const long after = total - before - count[static_cast<std::size_t>(l)];
            const long balance = std::min(before, after);
            if (l >= 1 && l < depth && 5 * balance >= total) {
                const long size = count[static_cast<std::size_t>(l)];
                if (size < best_size || (size == best_size && balance > best_balance)) {
                    best_size = size;
                    best_balance = balance;
                    chosen = l;
                }
            }
            before += count[static_cast<std::size_t>(l)];
        }
        if (chosen < 0) {
            before = 0;
            for (int l = 0; l <= depth; ++l) {
                before += count[static_cast<std::size_t>(l)];
                if (2 * before >= total) {
                    chosen = std::clamp(l, 1, depth - 1);
                    break;
                }
            }
        }

        std::vector<int> part_a, part_b, sep;
        for (int v : reach) {
            const int lv = level_[static_cast<std::size_t>(v)];
            if (lv < chosen) part_a.push_back(v);
            else if (lv > chosen) part_b.push_back(v);
            else {
                bool touches_b = false;
                for (int w : g_.neighbours(v))
                    if (owner_[static_cast<std::size_t>(w)] == id && level_[static_cast<std::size_t>(w)] > chosen) {
                        touches_b = true;
                        break;
                    }
                (touches_b ? sep : part_a).push_back(v);
            }
        }
        clear_levels(reach);
        const int id_a = ++next_id_;
        const int id_b = ++next_id_;
        for (int v : part_a) owner_[static_cast<std::size_t>(v)] = id_a;
        for (int v : part_b) owner_[static_cast<std::size_t>(v)] = id_b;
        for (int v : sep) owner_[static_cast<std::size_t>(v)] = -2;
        std::sort(part_a.begin(), part_a.end());
        std::sort(part_b.begin(), part_b.end());
        std::sort(sep.begin(), sep.end());
        process(std::move(part_a), id_a);
        process(std::move(part_b), id_b);
        emit(sep);
    }

    const Graph& g_;
    int leaf_;
    int next_id_ = 0;
    std::vector<int> owner_;
    std::vector<int> level_;
    std::vector<int> order_;
};

// --- dense pivot blocks --------------------------------------------------------------

struct PivotBlock {
    std::vector<int> ipiv;
    Eigen::VectorXcd e;
    int info = 0;
};

PivotBlock factor_pivot_block(std::complex<double>* a, int n, int lda) {
    PivotBlock out;
    out.ipiv.assign(static_cast<std::size_t>(n), 0);
    out.e = Eigen::VectorXcd::Zero(n);
    if (n == 0) return out;
    const char uplo = 'L';
    int lwork = -1;
    std::complex<double> query;
    zhetrf_rk_(&uplo, &n, a, &lda, out.e.data(), out.ipiv.data(), &query, &lwork, &out.info, 1);
    lwork = std::max(1, static_cast<int>(query.real()));
    std::vector<std::complex<double>> work(static_cast<std::size_t>(lwork));
    zhetrf_rk_(&uplo, &n, a, &lda, out.e.data(), out.ipiv.data(), work.data(), &lwork, &out.info, 1);
    if (out.info < 0) throw FactorizationFailure("zhetrf_rk rejected argument " + std::to_string(-out.info));
    return out;
}

// Permutation pi with (P^T A P)(i, j) = A(pi[i], pi[j]) from the interchange
// sequence recorded by zhetrf_rk (lower storage).
std::vector<int> interchange_permutation(const std::vector<int>& ipiv) {
    const int n = static_cast<int>(ipiv.size());
    std::vector<int> pi(static_cast<std::size_t>(n));
    std::iota(pi.begin(), pi.end(), 0);
    for (int k = 0; k < n;) {
        if (ipiv[static_cast<std::size_t>(k)] > 0) {
            std::swap(pi[static_cast<std::size_t>(k)], pi[static_cast<std::size_t>(ipiv[static_cast<std::size_t>(k)] - 1)]);
            k += 1;
        } else {
            std::swap(pi[static_cast<std::size_t>(k)], pi[static_cast<std::size_t>(-ipiv[static_cast<std::size_t>(k)] - 1)]);
            std::swap(pi[static_cast<std::size_t>(k) + 1],
                      pi[static_cast<std::size_t>(-ipiv[static_cast<std::size_t>(k) + 1] - 1)]);
            k += 2;
        }
    }
    return pi;
}

// Adds the inertia of D to `inertia`; returns the smallest |eigenvalue| of D.
double tally_inertia(const Eigen::Ref<const Eigen::MatrixXcd>& factored, const PivotBlock& pb, Inertia& inertia) {
    const int n = static_cast<int>(pb.ipiv.size());
    double smallest = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n;) {
        if (pb.ipiv[static_cast<std::size_t>(k)] > 0) {
            const double d = factored(k, k).real();
            smallest = std::min(smallest, std::fabs(d));
            if (d > 0.0) ++inertia.positive;
            else if (d < 0.0) ++inertia.negative;
            else ++inertia.zero;
            k += 1;
        } else {
            const double a = factored(k, k).real();
            const double c = factored(k + 1, k + 1).real();
            const double e = std::abs(pb.e(k));
            const double det = a * c - e * e;
            const double half = 0.5 * (a + c);
            const double rad = std::hypot(0.5 * (a - c), e);
            const double big = std::fabs(half) + rad;
            smallest = std::min(smallest, big > 0.0 ? std::fabs(det) / big : 0.0);
            if (det < 0.0) {
                ++inertia.positive;
                ++inertia.negative;
            } else if (det == 0.0) {
                ++inertia.zero;
                (half > 0.0 ? inertia.positive : inertia.negative) += 1;
            } else if (half > 0.0) {
                inertia.positive += 2;
            } else {
                inertia.negative += 2;
            }
            k += 2;
        }
    }
    return smallest;
}

// W <- W D^{-1} for the block diagonal D of a factored pivot block.
void right_divide_by_d(Eigen::MatrixXcd& W, const Eigen::VectorXcd& d, const Eigen::VectorXcd& e,
                       const std::vector<int>& ipiv) {
    const int n = static_cast<int>(ipiv.size());
    for (int k = 0; k < n;) {
        if (ipiv[static_cast<std::size_t>(k)] > 0) {
            W.col(k) /= d(k);
            k += 1;
        } else {
            // D block [[a, conj(s)], [s, c]]; inverse [[c, -conj(s)], [-s, a]] / det.
            const std::complex<double> a = d(k), c = d(k + 1), s = e(k);
            const std::complex<double> det = a * c - s * std::conj(s);
            const Eigen::VectorXcd w0 = W.col(k);
            const Eigen::VectorXcd w1 = W.col(k + 1);
            W.col(k) = (w0 * c - w1 * s) / det;
            W.col(k + 1) = (-w0 * std::conj(s) + w1 * a) / det;
            k += 2;
        }
    }
}

// Z <- D^{-1} Z.
using RowMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void left_divide_by_d(Eigen::Ref<RowMatrix> Z, const Eigen::VectorXcd& d, const Eigen::VectorXcd& e,
                      const std::vector<int>& ipiv) {
    const int n = static_cast<int>(d.size());
    for (int k = 0; k < n;) {
        if (ipiv[static_cast<std::size_t>(k)] < 0) {
            const std::complex<double> a = d(k), c = d(k + 1), s = e(k);
            const std::complex<double> det = a * c - s * std::conj(s);
            const Eigen::RowVectorXcd z0 = Z.row(k);
            const Eigen::RowVectorXcd z1 = Z.row(k + 1);
            Z.row(k) = (z0 * c - z1 * std::conj(s)) / det;
            Z.row(k + 1) = (-z0 * s + z1 * a) / det;
            k += 2;
        } else {
            Z.row(k) /= d(k);
            k += 1;
        }
    }
}

} // namespace

std::vector<int> nested_dissection(const SparseHermitian& A, int leaf_size) {
    const Graph g = adjacency(A);
    return Dissector(g, std::max(leaf_size, 2)).run();
}

// --- symbolic analysis ---------------------------------------------------------------

SymbolicLdlt::SymbolicLdlt(const SparseHermitian& A) : n_(A.size()) {
    const Graph g = adjacency(A);
    std::vector<int> perm = Dissector(g, 48).run();
    std::vector<int> iperm(static_cast<std::size_t>(n_));
    for (int k = 0; k < n_; ++k) iperm[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = k;

    // Elimination tree of the permuted pattern (path-compressed ancestors).
    auto etree = [&](const std::vector<int>& p, const std::vector<int>& ip) {
        std::vector<int> parent(static_cast<std::size_t>(n_), -1), anc(static_cast<std::size_t>(n_), -1);
        for (int j = 0; j < n_; ++j) {
            for (int w : g.neighbours(p[static_cast<std::size_t>(j)])) {
                int r = ip[static_cast<std::size_t>(w)];
                if (r >= j) continue;
                while (anc[static_cast<std::size_t>(r)] != -1 && anc[static_cast<std::size_t>(r)] != j) {
                    const int next = anc[static_cast<std::size_t>(r)];
                    anc[static_cast<std::size_t>(r)] = j;
                    r = next;
                }
                if (anc[static_cast<std::size_t>(r)] == -1) {
                    anc[static_cast<std::size_t>(r)] = j;
                    parent[static_cast<std::size_t>(r)] = j;
                }
            }
        }
        return parent;
    };

    // Postorder so that every subtree occupies a contiguous column range.
    {
        const std::vector<int> parent = etree(perm, iperm);
        std::vector<std::vector<int>> kids(static_cast<std::size_t>(n_));
        std::vector<int> roots;
        for (int j = 0; j < n_; ++j) {
            const int pj = parent[static_cast<std::size_t>(j)];
            (pj < 0 ? roots : kids[static_cast<std::size_t>(pj)]).push_back(j);
        }
        std::vector<int> post;
        post.reserve(static_cast<std::size_t>(n_));
        std::vector<std::pair<int, std::size_t>> stack;
        for (int r : roots) {
            stack.emplace_back(r, 0);
            while (!stack.empty()) {
                auto& [v, next] = stack.back();
                if (next < kids[static_cast<std::size_t>(v)].size()) {
                    const int c = kids[static_cast<std::size_t>(v)][next++];
                    stack.emplace_back(c, 0);
                } else {
                    post.push_back(v);
                    stack.pop_back();
                }
            }
        }
        std::vector<int> composed(static_cast<std::size_t>(n_));
        for (int k = 0; k < n_; ++k) composed[static_cast<std::size_t>(k)] = perm[static_cast<std::size_t>(post[static_cast<std::size_t>(k)])];
        perm = std::move(composed);
        for (int k = 0; k < n_; ++k) iperm[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = k;
    }
    const std::vector<int> parent = etree(perm, iperm);

    // Column structures and relaxed supernodes in one pass over the columns.
    std::vector<int> owner_of_last(static_cast<std::size_t>(n_), -1); // last column -> supernode
    std::vector<std::vector<int>> child_cols(static_cast<std::size_t>(n_));
    for (int j = 0; j < n_; ++j)
        if (parent[static_cast<std::size_t>(j)] >= 0) child_cols[static_cast<std::size_t>(parent[static_cast<std::size_t>(j)])].push_back(j);

    std::vector<int> mark(static_cast<std::size_t>(n_), -1);
    std::vector<std::int64_t> zeros; // explicit zeros admitted per supernode
    first_.clear();
    std::vector<int> last;
    for (int j = 0; j < n_; ++j) {
        std::vector<int> rows;
        mark[static_cast<std::size_t>(j)] = j;
        for (int w : g.neighbours(perm[static_cast<std::size_t>(j)])) {
            const int i = iperm[static_cast<std::size_t>(w)];
            if (i > j && mark[static_cast<std::size_t>(i)] != j) {
                mark[static_cast<std::size_t>(i)] = j;
                rows.push_back(i);
            }
        }
        for (int c : child_cols[static_cast<std::size_t>(j)]) {
            const int s = owner_of_last[static_cast<std::size_t>(c)];
            for (int i : rows_[static_cast<std::size_t>(s)])
                if (i > j && mark[static_cast<std::size_t>(i)] != j) {
                    mark[static_cast<std::size_t>(i)] = j;
                    rows.push_back(i);
                }
        }
        std::sort(rows.begin(), rows.end());

        bool merged = false;
        if (j > 0 && parent[static_cast<std::size_t>(j) - 1] == j) {
            const int s = owner_of_last[static_cast<std::size_t>(j) - 1];
            const std::int64_t width = j - first_[static_cast<std::size_t>(s)];
            const std::int64_t below = static_cast<std::int64_t>(rows_[static_cast<std::size_t>(s)].size()) - 1;
            const std::int64_t extra = width * (static_cast<std::int64_t>(rows.size()) - below);
            const std::int64_t new_width = width + 1;
            const std::int64_t total = new_width * (new_width + 1) / 2 + new_width * static_cast<std::int64_t>(rows.size());
            const double frac = static_cast<double>(zeros[static_cast<std::size_t>(s)] + extra) / static_cast<double>(total);
            if (extra == 0 || (new_width <= 16 && frac < 0.5) || frac < 0.05) {
                merged = true;
                zeros[static_cast<std::size_t>(s)] += extra;
                rows_[static_cast<std::size_t>(s)] = std::move(rows);
                last[static_cast<std::size_t>(s)] = j;
                owner_of_last[static_cast<std::size_t>(j)] = s;
            }
        }
        if (!merged) {
            const int s = static_cast<int>(first_.size());
            first_.push_back(j);
            last.push_back(j);
            zeros.push_back(0);
            rows_.push_back(std::move(rows));
            owner_of_last[static_cast<std::size_t>(j)] = s;
        }
    }
    const int nsup = static_cast<int>(first_.size());
    first_.push_back(n_);

    std::vector<int> col_owner(static_cast<std::size_t>(n_));
    for (int s = 0; s < nsup; ++s)
        for (int j = first_[static_cast<std::size_t>(s)]; j < first_[static_cast<std::size_t>(s) + 1]; ++j)
            col_owner[static_cast<std::size_t>(j)] = s;
    children_.assign(static_cast<std::size_t>(nsup), {});
    for (int s = 0; s < nsup; ++s) {
        const auto& r = rows_[static_cast<std::size_t>(s)];
        if (!r.empty()) children_[static_cast<std::size_t>(col_owner[static_cast<std::size_t>(r.front())])].push_back(s);
        const std::int64_t w = first_[static_cast<std::size_t>(s) + 1] - first_[static_cast<std::size_t>(s)];
        factor_entries_ += w * w + w * static_cast<std::int64_t>(r.size());
        largest_front_ = std::max(largest_front_, static_cast<int>(w + static_cast<std::int64_t>(r.size())));
    }
    perm_ = std::move(perm);
    iperm_ = std::move(iperm);
}

// --- numeric factorization -------------------------------------------------------------

LdltFactor::LdltFactor(std::shared_ptr<const SymbolicLdlt> symbolic, const SparseHermitian& A, double shift,
                       LdltOptions options)
    : symbolic_(std::move(symbolic)), shift_(shift) {
    const SymbolicLdlt& sym = *symbolic_;
    if (A.size() != sym.n_) throw FactorizationFailure("matrix size differs from its symbolic analysis");
    const int n = sym.n_;
    const int nsup = sym.supernode_count();
    const double tol = options.pivot_tolerance * (A.max_abs() + std::fabs(shift));
    smallest_pivot_ = std::numeric_limits<double>::infinity();
    if (options.keep_factor) blocks_.resize(static_cast<std::size_t>(nsup));

    const auto rp = A.row_ptr();
    const auto ci = A.col_idx();
    const auto vals = A.values();
    std::vector<Eigen::MatrixXcd> updates(static_cast<std::size_t>(nsup));
    std::vector<int> local(static_cast<std::size_t>(n), -1);
    std::vector<int> pos;

    for (int s = 0; s < nsup; ++s) {
        const int f = sym.first_[static_cast<std::size_t>(s)];
        const int ns = sym.first_[static_cast<std::size_t>(s) + 1] - f;
        const auto& R = sym.rows_[static_cast<std::size_t>(s)];
        const int nr = static_cast<int>(R.size());
        const int m = ns + nr;
        for (int t = 0; t < ns; ++t) local[static_cast<std::size_t>(f + t)] = t;
        for (int t = 0; t < nr; ++t) local[static_cast<std::size_t>(R[static_cast<std::size_t>(t)])] = ns + t;

        Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(m, m);
        for (int j = f; j < f + ns; ++j) {
            const int old = sym.perm_[static_cast<std::size_t>(j)];
            const int lj = local[static_cast<std::size_t>(j)];
            for (auto p = rp[static_cast<std::size_t>(old)]; p < rp[static_cast<std::size_t>(old) + 1]; ++p) {
                const int i = sym.iperm_[static_cast<std::size_t>(ci[static_cast<std::size_t>(p)])];
                if (i < j) continue;
                F(local[static_cast<std::size_t>(i)], lj) += std::conj(vals[static_cast<std::size_t>(p)]);
            }
        }
        for (int t = 0; t < ns; ++t) F(t, t) -= shift;

        for (int c : sym.children_[static_cast<std::size_t>(s)]) {
            Eigen::MatrixXcd& U = updates[static_cast<std::size_t>(c)];
            const auto& Rc = sym.rows_[static_cast<std::size_t>(c)];
            const int nc = static_cast<int>(Rc.size());
            pos.resize(static_cast<std::size_t>(nc));
            for (int a = 0; a < nc; ++a) pos[static_cast<std::size_t>(a)] = local[static_cast<std::size_t>(Rc[static_cast<std::size_t>(a)])];
            for (int b = 0; b < nc; ++b) {
                const int cb = pos[static_cast<std::size_t>(b)];
                for (int a = b; a < nc; ++a) F(pos[static_cast<std::size_t>(a)], cb) += U(a, b);
            }
            U.resize(0, 0);
        }

        PivotBlock pb = factor_pivot_block(F.data(), ns, m);
        const double smallest = tally_inertia(F.topLeftCorner(ns, ns), pb, inertia_);
        smallest_pivot_ = std::min(smallest_pivot_, smallest);
        if (pb.info > 0 || smallest <= tol) {
            std::ostringstream os;
            os << "pivot breakdown at shift " << shift << " (|pivot| = " << smallest << ", tolerance " << tol << ")";
            throw ShiftTooClose(os.str(), shift);
        }

        const std::vector<int> pi = interchange_permutation(pb.ipiv);
        const Eigen::VectorXcd d = F.topLeftCorner(ns, ns).diagonal();
        Eigen::MatrixXcd L21;
        if (nr > 0) {
            Eigen::MatrixXcd W(nr, ns);
            for (int t = 0; t < ns; ++t) W.col(t) = F.block(ns, pi[static_cast<std::size_t>(t)], nr, 1);
            F.topLeftCorner(ns, ns).triangularView<Eigen::UnitLower>().adjoint().solveInPlace<Eigen::OnTheRight>(W);
            L21 = W;
            right_divide_by_d(L21, d, pb.e, pb.ipiv);
            Eigen::MatrixXcd U = F.bottomRightCorner(nr, nr);
            U.triangularView<Eigen::Lower>() -= L21 * W.adjoint();
            updates[static_cast<std::size_t>(s)] = std::move(U);
        }
        if (options.keep_factor) {
            Block& blk = blocks_[static_cast<std::size_t>(s)];
            blk.L11 = F.topLeftCorner(ns, ns).triangularView<Eigen::StrictlyLower>();
            blk.L21 = std::move(L21);
            blk.d = d;
            blk.e = pb.e;
            blk.pivot = pi;
            blk.ipiv = std::move(pb.ipiv);
        }
    }
}

void LdltFactor::solve(Eigen::MatrixXcd& B) const {
    if (blocks_.empty() && symbolic_->n_ > 0) throw FactorizationFailure("factor was built for counting only");
    const SymbolicLdlt& sym = *symbolic_;
    const int n = sym.n_;
    const Eigen::Index k = B.cols();
    // Row-major workspace: the solve gathers and scatters whole rows.
    RowMatrix Y(n, k);
    for (int i = 0; i < n; ++i) Y.row(i) = B.row(sym.perm_[static_cast<std::size_t>(i)]);

    const int nsup = sym.supernode_count();
    RowMatrix Z, T;
    for (int s = 0; s < nsup; ++s) {
        const Block& blk = blocks_[static_cast<std::size_t>(s)];
        const int f = sym.first_[static_cast<std::size_t>(s)];
        const int ns = static_cast<int>(blk.pivot.size());
        const auto& R = sym.rows_[static_cast<std::size_t>(s)];
        Z.resize(ns, k);
        for (int t = 0; t < ns; ++t) Z.row(t) = Y.row(f + blk.pivot[static_cast<std::size_t>(t)]);
        blk.L11.triangularView<Eigen::UnitLower>().solveInPlace(Z);
        if (!R.empty()) {
            T.noalias() = blk.L21 * Z;
            for (std::size_t t = 0; t < R.size(); ++t) Y.row(R[t]) -= T.row(static_cast<Eigen::Index>(t));
        }
        Y.middleRows(f, ns) = Z;
    }
    for (int s = 0; s < nsup; ++s) {
        const Block& blk = blocks_[static_cast<std::size_t>(s)];
        left_divide_by_d(Y.middleRows(sym.first_[static_cast<std::size_t>(s)], static_cast<Eigen::Index>(blk.pivot.size())), blk.d, blk.e, blk.ipiv);
    }
    for (int s = nsup - 1; s >= 0; --s) {
        const Block& blk = blocks_[static_cast<std::size_t>(s)];
        const int f = sym.first_[static_cast<std::size_t>(s)];
        const int ns = static_cast<int>(blk.pivot.size());
        const auto& R = sym.rows_[static_cast<std::size_t>(s)];
        Z = Y.middleRows(f, ns);
        if (!R.empty()) {
            T.resize(static_cast<Eigen::Index>(R.size()), k);
            for (std::size_t t = 0; t < R.size(); ++t) T.row(static_cast<Eigen::Index>(t)) = Y.row(R[t]);
            Z.noalias() -= blk.L21.adjoint() * T;
        }
        blk.L11.triangularView<Eigen::UnitLower>().adjoint().solveInPlace(Z);
        for (int t = 0; t < ns; ++t) Y.row(f + blk.pivot[static_cast<std::size_t>(t)]) = Z.row(t);
    }
    for (int i = 0; i < n; ++i) B.row(sym.perm_[static_cast<std::size_t>(i)]) = Y.row(i);
}

Eigen::VectorXcd LdltFactor::solve(const Eigen::VectorXcd& b) const {
    Eigen::MatrixXcd B = b;
    solve(B);
    return B.col(0);
}

Inertia dense_inertia(const Eigen::MatrixXcd& A, double pivot_tolerance) {
    const int n = static_cast<int>(A.rows());
    Eigen::MatrixXcd F = A;
    PivotBlock pb = factor_pivot_block(F.data(), n, std::max(n, 1));
    Inertia inertia;
    const double smallest = tally_inertia(F, pb, inertia);
    const double tol = pivot_tolerance * A.cwiseAbs().maxCoeff();
    if (pb.info > 0 || smallest <= tol)
        throw ShiftTooClose("dense pivot breakdown (|pivot| = " + std::to_string(smallest) + ")", 0.0);
    return inertia;
}

} // namespace landau
