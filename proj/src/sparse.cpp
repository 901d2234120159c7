#include "landau/sparse.hpp"

#include "landau/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace landau {

void SparseHermitian::Builder::add(int row, int col, cplx v) {
    if (row < 0 || col < 0 || row >= n_ || col >= n_)
        throw std::out_of_range("SparseHermitian::Builder::add: index out of range");
    if (row < col) throw std::invalid_argument("SparseHermitian::Builder::add expects row >= col");
    if (row == col) v = cplx(v.real(), 0.0);
    entries_.push_back({row, col, v});
}

SparseHermitian SparseHermitian::Builder::build(std::optional<LatticeLayout> layout) {
    std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return a.col != b.col ? a.col < b.col : a.row < b.row;
    });
    // Merge duplicates in insertion order so the result is deterministic.
    std::vector<Entry> lower;
    lower.reserve(entries_.size());
    for (const auto& e : entries_) {
        if (!lower.empty() && lower.back().row == e.row && lower.back().col == e.col)
            lower.back().value += e.value;
        else
            lower.push_back(e);
    }

    SparseHermitian H;
    H.n_ = n_;
    H.layout_ = layout;
    std::vector<std::int64_t> count(static_cast<std::size_t>(n_) + 1, 0);
    for (const auto& e : lower) {
        ++count[static_cast<std::size_t>(e.row) + 1];
        if (e.row != e.col) ++count[static_cast<std::size_t>(e.col) + 1];
        else ++H.diag_count_;
    }
    for (std::size_t i = 0; i < static_cast<std::size_t>(n_); ++i) count[i + 1] += count[i];
    H.row_ptr_ = count;
    H.col_idx_.resize(static_cast<std::size_t>(count.back()));
    H.values_.resize(static_cast<std::size_t>(count.back()));
    std::vector<std::int64_t> next(count.begin(), count.end() - 1);
    // Entries sorted by (col, row): row i receives lower entries (i, c) with
    // c <= i in ascending c, then mirrored entries (c, i) for c > i in
    // ascending c, giving sorted rows.
    for (const auto& e : lower) {
        const auto p = static_cast<std::size_t>(next[static_cast<std::size_t>(e.row)]++);
        H.col_idx_[p] = e.col;
        H.values_[p] = e.value;
    }
    for (const auto& e : lower) {
        if (e.row == e.col) continue;
        const auto p = static_cast<std::size_t>(next[static_cast<std::size_t>(e.col)]++);
        H.col_idx_[p] = e.row;
        H.values_[p] = std::conj(e.value);
    }
    entries_.clear();
    return H;
}

cplx SparseHermitian::coeff(int row, int col) const {
    const auto begin = col_idx_.begin() + row_ptr_[static_cast<std::size_t>(row)];
    const auto end = col_idx_.begin() + row_ptr_[static_cast<std::size_t>(row) + 1];
    const auto it = std::lower_bound(begin, end, col);
    if (it == end || *it != col) return {0.0, 0.0};
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

double SparseHermitian::max_abs() const {
    double m = 0.0;
    for (const auto& v : values_) m = std::max(m, std::abs(v));
    return m;
}

double SparseHermitian::gershgorin_lower() const {
    double lo = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_; ++i) {
        double diag = 0.0, radius = 0.0;
        for (auto p = row_ptr_[static_cast<std::size_t>(i)]; p < row_ptr_[static_cast<std::size_t>(i) + 1]; ++p) {
            const auto k = static_cast<std::size_t>(p);
            if (col_idx_[k] == i) diag = values_[k].real();
            else radius += std::abs(values_[k]);
        }
        lo = std::min(lo, diag - radius);
    }
    return lo;
}

double SparseHermitian::gershgorin_upper() const {
    double hi = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_; ++i) {
        double diag = 0.0, radius = 0.0;
        for (auto p = row_ptr_[static_cast<std::size_t>(i)]; p < row_ptr_[static_cast<std::size_t>(i) + 1]; ++p) {
            const auto k = static_cast<std::size_t>(p);
            if (col_idx_[k] == i) diag = values_[k].real();
            else radius += std::abs(values_[k]);
        }
        hi = std::max(hi, diag + radius);
    }
    return hi;
}

bool SparseHermitian::is_real() const {
    return std::all_of(values_.begin(), values_.end(), [](const cplx& v) { return v.imag() == 0.0; });
}

void SparseHermitian::multiply(std::span<const cplx> x, std::span<cplx> y) const {
    for (int i = 0; i < n_; ++i) {
        cplx acc{0.0, 0.0};
        for (auto p = row_ptr_[static_cast<std::size_t>(i)]; p < row_ptr_[static_cast<std::size_t>(i) + 1]; ++p)
            acc += values_[static_cast<std::size_t>(p)] * x[static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(p)])];
        y[static_cast<std::size_t>(i)] = acc;
    }
}

Eigen::VectorXcd SparseHermitian::operator*(const Eigen::VectorXcd& x) const {
    Eigen::VectorXcd y(n_);
    multiply({x.data(), static_cast<std::size_t>(x.size())}, {y.data(), static_cast<std::size_t>(y.size())});
    return y;
}

Eigen::MatrixXcd SparseHermitian::apply(const Eigen::MatrixXcd& X) const {
    Eigen::MatrixXcd Y(n_, X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c)
        multiply({X.col(c).data(), static_cast<std::size_t>(n_)}, {Y.col(c).data(), static_cast<std::size_t>(n_)});
    return Y;
}

Eigen::MatrixXcd SparseHermitian::to_dense() const {
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n_, n_);
    for (int i = 0; i < n_; ++i)
        for (auto p = row_ptr_[static_cast<std::size_t>(i)]; p < row_ptr_[static_cast<std::size_t>(i) + 1]; ++p)
            A(i, col_idx_[static_cast<std::size_t>(p)]) = values_[static_cast<std::size_t>(p)];
    return A;
}

double SparseHermitian::hermiticity_defect() const {
    double worst = 0.0;
    for (int i = 0; i < n_; ++i)
        for (auto p = row_ptr_[static_cast<std::size_t>(i)]; p < row_ptr_[static_cast<std::size_t>(i) + 1]; ++p) {
            const int j = col_idx_[static_cast<std::size_t>(p)];
            const cplx v = values_[static_cast<std::size_t>(p)];
            if (i == j) worst = std::max(worst, std::fabs(v.imag()));
            else worst = std::max(worst, std::abs(v - std::conj(coeff(j, i))));
        }
    return worst;
}

// --- Matrix Market ----------------------------------------------------------------

namespace {

constexpr const char* kHeader = "%%MatrixMarket matrix coordinate complex hermitian";

void append_number(std::string& out, double v) {
    char buf[40];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(buf, static_cast<std::size_t>(len));
}

} // namespace

std::string matrix_market_string(const SparseHermitian& H) {
    const int n = H.size();
    // Gather lower-triangle entries column by column: A(i, j), i >= j, equals
    // conj(A(j, i)), which row j stores at column i.
    std::string out;
    out.reserve(H.lower_nonzeros() * 56 + 128);
    out += kHeader;
    out += '\n';
    out += std::to_string(n) + ' ' + std::to_string(n) + ' ' + std::to_string(H.lower_nonzeros()) + '\n';
    const auto rp = H.row_ptr();
    const auto ci = H.col_idx();
    const auto vals = H.values();
    for (int j = 0; j < n; ++j) {
        for (auto p = rp[static_cast<std::size_t>(j)]; p < rp[static_cast<std::size_t>(j) + 1]; ++p) {
            const int i = ci[static_cast<std::size_t>(p)];
            if (i < j) continue;
            const cplx v = std::conj(vals[static_cast<std::size_t>(p)]);
            out += std::to_string(i + 1);
            out += ' ';
            out += std::to_string(j + 1);
            out += ' ';
            append_number(out, v.real());
            out += ' ';
            append_number(out, i == j ? 0.0 : v.imag());
            out += '\n';
        }
    }
    return out;
}

void export_matrix_market(const SparseHermitian& H, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    const std::string text = matrix_market_string(H);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

SparseHermitian parse_matrix_market(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty Matrix Market input");
    std::string banner, object, format, field, symmetry;
    {
        std::istringstream hs(line);
        hs >> banner >> object >> format >> field >> symmetry;
        auto lower = [](std::string s) {
            std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            return s;
        };
        if (banner != "%%MatrixMarket" || lower(object) != "matrix" || lower(format) != "coordinate")
            throw IoError("not a Matrix Market coordinate matrix");
        field = lower(field);
        symmetry = lower(symmetry);
        if (field != "complex" && field != "real")
            throw IoError("unsupported Matrix Market field '" + field + "'");
        if (symmetry != "hermitian" && symmetry != "symmetric" && !(field == "real" && symmetry == "symmetric"))
            throw IoError("unsupported Matrix Market symmetry '" + symmetry + "'");
        if (field == "complex" && symmetry == "symmetric")
            throw IoError("complex symmetric matrices are not Hermitian");
    }
    while (std::getline(is, line))
        if (!line.empty() && line[0] != '%') break;
    long rows = 0, cols = 0, entries = 0;
    {
        std::istringstream ss(line);
        if (!(ss >> rows >> cols >> entries) || rows != cols || rows <= 0)
            throw IoError("bad Matrix Market size line");
    }
    SparseHermitian::Builder builder(static_cast<int>(rows));
    const bool complex_field = field == "complex";
    for (long k = 0; k < entries; ++k) {
        if (!std::getline(is, line)) throw IoError("Matrix Market input ends early");
        const char* s = line.c_str();
        char* end = nullptr;
        const long i = std::strtol(s, &end, 10);
        s = end;
        const long j = std::strtol(s, &end, 10);
        s = end;
        const double re = std::strtod(s, &end);
        s = end;
        double im = 0.0;
        if (complex_field) im = std::strtod(s, &end);
        if (i < 1 || j < 1 || i > rows || j > rows) throw IoError("Matrix Market index out of range");
        if (i == j && im != 0.0) throw IoError("Hermitian matrix with a non-real diagonal entry");
        if (i >= j) builder.add(static_cast<int>(i - 1), static_cast<int>(j - 1), {re, im});
        else builder.add(static_cast<int>(j - 1), static_cast<int>(i - 1), {re, -im});
    }
    return builder.build();
}

SparseHermitian import_matrix_market(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_matrix_market(ss.str());
}

} // namespace landau
