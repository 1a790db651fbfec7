#include "supcfa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace supcfa {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
    }
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// Subtracts from v its projection onto each of the given unit vectors.
void orthogonalize_against(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
    for (const auto& q : basis) {
        const double proj = dot(v, q);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= proj * q[i];
    }
}

// One-sided Jacobi on a tall matrix (rows >= cols), stored as columns.
SvdResult jacobi_tall(const Matrix& a, const SvdOptions& options) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    std::vector<std::vector<double>> cols(n, std::vector<double>(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) cols[j][i] = a(i, j);
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) v[j][j] = 1.0;

    const double tol = options.tolerance > 0.0 ? std::max(options.tolerance, static_cast<double>(m) * kEps)
                                               : static_cast<double>(m) * kEps;
    const double scale = std::max(frobenius_norm(a), std::numeric_limits<double>::min());
    // Columns below this squared norm are numerically zero; rotating them only stirs noise.
    const double negligible = (kEps * scale) * (kEps * scale);

    bool converged = (n < 2);
    double worst = 0.0;
    std::size_t sweep = 0;
    for (; sweep < options.max_sweeps && !converged; ++sweep) {
        bool rotated = false;
        worst = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                auto& ap = cols[p];
                auto& aq = cols[q];
                const double alpha = dot(ap, ap);
                const double beta = dot(aq, aq);
                const double gamma = dot(ap, aq);
                if (alpha <= negligible || beta <= negligible || gamma == 0.0) continue;
                const double off = std::abs(gamma) / std::sqrt(alpha * beta);
                worst = std::max(worst, off);
                if (off <= tol) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double x = ap[i];
                    const double y = aq[i];
                    ap[i] = c * x - s * y;
                    aq[i] = s * x + c * y;
                }
                auto& vp = v[p];
                auto& vq = v[q];
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = vp[i];
                    const double y = vq[i];
                    vp[i] = c * x - s * y;
                    vq[i] = s * x + c * y;
                }
            }
        }
        converged = !rotated;
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "svd: no convergence after " << options.max_sweeps << " sweeps (max relative off-diagonal " << worst
            << ")";
        throw std::runtime_error(msg.str());
    }

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(cols[j]);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double sigma_max = n > 0 ? sigma[order[0]] : 0.0;
    const double cutoff = static_cast<double>(std::max(m, n)) * kEps * sigma_max;

    SvdResult out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
    std::vector<std::vector<double>> accepted;
    std::vector<std::size_t> deficient;
    accepted.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.singular_values[k] = sigma[j];
        std::vector<double> u(m, 0.0);
        if (sigma[j] > cutoff && sigma[j] > 0.0) {
            for (std::size_t i = 0; i < m; ++i) u[i] = cols[j][i] / sigma[j];
        } else {
            deficient.push_back(k);
        }
        accepted.push_back(std::move(u));
        for (std::size_t i = 0; i < n; ++i) out.vt(k, i) = v[j][i];
    }

    // Fill numerically-zero directions with unit vectors orthogonal to the rest.
    if (!deficient.empty()) {
        std::vector<std::vector<double>> basis;
        for (std::size_t k = 0; k < n; ++k)
            if (std::find(deficient.begin(), deficient.end(), k) == deficient.end()) basis.push_back(accepted[k]);
        std::size_t next_axis = 0;
        for (std::size_t k : deficient) {
            while (true) {
                if (next_axis >= m) throw std::runtime_error("svd: failed to complete left singular basis");
                std::vector<double> e(m, 0.0);
                e[next_axis++] = 1.0;
                orthogonalize_against(e, basis);
                orthogonalize_against(e, basis);
                const double len = norm2(e);
                if (len > 0.5) {
                    for (double& x : e) x /= len;
                    basis.push_back(e);
                    accepted[k] = std::move(e);
                    break;
                }
            }
        }
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < m; ++i) out.u(i, k) = accepted[k][i];
    return out;
}

void normalize_signs(SvdResult& s) {
    const std::size_t k = s.singular_values.size();
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t best = 0;
        double best_mag = -1.0;
        for (std::size_t i = 0; i < s.u.rows(); ++i) {
            const double mag = std::abs(s.u(i, j));
            if (mag > best_mag) {
                best_mag = mag;
                best = i;
            }
        }
        if (s.u(best, j) < 0.0) {
            for (std::size_t i = 0; i < s.u.rows(); ++i) s.u(i, j) = -s.u(i, j);
            for (std::size_t i = 0; i < s.vt.cols(); ++i) s.vt(j, i) = -s.vt(j, i);
        }
    }
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) {
        std::ostringstream msg;
        msg << "Matrix: " << data_.size() << " entries do not fill " << rows_ << "x" << cols_;
        throw std::invalid_argument(msg.str());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            std::ostringstream msg;
            msg << "Matrix: non-finite entry at (" << i / std::max<std::size_t>(cols_, 1) << ", "
                << i % std::max<std::size_t>(cols_, 1) << ")";
            throw std::invalid_argument(msg.str());
        }
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ > 0 ? rows.begin()->size() : 0;
    std::vector<double> entries;
    entries.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw std::invalid_argument("Matrix: ragged initializer");
        entries.insert(entries.end(), r.begin(), r.end());
    }
    *this = Matrix(rows_, cols_, std::move(entries));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
}

Matrix Matrix::diagonal(std::span<const double> values) {
    Matrix out(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out(i, i) = values[i];
    return out;
}

std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

Matrix Matrix::transposed() const {
    Matrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
}

Matrix Matrix::left_columns(std::size_t count) const {
    if (count > cols_) throw std::invalid_argument("left_columns: " + std::to_string(count) + " > " + shape());
    Matrix out(rows_, count);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < count; ++c) out(r, c) = (*this)(r, c);
    return out;
}

std::string Matrix::shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch " + a.shape() + " * " + b.shape());
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const auto src = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw std::invalid_argument("matmul_tn: shape mismatch " + a.shape() + "ᵀ * " + b.shape());
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const auto ak = a.row(k);
        const auto bk = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            auto dst = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aki * bk[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw std::invalid_argument("matmul_nt: shape mismatch " + a.shape() + " * " + b.shape() + "ᵀ");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
    return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator+");
    Matrix out = a;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto dst = out.row(r);
        const auto src = b.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) dst[c] += src[c];
    }
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator-");
    Matrix out = a;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto dst = out.row(r);
        const auto src = b.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) dst[c] -= src[c];
    }
    return out;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix out = a;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (double& x : out.row(r)) x *= s;
    return out;
}

std::vector<double> row_times(std::span<const double> x, const Matrix& a) {
    if (x.size() != a.rows()) {
        throw std::invalid_argument("row_times: vector of length " + std::to_string(x.size()) + " against " +
                                    a.shape());
    }
    std::vector<double> out(a.cols(), 0.0);
    for (std::size_t k = 0; k < a.rows(); ++k) {
        if (x[k] == 0.0) continue;
        const auto src = a.row(k);
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += x[k] * src[j];
    }
    return out;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double x : a.entries()) s += x * x;
    return std::sqrt(s);
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double x : a.entries()) m = std::max(m, std::abs(x));
    return m;
}

double trace(const Matrix& a) {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) t += a(i, i);
    return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double orthonormality_error(const Matrix& a) {
    return max_abs(matmul_tn(a, a) - Matrix::identity(a.cols()));
}

SvdResult svd(const Matrix& a, const SvdOptions& options) {
    if (a.empty()) throw std::invalid_argument("svd: empty matrix");
    SvdResult out;
    if (a.rows() >= a.cols()) {
        out = jacobi_tall(a, options);
    } else {
        SvdResult t = jacobi_tall(a.transposed(), options);
        out.u = t.vt.transposed();
        out.singular_values = std::move(t.singular_values);
        out.vt = t.u.transposed();
    }
    normalize_signs(out);
    return out;
}

Matrix reconstruct(const SvdResult& s) {
    Matrix us = s.u;
    for (std::size_t r = 0; r < us.rows(); ++r)
        for (std::size_t c = 0; c < us.cols(); ++c) us(r, c) *= s.singular_values[c];
    return matmul(us, s.vt);
}

Matrix random_orthonormal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    if (cols > rows) {
        throw std::invalid_argument("random_orthonormal: cols (" + std::to_string(cols) + ") > rows (" +
                                    std::to_string(rows) + ")");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> basis;
    basis.reserve(cols);
    while (basis.size() < cols) {
        std::vector<double> v(rows);
        for (double& x : v) x = normal(rng);
        const double before = norm2(v);
        orthogonalize_against(v, basis);
        orthogonalize_against(v, basis);
        const double len = norm2(v);
        // A draw nearly inside the current span is discarded and redrawn.
        if (len <= 1e-8 * before) continue;
        for (double& x : v) x /= len;
        basis.push_back(std::move(v));
    }
    Matrix out(rows, cols);
    for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < rows; ++r) out(r, c) = basis[c][r];
    return out;
}

} // namespace supcfa
