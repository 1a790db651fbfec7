#pragma once

// Dense row-major matrices in double precision, plus the two factorizations
// the trainer relies on: a thin SVD (one-sided Jacobi) and seeded
// orthonormal-basis generation.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace supcfa {

class Matrix {
public:
    Matrix() = default;

    /// Zero-filled rows x cols matrix.
    Matrix(std::size_t rows, std::size_t cols);

    /// Takes ownership of row-major entries. Throws std::invalid_argument if
    /// the length does not match or any entry is NaN/Inf.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

    /// Row-wise literal, e.g. Matrix{{1, 2}, {3, 4}}.
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::vector<double> column(std::size_t c) const;

    std::span<const double> entries() const noexcept { return data_; }

    Matrix transposed() const;

    /// Columns [0, count) as a new matrix.
    Matrix left_columns(std::size_t count) const;

    /// Shape as "RxC", used in error messages.
    std::string shape() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);

/// aᵀ·b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// a·bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

/// Row vector times matrix: x·a.
std::vector<double> row_times(std::span<const double> x, const Matrix& a);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
double trace(const Matrix& a);
double dot(std::span<const double> a, std::span<const double> b);

/// ‖aᵀa − I‖_max, the deviation of a's columns from orthonormality.
double orthonormality_error(const Matrix& a);

struct SvdResult {
    Matrix u;                            // rows x k, orthonormal columns
    std::vector<double> singular_values; // k = min(rows, cols), descending
    Matrix vt;                           // k x cols, orthonormal rows
};

struct SvdOptions {
    std::size_t max_sweeps = 80;
    double tolerance = 1e-15; // relative off-diagonal threshold per column pair
};

/// Thin SVD. Each left singular vector is sign-normalized so its
/// largest-magnitude entry is positive; the paired right vector follows.
/// Throws std::runtime_error if the sweep cap is reached first.
SvdResult svd(const Matrix& a, const SvdOptions& options = {});

/// u·diag(s)·vt.
Matrix reconstruct(const SvdResult& s);

/// rows x cols matrix with orthonormal columns: modified Gram–Schmidt (two
/// passes) applied to a seeded standard-normal draw. Requires cols <= rows.
Matrix random_orthonormal(std::size_t rows, std::size_t cols, std::uint64_t seed);

} // namespace supcfa
