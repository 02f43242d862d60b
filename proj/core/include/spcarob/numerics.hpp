#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spcarob {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Mat identity(std::size_t n);
    static Mat from_rows(const std::vector<Vec>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }
    Vec col(std::size_t j) const;

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    Mat transposed() const;
    bool all_finite() const noexcept;

    friend bool operator==(const Mat&, const Mat&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm1(std::span<const double> v);
double norm2(std::span<const double> v);
double norm_inf(std::span<const double> v);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

Vec matvec(const Mat& a, std::span<const double> x);      // A x
Vec matvec_t(const Mat& a, std::span<const double> y);    // Aᵀ y
Mat matmul(const Mat& a, const Mat& b);                   // A B
Mat matmul_nt(const Mat& a, const Mat& b);                // A Bᵀ
Mat matmul_tn(const Mat& a, const Mat& b);                // Aᵀ B
// XᵀX / divisor, exploiting symmetry.
Mat gram(const Mat& x, double divisor = 1.0);

double max_abs_asymmetry(const Mat& s);

struct SymEig {
    Vec values;   // descending
    Mat vectors;  // column k pairs with values[k]
    int sweeps = 0;
};

struct JacobiOptions {
    // Stop once the off-diagonal Frobenius mass falls below rel_tol * ‖S‖_F.
    double rel_tol = 1e-12;
    int max_sweeps = 100;
    double symmetry_tol = 1e-10;
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvectors are
// normalised so their largest-magnitude entry is positive; ties between
// equal eigenvalues are ordered by the index of that entry.
SymEig sym_eig(const Mat& s, const JacobiOptions& options = {});

struct PowerIterationOptions {
    double rel_tol = 1e-13;
    int max_iters = 20000;
};

// Largest singular value via power iteration on WᵀW from a fixed start vector.
double spectral_norm(const Mat& w, const PowerIterationOptions& options = {});

// sign(v_j) * max(|v_j| - lambda, 0)
Vec soft_threshold(std::span<const double> v, double lambda);
double soft_threshold(double v, double lambda);

}  // namespace spcarob
