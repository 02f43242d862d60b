#include "spcarob/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "spcarob/error.hpp"

namespace spcarob {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError(fmt::format("Mat: {}x{} needs {} entries, got {}", rows_, cols_,
                                         rows_ * cols_, data_.size()));
    }
}

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat Mat::from_rows(const std::vector<Vec>& rows) {
    if (rows.empty()) return {};
    Mat m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols()) throw DimensionError("Mat::from_rows: ragged rows");
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

Vec Mat::col(std::size_t j) const {
    Vec out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
}

Mat Mat::transposed() const {
    Mat t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

bool Mat::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm1(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double norm_inf(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw DimensionError("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vec matvec(const Mat& a, std::span<const double> x) {
    if (x.size() != a.cols())
        throw DimensionError(fmt::format("matvec: {}x{} times length {}", a.rows(), a.cols(), x.size()));
    Vec out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
        out[i] = s;
    }
    return out;
}

Vec matvec_t(const Mat& a, std::span<const double> y) {
    if (y.size() != a.rows())
        throw DimensionError(fmt::format("matvec_t: ({}x{})ᵀ times length {}", a.rows(), a.cols(), y.size()));
    Vec out(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double yi = y[i];
        if (yi == 0.0) continue;
        const auto r = a.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) out[j] += yi * r[j];
    }
    return out;
}

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows())
        throw DimensionError(fmt::format("matmul: {}x{} times {}x{}", a.rows(), a.cols(), b.rows(), b.cols()));
    Mat c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        const auto ai = a.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const auto bk = b.row(k);
            for (std::size_t j = 0; j < bk.size(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
    if (a.cols() != b.cols())
        throw DimensionError(fmt::format("matmul_nt: {}x{} times ({}x{})ᵀ", a.rows(), a.cols(), b.rows(), b.cols()));
    Mat c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ai = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto bj = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < ai.size(); ++k) s += ai[k] * bj[k];
            c(i, j) = s;
        }
    }
    return c;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows())
        throw DimensionError(fmt::format("matmul_tn: ({}x{})ᵀ times {}x{}", a.rows(), a.cols(), b.rows(), b.cols()));
    Mat c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const auto ak = a.row(k);
        const auto bk = b.row(k);
        for (std::size_t i = 0; i < ak.size(); ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            auto ci = c.row(i);
            for (std::size_t j = 0; j < bk.size(); ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

Mat gram(const Mat& x, double divisor) {
    const std::size_t d = x.cols();
    Mat g(d, d);
    // Row blocks keep the accumulated upper triangle hot in cache.
    constexpr std::size_t kBlock = 64;
    for (std::size_t r0 = 0; r0 < x.rows(); r0 += kBlock) {
        const std::size_t r1 = std::min(x.rows(), r0 + kBlock);
        for (std::size_t i = 0; i < d; ++i) {
            double* gi = g.row(i).data();
            for (std::size_t r = r0; r < r1; ++r) {
                const double* xr = x.row(r).data();
                const double xi = xr[i];
                if (xi == 0.0) continue;
                for (std::size_t j = i; j < d; ++j) gi[j] += xi * xr[j];
            }
        }
    }
    const double inv = 1.0 / divisor;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            g(i, j) *= inv;
            g(j, i) = g(i, j);
        }
    }
    return g;
}

double max_abs_asymmetry(const Mat& s) {
    double worst = 0.0;
    for (std::size_t i = 0; i < s.rows(); ++i)
        for (std::size_t j = i + 1; j < s.cols(); ++j) worst = std::max(worst, std::abs(s(i, j) - s(j, i)));
    return worst;
}

namespace {

std::size_t argmax_abs(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[best])) best = i;
    return best;
}

}  // namespace

SymEig sym_eig(const Mat& s, const JacobiOptions& options) {
    if (s.rows() != s.cols())
        throw DimensionError(fmt::format("sym_eig: matrix is {}x{}, not square", s.rows(), s.cols()));
    const std::size_t n = s.rows();
    if (max_abs_asymmetry(s) > options.symmetry_tol)
        throw DimensionError(fmt::format("sym_eig: matrix is not symmetric (max |S-Sᵀ| = {:g})",
                                         max_abs_asymmetry(s)));

    Mat a = s;
    // Rows of vt are the eigenvectors; row updates stay contiguous.
    Mat vt = Mat::identity(n);

    double frob = 0.0;
    for (double v : a.values()) frob += v * v;
    frob = std::sqrt(frob);

    SymEig out;
    if (n == 0) return out;
    const double target = options.rel_tol * frob;
    const double skip = 1e-3 * target / static_cast<double>(n);

    Vec rp(n), rq(n);
    int sweep = 0;
    for (; sweep < options.max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
        if (std::sqrt(off) <= target) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= skip) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;

                double* ap = a.row(p).data();
                double* aq = a.row(q).data();
                for (std::size_t k = 0; k < n; ++k) {
                    rp[k] = c * ap[k] - sn * aq[k];
                    rq[k] = sn * ap[k] + c * aq[k];
                }
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    ap[k] = rp[k];
                    aq[k] = rq[k];
                    a(k, p) = rp[k];
                    a(k, q) = rq[k];
                }
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;

                double* vp = vt.row(p).data();
                double* vq = vt.row(q).data();
                for (std::size_t k = 0; k < n; ++k) {
                    const double x = vp[k];
                    const double y = vq[k];
                    vp[k] = c * x - sn * y;
                    vq[k] = sn * x + c * y;
                }
            }
        }
    }
    out.sweeps = sweep;

    struct Entry {
        double value;
        std::size_t lead;
        std::size_t index;
    };
    std::vector<Entry> entries(n);
    for (std::size_t k = 0; k < n; ++k) {
        auto v = vt.row(k);
        const std::size_t lead = argmax_abs(v);
        if (v[lead] < 0.0)
            for (double& x : v) x = -x;
        entries[k] = {a(k, k), lead, k};
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& x, const Entry& y) { return x.value > y.value; });
    // Degenerate eigenvalues: order each run of (numerically) equal values by
    // the position of the eigenvector's dominant coordinate.
    const double tie_tol = 1e-12 * std::max(1.0, frob);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && entries[j - 1].value - entries[j].value <= tie_tol) ++j;
        std::stable_sort(entries.begin() + static_cast<std::ptrdiff_t>(i),
                         entries.begin() + static_cast<std::ptrdiff_t>(j),
                         [](const Entry& x, const Entry& y) { return x.lead < y.lead; });
        i = j;
    }

    out.values.resize(n);
    out.vectors = Mat(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = entries[k].value;
        const auto v = vt.row(entries[k].index);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v[i];
    }
    return out;
}

double spectral_norm(const Mat& w, const PowerIterationOptions& options) {
    if (w.empty()) throw DimensionError("spectral_norm: empty matrix");
    const bool wide = w.rows() < w.cols();
    const std::size_t n = wide ? w.rows() : w.cols();

    Vec v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = 1.0 + static_cast<double>(j % 7) / 10.0;
    double nv = norm2(v);
    for (double& x : v) x /= nv;

    double sigma = 0.0;
    for (int it = 0; it < options.max_iters; ++it) {
        // Gram product on the smaller side: WWᵀ for wide W, WᵀW otherwise.
        Vec u = wide ? matvec_t(w, v) : matvec(w, v);
        const double next_sigma = norm2(u);
        Vec g = wide ? matvec(w, u) : matvec_t(w, u);
        const double ng = norm2(g);
        if (ng == 0.0) return next_sigma;
        for (std::size_t j = 0; j < n; ++j) v[j] = g[j] / ng;
        if (it > 0 && std::abs(next_sigma - sigma) <= options.rel_tol * next_sigma) {
            sigma = next_sigma;
            break;
        }
        sigma = next_sigma;
    }
    // Rayleigh value at the final iterate.
    Vec u = wide ? matvec_t(w, v) : matvec(w, v);
    return std::max(sigma, norm2(u));
}

double soft_threshold(double v, double lambda) {
    if (lambda < 0.0) throw ParameterError(fmt::format("soft_threshold: negative lambda {}", lambda));
    const double m = std::abs(v) - lambda;
    if (m <= 0.0) return 0.0;
    return v < 0.0 ? -m : m;
}

Vec soft_threshold(std::span<const double> v, double lambda) {
    if (lambda < 0.0) throw ParameterError(fmt::format("soft_threshold: negative lambda {}", lambda));
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = soft_threshold(v[i], lambda);
    return out;
}

}  // namespace spcarob
