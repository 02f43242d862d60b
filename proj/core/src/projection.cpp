#include "spcarob/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "spcarob/error.hpp"

namespace spcarob {

std::string_view to_string(ProjectionKind kind) { return kind == ProjectionKind::Pca ? "pca" : "spca"; }

ProjectionKind parse_projection_kind(std::string_view text) {
    if (text == "pca") return ProjectionKind::Pca;
    if (text == "spca") return ProjectionKind::Spca;
    throw ParameterError(fmt::format("unknown projection kind '{}'", text));
}

ProjectionModel ProjectionModel::from_matrix(ProjectionKind kind, Mat w, Vec b) {
    if (b.size() != w.rows())
        throw DimensionError(fmt::format("projection bias has length {}, W has {} rows", b.size(), w.rows()));
    ProjectionModel m;
    m.kind = kind;
    m.w = std::move(w);
    m.b = std::move(b);
    m.converged.assign(m.w.rows(), true);
    m.refresh_stats();
    return m;
}

void ProjectionModel::refresh_stats() {
    std::size_t nnz = 0;
    col_norms.assign(w.cols(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const auto row = w.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (std::abs(row[j]) >= kZeroThreshold) ++nnz;
            col_norms[j] += row[j] * row[j];
        }
    }
    for (double& c : col_norms) c = std::sqrt(c);
    density = w.empty() ? 0.0 : static_cast<double>(nnz) / static_cast<double>(w.size());
}

Vec ProjectionModel::apply(std::span<const double> x) const {
    Vec z = matvec(w, x);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += b[i];
    return z;
}

Mat covariance(const Mat& x_centered) {
    if (x_centered.rows() == 0) throw DimensionError("covariance: no samples");
    return gram(x_centered, static_cast<double>(x_centered.rows()));
}

namespace {

Vec mean_bias(const Mat& w, const CenteringInfo& info) {
    if (info.mean.size() != w.cols())
        throw DimensionError(fmt::format("centering mean has length {}, W has {} columns", info.mean.size(), w.cols()));
    Vec b = matvec(w, info.mean);
    for (double& v : b) v = -v;
    return b;
}

}  // namespace

ProjectionModel fit_pca(const SymEig& eig, const CenteringInfo& info, std::size_t r) {
    const std::size_t d = eig.values.size();
    if (r == 0 || r > d) throw ParameterError(fmt::format("fit_pca: r = {} outside [1, {}]", r, d));
    Mat w(r, d);
    for (std::size_t k = 0; k < r; ++k)
        for (std::size_t j = 0; j < d; ++j) w(k, j) = eig.vectors(j, k);

    auto model = ProjectionModel::from_matrix(ProjectionKind::Pca, w, mean_bias(w, info));
    model.explained_variance.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(r));
    const double top = std::max(eig.values.front(), 0.0);
    if (eig.values[r - 1] <= 1e-12 * top) {
        model.warnings.push_back(fmt::format(
            "rank-deficient covariance: eigenvalue {} of component {} is numerically zero; trailing components "
            "follow the deterministic tie-break",
            eig.values[r - 1], r));
    }
    return model;
}

ProjectionModel fit_pca(const Mat& x_centered, const CenteringInfo& info, std::size_t r) {
    const std::size_t limit = std::min(x_centered.rows(), x_centered.cols());
    if (r == 0 || r > x_centered.cols())
        throw ParameterError(fmt::format("fit_pca: r = {} outside [1, D = {}]", r, x_centered.cols()));
    auto model = fit_pca(sym_eig(covariance(x_centered)), info, r);
    if (r > limit)
        model.warnings.push_back(fmt::format("r = {} exceeds min(N, D) = {}", r, limit));
    return model;
}

namespace {

// Sparse-aware S v: S is symmetric, so column j equals row j.
Vec sym_matvec(const Mat& s, const Vec& v) {
    Vec out(s.rows(), 0.0);
    for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[j] == 0.0) continue;
        axpy(v[j], s.row(j), out);
    }
    return out;
}

bool normalize(Vec& v) {
    const double n = norm2(v);
    if (n == 0.0 || !std::isfinite(n)) return false;
    for (double& x : v) x /= n;
    return true;
}

struct Sparsifier {
    const std::vector<bool>& candidate;
    std::size_t k;                      // density mode: nonzeros per row
    std::optional<double> l1_budget;    // alternative mode

    Vec operator()(Vec w) const {
        for (std::size_t j = 0; j < w.size(); ++j)
            if (!candidate[j]) w[j] = 0.0;
        if (l1_budget) return by_l1_budget(std::move(w));
        return by_count(std::move(w));
    }

    Vec by_count(Vec w) const {
        std::vector<double> mags;
        mags.reserve(w.size());
        for (std::size_t j = 0; j < w.size(); ++j)
            if (candidate[j]) mags.push_back(std::abs(w[j]));
        if (k >= mags.size()) return w;
        // λ is the (k+1)-th largest magnitude, leaving exactly k survivors
        // unless there are ties at the threshold.
        std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end(),
                         std::greater<>());
        const double lambda = mags[k];
        Vec out = soft_threshold(w, lambda);
        if (norm2(out) == 0.0) {
            // Every candidate ties at λ; keep the first k of them.
            std::size_t kept = 0;
            for (std::size_t j = 0; j < w.size() && kept < k; ++j)
                if (candidate[j] && std::abs(w[j]) == lambda && lambda > 0.0) {
                    out[j] = w[j];
                    ++kept;
                }
        }
        return out;
    }

    static double l1_over_l2(const Vec& v) {
        const double n2 = norm2(v);
        return n2 == 0.0 ? 0.0 : norm1(v) / n2;
    }

    Vec by_l1_budget(Vec w) const {
        const double c = *l1_budget;
        if (l1_over_l2(w) <= c) return w;
        double lo = 0.0;
        double hi = norm_inf(w);
        for (int it = 0; it < 100 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            const Vec t = soft_threshold(w, mid);
            if (norm2(t) == 0.0 || l1_over_l2(t) <= c)
                hi = mid;
            else
                lo = mid;
        }
        Vec out = soft_threshold(w, hi);
        if (norm2(out) == 0.0) out = soft_threshold(w, lo);
        return out;
    }
};

struct ComponentFit {
    Vec v;
    double variance = -1.0;
    bool converged = false;
};

std::vector<std::size_t> support_of(const Vec& v) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < v.size(); ++j)
        if (v[j] != 0.0) idx.push_back(j);
    return idx;
}

// Exact top eigenvector of S restricted to `support`.
ComponentFit polish(const Mat& s, const std::vector<std::size_t>& support, std::size_t dim) {
    ComponentFit out;
    out.v.assign(dim, 0.0);
    if (support.empty()) return out;
    Mat sub(support.size(), support.size());
    for (std::size_t a = 0; a < support.size(); ++a)
        for (std::size_t c = 0; c < support.size(); ++c) sub(a, c) = s(support[a], support[c]);
    const SymEig eig = sym_eig(sub);
    for (std::size_t a = 0; a < support.size(); ++a) out.v[support[a]] = eig.vectors(a, 0);
    out.variance = eig.values[0];
    return out;
}

double quad_form(const Mat& s, const Vec& v) { return dot(v, sym_matvec(s, v)); }

ComponentFit thresholded_power(const Mat& s, Vec v, const Sparsifier& sparsify, const SpcaOptions& options) {
    ComponentFit fit;
    if (!normalize(v)) return fit;
    for (int it = 0; it < options.max_iters; ++it) {
        Vec next = sparsify(sym_matvec(s, v));
        if (!normalize(next)) return fit;
        double change = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) change += (next[j] - v[j]) * (next[j] - v[j]);
        v = std::move(next);
        if (std::sqrt(change) < options.tol) {
            fit.converged = true;
            break;
        }
    }

    if (sparsify.l1_budget) {
        fit.variance = quad_form(s, v);
        fit.v = std::move(v);
        return fit;
    }

    // Replace the shrunken loadings by the exact restricted eigenvector, then
    // re-select the support until it stops moving. A support that maps to
    // itself counts as converged even if the shrunken iteration cycled.
    ComponentFit best = polish(s, support_of(v), v.size());
    best.converged = fit.converged;
    for (int round = 0; round < 20; ++round) {
        Vec w = sparsify(sym_matvec(s, best.v));
        const auto support = support_of(w);
        if (support == support_of(best.v)) {
            best.converged = true;
            break;
        }
        ComponentFit candidate = polish(s, support, v.size());
        if (candidate.variance <= best.variance) break;
        candidate.converged = best.converged;
        best = std::move(candidate);
    }
    return best;
}

void deflate(Mat& s, const Vec& v) {
    // S ← (I - vvᵀ) S (I - vvᵀ)
    const Vec sv = sym_matvec(s, v);
    const double c = dot(v, sv);
    const std::size_t d = s.rows();
    for (std::size_t i = 0; i < d; ++i) {
        auto row = s.row(i);
        const double vi = v[i];
        const double si = sv[i];
        for (std::size_t j = 0; j < d; ++j) row[j] += -vi * sv[j] - si * v[j] + c * vi * v[j];
    }
}

// First-improvement search over single in/out exchanges of the support,
// each scored by the exact restricted eigenvalue. Skipped when one pass
// would cost more than `budget` eigenproblems.
ComponentFit swap_refine(const Mat& s, ComponentFit best, const std::vector<bool>& candidate, std::size_t budget) {
    auto support = support_of(best.v);
    std::vector<std::size_t> outside;
    for (std::size_t j = 0; j < candidate.size(); ++j)
        if (candidate[j] && best.v[j] == 0.0) outside.push_back(j);
    if (support.empty() || outside.empty() || support.size() * outside.size() > budget) return best;
    for (bool improved = true; improved;) {
        improved = false;
        for (std::size_t a = 0; a < support.size() && !improved; ++a)
            for (std::size_t b = 0; b < outside.size() && !improved; ++b) {
                auto trial = support;
                trial[a] = outside[b];
                std::sort(trial.begin(), trial.end());
                ComponentFit fit = polish(s, trial, best.v.size());
                if (fit.variance > best.variance * (1.0 + 1e-12)) {
                    fit.converged = best.converged;
                    std::swap(support[a], outside[b]);
                    best = std::move(fit);
                    improved = true;
                }
            }
    }
    return best;
}

}  // namespace

ProjectionModel fit_spca_from_covariance(const Mat& s_in, const CenteringInfo& info, std::size_t r,
                                         const SpcaOptions& options) {
    const std::size_t d = s_in.rows();
    if (s_in.cols() != d) throw DimensionError("fit_spca: covariance must be square");
    if (r == 0 || r > d) throw ParameterError(fmt::format("fit_spca: r = {} outside [1, {}]", r, d));
    if (!options.row_l1_budget && !(options.target_density > 0.0 && options.target_density <= 1.0))
        throw ParameterError(fmt::format("fit_spca: target density {} outside (0, 1]", options.target_density));
    if (options.row_l1_budget && *options.row_l1_budget < 1.0)
        throw ParameterError(fmt::format("fit_spca: row l1 budget {} below 1 admits no unit vector",
                                         *options.row_l1_budget));

    double max_diag = 0.0;
    for (std::size_t j = 0; j < d; ++j) max_diag = std::max(max_diag, s_in(j, j));
    std::vector<bool> candidate(d);
    std::size_t num_candidates = 0;
    for (std::size_t j = 0; j < d; ++j) {
        candidate[j] = s_in(j, j) > 1e-12 * max_diag && s_in(j, j) > 0.0;
        num_candidates += candidate[j] ? 1 : 0;
    }
    if (num_candidates == 0) throw DensityFloorError("fit_spca: every input coordinate has zero variance");

    const auto k_target = static_cast<std::size_t>(std::llround(options.target_density * static_cast<double>(d)));
    if (!options.row_l1_budget && k_target < 1)
        throw DensityFloorError(fmt::format("fit_spca: density {} keeps no loading out of {} coordinates",
                                            options.target_density, d));
    const Sparsifier sparsify{candidate, std::min(k_target, num_candidates), options.row_l1_budget};

    Mat s = s_in;
    Mat w(r, d);
    Vec variances(r);
    std::vector<bool> converged(r);
    for (std::size_t comp = 0; comp < r; ++comp) {
        std::vector<Vec> starts;

        // Dense start: a few plain power iterations on the deflated covariance.
        Vec dense(d, 0.0);
        for (std::size_t j = 0; j < d; ++j) dense[j] = candidate[j] ? 1.0 + static_cast<double>(j % 5) / 10.0 : 0.0;
        for (int it = 0; it < 30; ++it) {
            Vec next = sym_matvec(s, dense);
            if (!normalize(next)) break;
            dense = std::move(next);
        }
        starts.push_back(std::move(dense));

        std::vector<std::size_t> order;
        for (std::size_t j = 0; j < d; ++j)
            if (candidate[j]) order.push_back(j);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s(a, a) > s(b, b); });
        for (std::size_t t = 0; t < std::min(options.max_starts, order.size()); ++t) {
            Vec e(d, 0.0);
            e[order[t]] = 1.0;
            starts.push_back(std::move(e));
        }

        ComponentFit best;
        for (auto& start : starts) {
            ComponentFit fit = thresholded_power(s, std::move(start), sparsify, options);
            if (fit.variance > best.variance * (1.0 + 1e-13) + 1e-300 || best.variance < 0.0) best = std::move(fit);
        }
        if (!options.row_l1_budget && best.variance >= 0.0)
            best = swap_refine(s, std::move(best), candidate, options.max_swap_evals);
        if (best.variance < 0.0 || norm2(best.v) == 0.0)
            throw DensityFloorError(fmt::format("fit_spca: component {} came out all-zero", comp));

        // Sign convention shared with sym_eig: dominant loading is positive.
        std::size_t lead = 0;
        for (std::size_t j = 1; j < d; ++j)
            if (std::abs(best.v[j]) > std::abs(best.v[lead])) lead = j;
        if (best.v[lead] < 0.0)
            for (double& x : best.v) x = -x;

        std::copy(best.v.begin(), best.v.end(), w.row(comp).begin());
        variances[comp] = best.variance;
        converged[comp] = best.converged;
        deflate(s, best.v);
    }

    auto model = ProjectionModel::from_matrix(ProjectionKind::Spca, w, mean_bias(w, info));
    model.explained_variance = std::move(variances);
    model.converged = std::move(converged);
    for (std::size_t comp = 0; comp < r; ++comp)
        if (!model.converged[comp])
            model.warnings.push_back(
                fmt::format("component {} did not converge within {} iterations", comp, options.max_iters));
    return model;
}

ProjectionModel fit_spca(const Mat& x_centered, const CenteringInfo& info, std::size_t r, const SpcaOptions& options) {
    if (r > x_centered.cols())
        throw ParameterError(fmt::format("fit_spca: r = {} exceeds D = {}", r, x_centered.cols()));
    return fit_spca_from_covariance(covariance(x_centered), info, r, options);
}

ProjectionModel leading_components(const ProjectionModel& model, std::size_t r) {
    if (r == 0 || r > model.components())
        throw ParameterError(fmt::format("leading_components: r = {} outside [1, {}]", r, model.components()));
    Mat w(r, model.input_dim());
    for (std::size_t i = 0; i < r; ++i) std::copy(model.w.row(i).begin(), model.w.row(i).end(), w.row(i).begin());
    auto out = ProjectionModel::from_matrix(model.kind, std::move(w), Vec(model.b.begin(), model.b.begin() + static_cast<std::ptrdiff_t>(r)));
    if (model.explained_variance.size() >= r)
        out.explained_variance.assign(model.explained_variance.begin(), model.explained_variance.begin() + static_cast<std::ptrdiff_t>(r));
    if (model.converged.size() >= r)
        out.converged.assign(model.converged.begin(), model.converged.begin() + static_cast<std::ptrdiff_t>(r));
    return out;
}

Mat project(const ProjectionModel& model, const Mat& x) {
    if (x.cols() != model.input_dim())
        throw DimensionError(fmt::format("project: data has {} columns, model expects {}", x.cols(), model.input_dim()));
    Mat z = matmul_nt(x, model.w);
    for (std::size_t i = 0; i < z.rows(); ++i) axpy(1.0, model.b, z.row(i));
    return z;
}

SparsityReport sparsity_report(const ProjectionModel& model) {
    SparsityReport rep;
    const Mat& w = model.w;
    rep.row_nonzeros.assign(w.rows(), 0);
    rep.col_norms.assign(w.cols(), 0.0);
    std::size_t nnz = 0;
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const auto row = w.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (std::abs(row[j]) >= kZeroThreshold) {
                ++rep.row_nonzeros[i];
                ++nnz;
            }
            rep.col_norms[j] += row[j] * row[j];
            rep.l1_mass += std::abs(row[j]);
        }
    }
    for (double& c : rep.col_norms) {
        c = std::sqrt(c);
        rep.col_norm_sum += c;
        rep.col_norm_max = std::max(rep.col_norm_max, c);
    }
    rep.density = w.empty() ? 0.0 : static_cast<double>(nnz) / static_cast<double>(w.size());
    rep.spectral_norm = w.empty() ? 0.0 : spectral_norm(w);
    return rep;
}

}  // namespace spcarob
