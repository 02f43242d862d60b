#include "spcarob/certificates.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "spcarob/error.hpp"

namespace spcarob {

std::string_view to_string(Norm p) { return p == Norm::Linf ? "inf" : "2"; }

Norm parse_norm(std::string_view text) {
    if (text == "inf" || text == "linf" || text == "Linf") return Norm::Linf;
    if (text == "2" || text == "l2" || text == "L2") return Norm::L2;
    throw ParameterError(fmt::format("unknown norm '{}' (expected inf or 2)", text));
}

void ThreatModel::validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw ParameterError(fmt::format("threat radius must be finite and non-negative, got {}", epsilon));
}

DualNorms dual_norms(const Mat& w, std::span<const double> v) {
    if (v.size() != w.rows())
        throw DimensionError(fmt::format("dual_norms: vector length {} but W has {} rows", v.size(), w.rows()));
    const Vec wt_v = matvec_t(w, v);
    return {norm1(wt_v), norm2(wt_v)};
}

double binary_margin(const ProjectionModel& projection, const BinaryLinear& head, std::span<const double> x, int y) {
    if (y != 1 && y != -1) throw ParameterError(fmt::format("binary label must be -1 or +1, got {}", y));
    if (head.u.size() != projection.components())
        throw DimensionError(fmt::format("binary head has {} weights, projection has {} components", head.u.size(),
                                         projection.components()));
    const Vec z = projection.apply(x);
    return static_cast<double>(y) * (dot(head.u, z) + head.bias);
}

namespace {

double radius_from(double margin, double dual) {
    if (margin <= 0.0) return 0.0;
    if (dual == 0.0) return kInfiniteRadius;
    return margin / dual;
}

}  // namespace

double certified_radius_binary(const ProjectionModel& projection, const BinaryLinear& head,
                               std::span<const double> x, int y, Norm p) {
    const double m = binary_margin(projection, head, x, y);
    return radius_from(m, dual_norms(projection.w, head.u).for_threat(p));
}

LinearCertifier::LinearCertifier(const ProjectionModel& projection, const LinearHead& head)
    : projection_(projection), head_(head), k_(head.num_classes()), pairs_(k_ * k_) {
    head.validate();
    if (head.input_dim() != projection.components())
        throw DimensionError(fmt::format("linear head takes {} features, projection emits {}", head.input_dim(),
                                         projection.components()));
    // Columns of WᵀU; pair differences are then O(D) each.
    const Mat wtu = matmul_tn(projection.w, head.u);  // D x K
    const std::size_t d = wtu.rows();
    Vec diff(d);
    for (std::size_t a = 0; a < k_; ++a)
        for (std::size_t b = a + 1; b < k_; ++b) {
            for (std::size_t j = 0; j < d; ++j) diff[j] = wtu(j, a) - wtu(j, b);
            const DualNorms dn{norm1(diff), norm2(diff)};
            pairs_[a * k_ + b] = dn;
            pairs_[b * k_ + a] = dn;
        }
}

double LinearCertifier::pair_dual_norm(std::size_t a, std::size_t b, Norm p) const {
    return pairs_.at(a * k_ + b).for_threat(p);
}

MulticlassCertificate LinearCertifier::certify(std::span<const double> x, Norm p) const {
    const Vec z = projection_.apply(x);
    Vec logits = matvec_t(head_.u, z);
    for (std::size_t k = 0; k < k_; ++k) logits[k] += head_.biases[k];

    MulticlassCertificate out;
    out.predicted = argmax(logits);
    const auto top = static_cast<std::size_t>(out.predicted);
    out.radius = kInfiniteRadius;
    out.margin = kInfiniteRadius;
    for (std::size_t k = 0; k < k_; ++k) {
        if (k == top) continue;
        const double gamma = logits[top] - logits[k];
        const double dual = pair_dual_norm(top, k, p);
        out.margin = std::min(out.margin, gamma);
        const double r = radius_from(gamma, dual);
        if (r < out.radius || (r == out.radius && out.dual_norm == 0.0)) {
            out.radius = r;
            out.dual_norm = dual;
        }
    }
    if (out.margin <= 0.0) out.radius = 0.0;
    return out;
}

MulticlassCertificate certified_radius_multiclass(const ProjectionModel& projection, const LinearHead& head,
                                                  std::span<const double> x, Norm p) {
    return LinearCertifier(projection, head).certify(x, p);
}

std::vector<CertificateRecord> certify_dataset(const ProjectionModel& projection, const Head& head,
                                               const LabeledDataset& data, Norm p, std::size_t limit) {
    const auto* linear = std::get_if<LinearHead>(&head);
    if (!linear)
        throw UnsupportedHeadError(
            "exact certificates need a linear head; use sensitivity_bound for the MLP head");
    const LinearCertifier certifier(projection, *linear);
    const std::size_t n = std::min(limit, data.size());
    std::vector<CertificateRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto cert = certifier.certify(data.x.row(i), p);
        CertificateRecord rec;
        rec.index = i;
        rec.clean_pred = cert.predicted;
        rec.label = data.y[i];
        rec.margin = cert.margin;
        rec.dual_norm = cert.dual_norm;
        rec.correct = cert.predicted == data.y[i];
        rec.radius = rec.correct ? cert.radius : 0.0;
        rec.p = p;
        out.push_back(rec);
    }
    return out;
}

std::vector<CurvePoint> certified_accuracy_curve(const std::vector<CertificateRecord>& records,
                                                 std::span<const double> epsilons) {
    if (!std::is_sorted(epsilons.begin(), epsilons.end()))
        throw ParameterError("certified_accuracy_curve: epsilons must be sorted ascending");
    std::vector<CurvePoint> curve;
    curve.reserve(epsilons.size());
    for (double eps : epsilons) {
        std::size_t ok = 0;
        for (const auto& rec : records) ok += (rec.correct && rec.radius > eps) ? 1 : 0;
        curve.push_back({eps, records.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(records.size())});
    }
    return curve;
}

std::vector<CurvePoint> certified_accuracy_curve(const ProjectionModel& projection, const Head& head,
                                                 const LabeledDataset& data, Norm p,
                                                 std::span<const double> epsilons, std::size_t limit) {
    return certified_accuracy_curve(certify_dataset(projection, head, data, p, limit), epsilons);
}

double exact_inf_to_2_norm(const Mat& w) {
    const std::size_t d = w.cols();
    if (d > kMaxExactInfTo2Dim)
        throw SizeError(fmt::format("exact ∞→2 norm enumerates 2^D sign vectors; D = {} exceeds {}", d,
                                    kMaxExactInfTo2Dim));
    if (d == 0) return 0.0;
    const std::size_t r = w.rows();
    // δ and -δ give the same norm, so δ_0 = +1 is fixed; the remaining signs
    // are walked in Gray-code order with one column update per step.
    std::vector<int> sign(d, 1);
    Vec acc(r, 0.0);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t i = 0; i < r; ++i) acc[i] += w(i, j);
    double best = norm2(acc);
    const std::uint64_t steps = std::uint64_t{1} << (d - 1);
    for (std::uint64_t g = 1; g < steps; ++g) {
        const auto flip = static_cast<std::size_t>(__builtin_ctzll(g)) + 1;
        sign[flip] = -sign[flip];
        const double f = 2.0 * sign[flip];
        for (std::size_t i = 0; i < r; ++i) acc[i] += f * w(i, flip);
        best = std::max(best, norm2(acc));
    }
    return best;
}

OperatorNormDiagnostics operator_norm_diagnostics(const Mat& w, bool exact) {
    if (w.empty()) throw DimensionError("operator_norm_diagnostics: empty matrix");
    OperatorNormDiagnostics diag;
    for (std::size_t j = 0; j < w.cols(); ++j) {
        double c = 0.0;
        for (std::size_t i = 0; i < w.rows(); ++i) c += w(i, j) * w(i, j);
        c = std::sqrt(c);
        diag.col_norm_max = std::max(diag.col_norm_max, c);
        diag.col_norm_sum += c;
    }
    diag.spectral = spectral_norm(w);
    diag.sqrt_d_spectral = std::sqrt(static_cast<double>(w.cols())) * diag.spectral;
    if (exact) diag.exact_inf_to_2 = exact_inf_to_2_norm(w);
    return diag;
}

SensitivityBound sensitivity_bound(const ProjectionModel& projection, const Head& head) {
    if (head_input_dim(head) != projection.components())
        throw DimensionError(fmt::format("head takes {} features, projection emits {}", head_input_dim(head),
                                         projection.components()));
    SensitivityBound out;
    out.head_lipschitz = lipschitz_upper_bound(head);
    const auto diag = operator_norm_diagnostics(projection.w);
    out.l2 = out.head_lipschitz * diag.spectral;
    out.linf = out.head_lipschitz * diag.col_norm_sum;
    return out;
}

}  // namespace spcarob
