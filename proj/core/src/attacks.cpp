#include "spcarob/attacks.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "spcarob/error.hpp"
#include "spcarob/rng.hpp"

namespace spcarob {

int ScoreOracle::predict(std::span<const double> x) const { return argmax(logits(x)); }

ProjectedClassifier::ProjectedClassifier(const ProjectionModel& projection, const Head& head)
    : projection_(projection), head_(head) {
    if (head_input_dim(head) != projection.components())
        throw DimensionError(fmt::format("head takes {} features, projection emits {}", head_input_dim(head),
                                         projection.components()));
    if (const auto* lin = std::get_if<LinearHead>(&head)) {
        fused_ = matmul_tn(lin->u, projection.w);
        fused_bias_ = matvec_t(lin->u, projection.b);
        for (std::size_t k = 0; k < fused_bias_.size(); ++k) fused_bias_[k] += lin->biases[k];
    }
}

Vec ProjectedClassifier::logits(std::span<const double> x) const {
    if (x.size() != projection_.input_dim())
        throw DimensionError(fmt::format("input has dimension {}, model expects {}", x.size(), projection_.input_dim()));
    if (fused_) {
        Vec out = matvec(*fused_, x);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += fused_bias_[k];
        return out;
    }
    return forward(head_, projection_.apply(x));
}

double ProjectedClassifier::loss_and_gradient(std::span<const double> x, int label, Vec& grad) const {
    if (fused_) {
        const Vec z = logits(x);
        const double loss = cross_entropy(z, label);
        const double top = *std::max_element(z.begin(), z.end());
        Vec p(z.size());
        double sum = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) sum += (p[k] = std::exp(z[k] - top));
        for (double& v : p) v /= sum;
        p[static_cast<std::size_t>(label)] -= 1.0;
        grad = matvec_t(*fused_, p);
        return loss;
    }
    double loss = 0.0;
    grad = input_gradient(head_, projection_, x, label, &loss);
    return loss;
}

std::string_view to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::Fgsm: return "fgsm";
        case AttackKind::Pgd: return "pgd";
        case AttackKind::Mim: return "mim";
        case AttackKind::Square: return "square";
    }
    return "?";
}

AttackKind parse_attack_kind(std::string_view text) {
    if (text == "fgsm") return AttackKind::Fgsm;
    if (text == "pgd") return AttackKind::Pgd;
    if (text == "mim") return AttackKind::Mim;
    if (text == "square") return AttackKind::Square;
    throw ParameterError(fmt::format("unknown attack '{}'", text));
}

AttackConfig AttackConfig::defaults(AttackKind kind, ThreatModel threat) {
    AttackConfig c;
    c.kind = kind;
    c.threat = threat;
    switch (kind) {
        case AttackKind::Fgsm: break;
        case AttackKind::Pgd:
            c.steps = 40;
            c.step_divisor = 4.0;
            break;
        case AttackKind::Mim:
            c.steps = 20;
            c.step_divisor = 5.0;
            c.momentum = 1.0;
            break;
        case AttackKind::Square:
            c.query_budget = 5000;
            c.square_p_init = 0.3;
            break;
    }
    return c;
}

void AttackConfig::validate() const {
    threat.validate();
    if ((kind == AttackKind::Pgd || kind == AttackKind::Mim) && steps < 1)
        throw ParameterError(fmt::format("{} needs at least one step, got {}", to_string(kind), steps));
    if (kind == AttackKind::Square && query_budget < 1)
        throw ParameterError(fmt::format("square attack budget must be >= 1, got {}", query_budget));
    if (kind == AttackKind::Square && threat.p != Norm::Linf)
        throw ParameterError("square attack is implemented for the ℓ∞ threat model only");
    if (!(step_divisor > 0.0)) throw ParameterError("step divisor must be positive");
    if (kind == AttackKind::Square && !(square_p_init > 0.0 && square_p_init <= 1.0))
        throw ParameterError("square p_init must lie in (0, 1]");
}

double threat_norm(std::span<const double> delta, Norm p) {
    return p == Norm::Linf ? norm_inf(delta) : norm2(delta);
}

double margin_loss(std::span<const double> logits, int label) {
    const auto y = static_cast<std::size_t>(label);
    double other = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < logits.size(); ++k)
        if (k != y) other = std::max(other, logits[k]);
    return logits[y] - other;
}

namespace {

void check_input(const ScoreOracle& model, std::span<const double> x, int label) {
    if (x.size() != model.input_dim())
        throw DimensionError(fmt::format("input has dimension {}, model expects {}", x.size(), model.input_dim()));
    if (label < 0 || static_cast<std::size_t>(label) >= model.num_classes())
        throw ParameterError(fmt::format("label {} outside [0, {})", label, model.num_classes()));
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Projects x_adv onto the ε-ball around x, then (optionally) onto [0, 1]^D.
void project_to_threat(std::span<double> x_adv, std::span<const double> x, const AttackConfig& c) {
    const double eps = c.threat.epsilon;
    if (c.threat.p == Norm::Linf) {
        for (std::size_t j = 0; j < x.size(); ++j) x_adv[j] = std::clamp(x_adv[j], x[j] - eps, x[j] + eps);
    } else {
        double n = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) n += (x_adv[j] - x[j]) * (x_adv[j] - x[j]);
        n = std::sqrt(n);
        if (n > eps) {
            const double scale = eps / n;
            for (std::size_t j = 0; j < x.size(); ++j) x_adv[j] = x[j] + (x_adv[j] - x[j]) * scale;
        }
    }
    if (c.clip_to_unit_box)
        for (double& v : x_adv) v = std::clamp(v, 0.0, 1.0);
}

// x_adv += α · direction(g): sign for ℓ∞, unit ℓ2 direction otherwise.
void ascend(std::span<double> x_adv, const Vec& g, double alpha, Norm p) {
    if (p == Norm::Linf) {
        for (std::size_t j = 0; j < g.size(); ++j) x_adv[j] += alpha * sign(g[j]);
    } else {
        const double n = norm2(g);
        if (n == 0.0) return;
        for (std::size_t j = 0; j < g.size(); ++j) x_adv[j] += alpha * g[j] / n;
    }
}

AttackResult finish(const DifferentiableClassifier& model, std::span<const double> x, int label, Vec x_adv,
                    const AttackConfig& c, int queries, double loss) {
    AttackResult r;
    r.predicted = model.predict(x_adv);
    r.success = r.predicted != label;
    Vec delta(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) delta[j] = x_adv[j] - x[j];
    r.perturbation_norm = threat_norm(delta, c.threat.p);
    r.x_adv = std::move(x_adv);
    r.queries = queries + 1;
    r.loss = loss;
    return r;
}

bool all_zero(const Vec& v) {
    return std::all_of(v.begin(), v.end(), [](double g) { return g == 0.0; });
}

}  // namespace

AttackResult fgsm(const DifferentiableClassifier& model, std::span<const double> x, int label,
                  const AttackConfig& config) {
    config.validate();
    check_input(model, x, label);
    Vec g;
    const double clean_loss = model.loss_and_gradient(x, label, g);
    Vec x_adv(x.begin(), x.end());
    if (all_zero(g)) {
        auto r = finish(model, x, label, std::move(x_adv), config, 1, clean_loss);
        r.zero_gradient = true;
        return r;
    }
    ascend(x_adv, g, config.threat.epsilon, config.threat.p);
    project_to_threat(x_adv, x, config);
    Vec unused;
    const double loss = model.loss_and_gradient(x_adv, label, unused);
    return finish(model, x, label, std::move(x_adv), config, 2, loss);
}

AttackResult pgd(const DifferentiableClassifier& model, std::span<const double> x, int label,
                 const AttackConfig& config, std::vector<Vec>* iterates) {
    config.validate();
    check_input(model, x, label);
    const std::size_t d = x.size();
    const double eps = config.threat.epsilon;
    const double alpha = config.step_size();
    SeededRng rng(config.seed);

    Vec cur(x.begin(), x.end());
    if (eps > 0.0) {
        if (config.threat.p == Norm::Linf) {
            for (std::size_t j = 0; j < d; ++j) cur[j] += rng.uniform(-eps, eps);
        } else {
            // Uniform in the ℓ2 ball: Gaussian direction, radius ε·U^(1/D).
            Vec dir = rng_normal(rng, 0.0, 1.0, d);
            const double n = norm2(dir);
            const double radius = eps * std::pow(rng.uniform01(), 1.0 / static_cast<double>(d));
            for (std::size_t j = 0; j < d; ++j) cur[j] += radius * dir[j] / n;
        }
        project_to_threat(cur, x, config);
    }
    if (iterates) iterates->push_back(cur);

    Vec best = cur;
    double best_loss = -std::numeric_limits<double>::infinity();
    int queries = 0;
    Vec g;
    for (int t = 0; t < config.steps; ++t) {
        const double loss = model.loss_and_gradient(cur, label, g);
        ++queries;
        if (loss > best_loss) {
            best_loss = loss;
            best = cur;
        }
        if (eps == 0.0) break;
        if (all_zero(g)) g = rng_normal(rng, 0.0, 1.0, d);
        ascend(cur, g, alpha, config.threat.p);
        project_to_threat(cur, x, config);
        if (iterates) iterates->push_back(cur);
    }
    if (eps > 0.0) {
        const double loss = model.loss_and_gradient(cur, label, g);
        ++queries;
        if (loss > best_loss) {
            best_loss = loss;
            best = cur;
        }
    }
    return finish(model, x, label, std::move(best), config, queries, best_loss);
}

AttackResult mim(const DifferentiableClassifier& model, std::span<const double> x, int label,
                 const AttackConfig& config, MimTrace* trace) {
    config.validate();
    check_input(model, x, label);
    const std::size_t d = x.size();
    const double alpha = config.step_size();

    Vec cur(x.begin(), x.end());
    Vec velocity(d, 0.0);
    Vec g;
    int queries = 0;
    double loss = 0.0;
    for (int t = 0; t < config.steps; ++t) {
        loss = model.loss_and_gradient(cur, label, g);
        ++queries;
        const double n1 = norm1(g);
        if (t == 0 && n1 == 0.0) {
            auto r = finish(model, x, label, std::move(cur), config, queries, loss);
            r.zero_gradient = true;
            return r;
        }
        for (std::size_t j = 0; j < d; ++j) velocity[j] = config.momentum * velocity[j] + (n1 > 0.0 ? g[j] / n1 : 0.0);
        ascend(cur, velocity, alpha, config.threat.p);
        project_to_threat(cur, x, config);
        if (trace) {
            trace->velocity.push_back(velocity);
            trace->iterates.push_back(cur);
        }
    }
    loss = model.loss_and_gradient(cur, label, g);
    return finish(model, x, label, std::move(cur), config, queries, loss);
}

namespace {

// Window-area schedule of the reference Square attack, defined on a
// 10,000-query run and rescaled to the configured budget.
double square_p_selection(double p_init, int it, int budget) {
    const int i = static_cast<int>(static_cast<double>(it) / static_cast<double>(budget) * 10000.0);
    if (i <= 10) return p_init;
    if (i <= 50) return p_init / 2;
    if (i <= 200) return p_init / 4;
    if (i <= 500) return p_init / 8;
    if (i <= 1000) return p_init / 16;
    if (i <= 2000) return p_init / 32;
    if (i <= 4000) return p_init / 64;
    if (i <= 6000) return p_init / 128;
    if (i <= 8000) return p_init / 256;
    return p_init / 512;
}

}  // namespace

AttackResult square_attack(const ScoreOracle& model, std::span<const double> x, int label,
                           const AttackConfig& config, SquareTrace* trace) {
    if (config.query_budget < 1)
        throw ParameterError(fmt::format("square attack budget must be >= 1, got {}", config.query_budget));
    config.validate();
    check_input(model, x, label);
    const std::size_t d = x.size();
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
    if (side * side != d)
        throw ParameterError(fmt::format("square attack needs a square image, got D = {}", d));
    const double eps = config.threat.epsilon;
    const bool clip = config.clip_to_unit_box;
    auto clamp01 = [clip](double v) { return clip ? std::clamp(v, 0.0, 1.0) : v; };

    AttackResult r;
    SeededRng rng(config.seed);

    // Vertical stripes: one random ±ε per image column.
    Vec best(x.begin(), x.end());
    if (eps > 0.0) {
        for (std::size_t c = 0; c < side; ++c) {
            const double s = rng.below(2) == 0 ? -eps : eps;
            for (std::size_t row = 0; row < side; ++row) best[row * side + c] = clamp01(x[row * side + c] + s);
        }
    }
    Vec logits = model.logits(best);
    int queries = 1;
    double best_margin = margin_loss(logits, label);
    if (trace) trace->accepted_margins.push_back(best_margin);
    bool fooled = argmax(logits) != label;

    const std::size_t max_window = side > 1 ? side - 1 : 1;
    Vec proposal;
    while (!fooled && queries < config.query_budget && eps > 0.0) {
        const double p = square_p_selection(config.square_p_init, queries, config.query_budget);
        const auto s = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(std::sqrt(p * static_cast<double>(d)))), 1, max_window);

        // Resample until the window actually changes the current iterate.
        bool changed = false;
        for (int attempt = 0; attempt < 100 && !changed; ++attempt) {
            const std::size_t top = side > s ? rng.below(side - s) : 0;
            const std::size_t left = side > s ? rng.below(side - s) : 0;
            const double v = rng.below(2) == 0 ? -eps : eps;
            proposal = best;
            for (std::size_t row = top; row < top + s; ++row)
                for (std::size_t col = left; col < left + s; ++col) {
                    const std::size_t j = row * side + col;
                    proposal[j] = clamp01(x[j] + v);
                    if (std::abs(proposal[j] - best[j]) >= 1e-7) changed = true;
                }
        }
        if (!changed) break;

        logits = model.logits(proposal);
        ++queries;
        const double m = margin_loss(logits, label);
        if (m < best_margin) {
            best_margin = m;
            best.swap(proposal);
            fooled = argmax(logits) != label;
            if (trace) trace->accepted_margins.push_back(best_margin);
        }
    }

    r.predicted = model.predict(best);
    r.success = r.predicted != label;
    Vec delta(d);
    for (std::size_t j = 0; j < d; ++j) delta[j] = best[j] - x[j];
    r.perturbation_norm = norm_inf(delta);
    r.x_adv = std::move(best);
    r.queries = queries;
    r.loss = best_margin;
    return r;
}

AttackResult run_attack(const DifferentiableClassifier& model, std::span<const double> x, int label,
                        const AttackConfig& config) {
    switch (config.kind) {
        case AttackKind::Fgsm: return fgsm(model, x, label, config);
        case AttackKind::Pgd: return pgd(model, x, label, config);
        case AttackKind::Mim: return mim(model, x, label, config);
        case AttackKind::Square: return square_attack(model, x, label, config);
    }
    throw ParameterError("unknown attack kind");
}

std::uint64_t example_seed(const AttackConfig& config, std::size_t index) {
    return derive_seed(config.seed, static_cast<std::uint64_t>(index));
}

RobustEvaluation robust_accuracy(const DifferentiableClassifier& model, const LabeledDataset& data,
                                 const AttackConfig& config, std::size_t limit) {
    config.validate();
    RobustEvaluation ev;
    ev.n = std::min(limit, data.size());
    if (ev.n == 0) return ev;
    std::size_t robust = 0;
    std::size_t clean = 0;
    AttackConfig per_example = config;
    for (std::size_t i = 0; i < ev.n; ++i) {
        const auto x = data.x.row(i);
        const int label = data.y[i];
        const bool clean_ok = model.predict(x) == label;
        per_example.seed = example_seed(config, i);
        const AttackResult res = run_attack(model, x, label, per_example);
        clean += clean_ok ? 1 : 0;
        robust += (clean_ok && !res.success) ? 1 : 0;
        ev.attack_successes += res.success ? 1 : 0;
    }
    ev.accuracy = static_cast<double>(robust) / static_cast<double>(ev.n);
    ev.clean_accuracy = static_cast<double>(clean) / static_cast<double>(ev.n);
    return ev;
}

RobustEvaluation robust_accuracy(const ProjectionModel& projection, const Head& head, const LabeledDataset& data,
                                 const AttackConfig& config, std::size_t limit) {
    const ProjectedClassifier model(projection, head);
    return robust_accuracy(model, data, config, limit);
}

}  // namespace spcarob
