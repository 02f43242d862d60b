#include "spcarob/sweep.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include <fmt/format.h>

#include "spcarob/certificates.hpp"
#include "spcarob/error.hpp"
#include "spcarob/rng.hpp"

namespace spcarob {

ProjectionModel fit_projection(ProjectionKind kind, const LabeledDataset& train, std::size_t r, double density) {
    const Centered c = center(train.x);
    if (kind == ProjectionKind::Pca) return fit_pca(c.x, c.info, r);
    SpcaOptions opts;
    opts.target_density = density;
    return fit_spca(c.x, c.info, r, opts);
}

Head train_head(std::string_view head_kind, const ProjectionModel& projection, const LabeledDataset& train,
                const TrainConfig& config, std::vector<EpochLog>* log) {
    const Mat z = project(projection, train.x);
    if (head_kind == "linear") {
        auto t = fit_linear_head(z, train.y, train.num_classes, config);
        if (log) *log = std::move(t.log);
        return t.head;
    }
    if (head_kind == "mlp") {
        auto t = train_mlp(z, train.y, train.num_classes, config);
        if (log) *log = std::move(t.log);
        return t.head;
    }
    throw ParameterError(fmt::format("unknown head '{}'", head_kind));
}

AttackConfig cell_attack_config(const ExperimentConfig& config, AttackKind kind, Norm p, double epsilon,
                                std::uint64_t seed) {
    AttackConfig a = AttackConfig::defaults(kind, ThreatModel{p, epsilon});
    a.seed = derive_seed(seed, 2);
    a.clip_to_unit_box = config.clip;
    a.query_budget = config.square_budget;
    return a;
}

namespace {

struct CellPlan {
    ResultRow row;
    std::optional<AttackKind> attack;  // empty for clean and certified rows
    Norm p = Norm::Linf;
};

std::vector<CellPlan> plan_cells(const ExperimentConfig& config, const std::string& dataset, ProjectionKind kind,
                                 std::size_t r, std::uint64_t seed, std::size_t n) {
    ResultRow base;
    base.dataset = dataset;
    base.projection = std::string(to_string(kind));
    base.r = r;
    base.head = config.head;
    base.n = n;
    base.seed = seed;

    std::vector<CellPlan> plan;
    CellPlan clean{base, std::nullopt, Norm::Linf};
    clean.row.attack = "clean";
    clean.row.norm = "none";
    plan.push_back(clean);
    for (AttackKind a : config.attacks)
        for (Norm p : config.norms) {
            if (a == AttackKind::Square && p != Norm::Linf) continue;
            for (double eps : config.epsilons) {
                CellPlan cell{base, a, p};
                cell.row.attack = std::string(to_string(a));
                cell.row.norm = std::string(to_string(p));
                cell.row.epsilon = eps;
                plan.push_back(cell);
            }
        }
    if (config.head == "linear")
        for (Norm p : config.norms)
            for (double eps : config.epsilons) {
                CellPlan cell{base, std::nullopt, p};
                cell.row.attack = "certified";
                cell.row.norm = std::string(to_string(p));
                cell.row.epsilon = eps;
                plan.push_back(cell);
            }
    return plan;
}

void emit_failed(std::vector<CellPlan> plan, const std::string& message, ResultTable& out) {
    for (auto& cell : plan) {
        cell.row.error = message;
        out.push_back(std::move(cell.row));
    }
}

void say(const ProgressFn& progress, const std::string& text) {
    if (progress) progress(text);
}

}  // namespace

ResultTable evaluate_pipeline(const ExperimentConfig& config, const Pipeline& pipeline, const LabeledDataset& test,
                              std::uint64_t seed, const ProgressFn& progress) {
    const std::size_t n = std::min(config.limit, test.size());
    const LabeledDataset subset = test.head(n);
    auto plan = plan_cells(config, test.name, pipeline.projection.kind, pipeline.projection.components(), seed, n);

    std::map<Norm, std::vector<CertificateRecord>> certs;
    ResultTable out;
    for (auto& cell : plan) {
        ResultRow& row = cell.row;
        try {
            if (row.attack == "clean") {
                row.accuracy = accuracy(pipeline.head, project(pipeline.projection, subset.x), subset.y);
            } else if (row.attack == "certified") {
                auto it = certs.find(cell.p);
                if (it == certs.end())
                    it = certs.emplace(cell.p, certify_dataset(pipeline.projection, pipeline.head, subset, cell.p)).first;
                const double eps[] = {row.epsilon};
                row.accuracy = certified_accuracy_curve(it->second, eps).front().accuracy;
            } else {
                const AttackConfig ac = cell_attack_config(config, *cell.attack, cell.p, row.epsilon, seed);
                row.accuracy = robust_accuracy(pipeline.projection, pipeline.head, subset, ac).accuracy;
            }
        } catch (const Error& e) {
            row.error = e.what();
            say(progress, fmt::format("cell {} {} eps={} failed: {}", row.attack, row.norm, row.epsilon, e.what()));
        }
        if (row.ok() && row.attack != "clean")
            say(progress, fmt::format("{} r={} {} {} eps={} acc={:.4f}", row.projection, row.r, row.attack, row.norm,
                                      row.epsilon, row.accuracy));
        out.push_back(std::move(row));
    }
    return out;
}

ResultTable run_sweep(const ExperimentConfig& config, const ExperimentData& data, const ProgressFn& progress) {
    config.validate();
    data.train.validate();
    data.test.validate();
    const std::size_t d = data.train.dim();
    for (std::size_t r : config.components)
        if (r > d) throw ParameterError(fmt::format("r = {} exceeds input dimension {}", r, d));
    const std::size_t max_r = *std::max_element(config.components.begin(), config.components.end());
    const std::size_t n = std::min(config.limit, data.test.size());

    ResultTable table;
    for (std::uint64_t seed : config.seeds) {
        for (ProjectionKind kind : config.projections) {
            // Components come out greedily, so one fit at the largest r
            // serves every smaller r.
            std::optional<ProjectionModel> full;
            std::string fit_error;
            try {
                say(progress, fmt::format("fitting {} with {} components", to_string(kind), max_r));
                full = fit_projection(kind, data.train, max_r, config.density);
            } catch (const Error& e) {
                fit_error = e.what();
                say(progress, fmt::format("{} fit failed: {}", to_string(kind), e.what()));
            }
            for (std::size_t r : config.components) {
                if (!full) {
                    emit_failed(plan_cells(config, data.test.name, kind, r, seed, n), fit_error, table);
                    continue;
                }
                Pipeline pipeline;
                try {
                    pipeline.projection = leading_components(*full, r);
                    TrainConfig tc = config.train;
                    tc.seed = seed;
                    say(progress, fmt::format("training {} head on {} r={}", config.head, to_string(kind), r));
                    pipeline.head = train_head(config.head, pipeline.projection, data.train, tc, &pipeline.log);
                } catch (const Error& e) {
                    say(progress, fmt::format("{} r={} training failed: {}", to_string(kind), r, e.what()));
                    emit_failed(plan_cells(config, data.test.name, kind, r, seed, n), e.what(), table);
                    continue;
                }
                auto rows = evaluate_pipeline(config, pipeline, data.test, seed, progress);
                table.insert(table.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
            }
        }
    }
    return table;
}

ResultTable run_sweep(const ExperimentConfig& config, const ProgressFn& progress) {
    config.validate();
    return run_sweep(config, load_experiment_data(config), progress);
}

}  // namespace spcarob
