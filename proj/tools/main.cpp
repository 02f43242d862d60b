// spcarob: fit projections, train heads, attack, certify and sweep.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "spcarob/attacks.hpp"
#include "spcarob/certificates.hpp"
#include "spcarob/config.hpp"
#include "spcarob/error.hpp"
#include "spcarob/model_io.hpp"
#include "spcarob/report.hpp"
#include "spcarob/sweep.hpp"

namespace fs = std::filesystem;
using namespace spcarob;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string mnist_dir;
    std::string cifar_dir;
    std::optional<std::size_t> limit;
    bool quiet = false;
};

ExperimentConfig resolve(const Globals& g) {
    ExperimentConfig c;
    if (!g.config_path.empty()) c = load_config(g.config_path);
    if (g.seed) c.seeds = {*g.seed};
    if (!g.out_dir.empty()) c.out_dir = g.out_dir;
    if (!g.mnist_dir.empty()) c.mnist_dir = g.mnist_dir;
    if (!g.cifar_dir.empty()) c.cifar_dir = g.cifar_dir;
    if (g.limit) c.limit = *g.limit;
    c.validate();
    return c;
}

ProgressFn progress_for(const Globals& g) {
    if (g.quiet) return {};
    return [](std::string_view msg) { fmt::print(stderr, "{}\n", msg); };
}

fs::path ensure_out(const ExperimentConfig& c) {
    fs::create_directories(c.out_dir);
    return c.out_dir;
}

std::string model_name(ProjectionKind kind, std::size_t r, std::string_view head) {
    if (head.empty()) return fmt::format("projection_{}_r{}.spcr", to_string(kind), r);
    return fmt::format("model_{}_r{}_{}.spcr", to_string(kind), r, head);
}

struct ModelChoice {
    std::string kind = "spca";
    std::size_t r = 0;  // 0: first r in the config
};

void add_model_choice(CLI::App* cmd, ModelChoice& m) {
    cmd->add_option("--kind", m.kind, "Projection kind (pca or spca)")->check(CLI::IsMember({"pca", "spca"}));
    cmd->add_option("--r", m.r, "Number of components (default: first r in the config)");
}

std::size_t pick_r(const ModelChoice& m, const ExperimentConfig& c) { return m.r ? m.r : c.components.front(); }

int cmd_fit(const Globals& g, const ModelChoice& m) {
    const auto c = resolve(g);
    const auto data = load_experiment_data(c);
    const auto kind = parse_projection_kind(m.kind);
    const auto r = pick_r(m, c);
    const auto projection = fit_projection(kind, data.train, r, c.density);
    for (const auto& w : projection.warnings) fmt::print(stderr, "warning: {}\n", w);
    const auto path = ensure_out(c) / model_name(kind, r, "");
    save_model(path, projection);
    const auto rep = sparsity_report(projection);
    fmt::print("{} r={} density={:.4f} spectral={:.6g} col_norm_sum={:.6g} -> {}\n", m.kind, r, rep.density,
               rep.spectral_norm, rep.col_norm_sum, path.string());
    return 0;
}

int cmd_train(const Globals& g, const ModelChoice& m) {
    const auto c = resolve(g);
    const auto data = load_experiment_data(c);
    const auto kind = parse_projection_kind(m.kind);
    const auto r = pick_r(m, c);
    const auto projection = fit_projection(kind, data.train, r, c.density);
    TrainConfig tc = c.train;
    tc.seed = c.seeds.front();
    std::vector<EpochLog> log;
    const Head head = train_head(c.head, projection, data.train, tc, &log);
    if (!g.quiet)
        for (const auto& e : log) fmt::print(stderr, "epoch {:2d} loss {:.5f} acc {:.4f}\n", e.epoch, e.loss, e.accuracy);
    const auto path = ensure_out(c) / model_name(kind, r, c.head);
    save_model(path, projection, head);
    const auto n = std::min(c.limit, data.test.size());
    const auto test = data.test.head(n);
    fmt::print("clean test accuracy {:.6f} on {} points -> {}\n",
               accuracy(head, project(projection, test.x), test.y), n, path.string());
    return 0;
}

SavedModel load_full_model(const std::string& path) {
    auto saved = load_model(path);
    if (!saved.head) throw FormatError(fmt::format("{} holds a projection only; run train first", path));
    return saved;
}

int cmd_attack(const Globals& g, const std::string& model_path, const std::string& attack, const std::string& norm,
               std::vector<double> eps) {
    auto c = resolve(g);
    const auto data = load_experiment_data(c);
    const auto saved = load_full_model(model_path);
    if (!eps.empty()) c.epsilons = eps;
    const auto n = std::min(c.limit, data.test.size());
    const auto test = data.test.head(n);
    ResultTable table;
    for (double e : c.epsilons) {
        const auto ac = cell_attack_config(c, parse_attack_kind(attack), parse_norm(norm), e, c.seeds.front());
        const auto ev = robust_accuracy(saved.projection, *saved.head, test, ac);
        ResultRow row{test.name, std::string(to_string(saved.projection.kind)), saved.projection.components(),
                      std::string(head_kind_name(*saved.head)), attack, std::string(to_string(ac.threat.p)), e,
                      ev.accuracy, n, c.seeds.front(), {}};
        fmt::print("{} {} eps={} robust={:.6f} clean={:.6f}\n", attack, norm, e, ev.accuracy, ev.clean_accuracy);
        table.push_back(row);
    }
    write_csv(table, ensure_out(c) / "attack.csv");
    return 0;
}

int cmd_certify(const Globals& g, const std::string& model_path, const std::string& norm) {
    const auto c = resolve(g);
    const auto data = load_experiment_data(c);
    const auto saved = load_full_model(model_path);
    const auto p = parse_norm(norm);
    const auto records = certify_dataset(saved.projection, *saved.head, data.test, p, c.limit);
    const auto out = ensure_out(c);
    write_certificate_csv(records, out / fmt::format("certificates_{}.csv", to_string(p)));
    const auto curve = certified_accuracy_curve(records, c.epsilons);
    ResultTable table;
    for (const auto& pt : curve) {
        table.push_back({data.test.name, std::string(to_string(saved.projection.kind)), saved.projection.components(),
                         std::string(head_kind_name(*saved.head)), "certified", std::string(to_string(p)), pt.epsilon,
                         pt.accuracy, records.size(), c.seeds.front(), {}});
        fmt::print("eps={} certified={:.6f}\n", pt.epsilon, pt.accuracy);
    }
    write_csv(table, out / fmt::format("certified_{}.csv", to_string(p)));
    return 0;
}

int cmd_sweep(const Globals& g, bool plot) {
    const auto c = resolve(g);
    const auto table = run_sweep(c, progress_for(g));
    const auto out = ensure_out(c);
    write_csv(table, out / "results.csv");
    if (plot) render_curves(table, out / "curves.svg");
    std::size_t failed = 0;
    for (const auto& row : table) failed += row.ok() ? 0 : 1;
    fmt::print("{} rows ({} failed) -> {}\n", table.size(), failed, (out / "results.csv").string());
    return 0;
}

int cmd_plot(const std::string& in, const std::string& out) {
    render_curves(read_csv(in), out);
    fmt::print("wrote {}\n", out);
    return 0;
}

int cmd_dump(const Globals& g, const std::string& model_path, const std::string& attack, const std::string& norm,
             std::vector<double> eps, std::size_t count) {
    auto c = resolve(g);
    const auto data = load_experiment_data(c);
    const auto saved = load_full_model(model_path);
    if (!eps.empty()) c.epsilons = eps;
    const auto out = ensure_out(c);
    for (double e : c.epsilons) {
        const auto ac = cell_attack_config(c, parse_attack_kind(attack), parse_norm(norm), e, c.seeds.front());
        const auto dir = out / fmt::format("advex_{}_{}_eps{}", attack, to_string(ac.threat.p), e);
        dump_adversarial_grid(saved.projection, *saved.head, data.test, ac, count, dir);
        fmt::print("wrote {}\n", dir.string());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse-projection robustness experiments"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "key=value experiment config")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Override the seed list with a single seed");
    app.add_option("--out", g.out_dir, "Output directory");
    app.add_option("--mnist-dir", g.mnist_dir, "Directory with the MNIST IDX files");
    app.add_option("--cifar-dir", g.cifar_dir, "Directory with the CIFAR-10 binary batches");
    app.add_option("--limit", g.limit, "Test points per evaluation");
    app.add_flag("-q,--quiet", g.quiet, "No progress output");

    ModelChoice fit_m, train_m;
    auto* fit = app.add_subcommand("fit", "Fit a projection and save it");
    add_model_choice(fit, fit_m);
    auto* train = app.add_subcommand("train", "Fit a projection, train the head, save both");
    add_model_choice(train, train_m);

    std::string model_path, attack_name = "fgsm", norm_name = "inf";
    std::vector<double> eps;
    auto* attack = app.add_subcommand("attack", "Robust accuracy of a saved model");
    attack->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
    attack->add_option("--attack", attack_name, "fgsm, pgd, mim or square");
    attack->add_option("--norm", norm_name, "inf or 2");
    attack->add_option("--eps", eps, "Perturbation budgets (default: config grid)");

    auto* certify = app.add_subcommand("certify", "Certified radii of a saved linear-head model");
    certify->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
    certify->add_option("--norm", norm_name, "inf or 2");

    bool plot_after = true;
    auto* sweep = app.add_subcommand("sweep", "Full grid: projection x r x attack x norm x eps");
    sweep->add_flag("!--no-plot", plot_after, "Skip curves.svg");

    std::string plot_in, plot_out = "curves.svg";
    auto* plot = app.add_subcommand("plot", "Render accuracy curves from a results CSV");
    plot->add_option("--in", plot_in, "results.csv")->required()->check(CLI::ExistingFile);
    plot->add_option("-o,--output", plot_out, "SVG path");

    std::size_t count = 8;
    auto* dump = app.add_subcommand("dump-advex", "Write clean/adversarial PGM images");
    dump->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
    dump->add_option("--attack", attack_name, "fgsm, pgd, mim or square");
    dump->add_option("--norm", norm_name, "inf or 2");
    dump->add_option("--eps", eps, "Perturbation budgets (default: config grid)");
    dump->add_option("--count", count, "Examples per budget");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit) return cmd_fit(g, fit_m);
        if (*train) return cmd_train(g, train_m);
        if (*attack) return cmd_attack(g, model_path, attack_name, norm_name, eps);
        if (*certify) return cmd_certify(g, model_path, norm_name);
        if (*sweep) return cmd_sweep(g, plot_after);
        if (*plot) return cmd_plot(plot_in, plot_out);
        if (*dump) return cmd_dump(g, model_path, attack_name, norm_name, eps, count);
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
