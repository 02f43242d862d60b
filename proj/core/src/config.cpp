#include "spcarob/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "spcarob/error.hpp"
#include "spcarob/rng.hpp"

namespace spcarob {

std::vector<double> default_epsilon_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 20; ++i) grid.push_back(static_cast<double>(i) / 100.0);
    return grid;
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view text, std::string_view key, int line) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end)
        throw FormatError(fmt::format("config line {}: '{}' is not a valid value for {}", line, text, key));
    return value;
}

bool parse_bool(std::string_view text, std::string_view key, int line) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw FormatError(fmt::format("config line {}: '{}' is not a boolean for {}", line, text, key));
}

std::size_t parse_limit(std::string_view text, std::string_view key, int line) {
    if (text == "all" || text == "none") return kNoLimit;
    return parse_number<std::size_t>(text, key, line);
}

template <class T>
void push_list(std::vector<T>& list, std::set<std::string>& seen, const std::string& key, T value) {
    if (seen.insert(key).second) list.clear();
    list.push_back(value);
}

}  // namespace

void ExperimentConfig::validate() const {
    if (dataset != "mnist" && dataset != "cifar-binary" && dataset != "synthetic")
        throw ParameterError(fmt::format("unknown dataset '{}' (mnist, cifar-binary, synthetic)", dataset));
    if (head != "mlp" && head != "linear") throw ParameterError(fmt::format("unknown head '{}' (mlp, linear)", head));
    if (projections.empty()) throw ParameterError("config: no projection kinds");
    if (components.empty()) throw ParameterError("config: no component counts");
    if (std::find(components.begin(), components.end(), std::size_t{0}) != components.end())
        throw ParameterError("config: r must be positive");
    if (seeds.empty()) throw ParameterError("config: no seeds");
    if (!(density > 0.0 && density <= 1.0)) throw ParameterError(fmt::format("config: density {} outside (0, 1]", density));
    for (double e : epsilons)
        if (!(e >= 0.0) || !std::isfinite(e)) throw ParameterError(fmt::format("config: bad epsilon {}", e));
    if (!std::is_sorted(epsilons.begin(), epsilons.end()))
        throw ParameterError("config: epsilons must be listed in ascending order");
    if (!attacks.empty() && (norms.empty() || epsilons.empty()))
        throw ParameterError("config: attacks need at least one norm and one epsilon");
    if (square_budget < 1) throw ParameterError(fmt::format("config: square_budget {} < 1", square_budget));
    if (dataset == "synthetic" && (synthetic_train == 0 || synthetic_test == 0 || synthetic_side == 0 ||
                                   synthetic_classes < 2))
        throw ParameterError("config: synthetic dataset needs positive sizes and at least two classes");
    train.validate();
}

std::string ExperimentConfig::to_text() const {
    std::string out;
    auto line = [&out](std::string_view key, const auto& value) { out += fmt::format("{} = {}\n", key, value); };
    auto limit_text = [](std::size_t v) { return v == kNoLimit ? std::string("all") : std::to_string(v); };
    line("dataset", dataset);
    for (auto k : projections) line("projection", to_string(k));
    for (auto r : components) line("r", r);
    line("density", density);
    line("head", head);
    line("epochs", train.epochs);
    line("learning_rate", train.learning_rate);
    line("batch_size", train.batch_size);
    for (auto h : train.hidden) line("hidden", h);
    if (attacks.empty()) line("attack", "none");
    for (auto a : attacks) line("attack", to_string(a));
    for (auto p : norms) line("norm", to_string(p));
    for (auto e : epsilons) line("epsilon", e);
    for (auto s : seeds) line("seed", s);
    line("out_dir", out_dir.string());
    line("limit", limit_text(limit));
    line("train_limit", limit_text(train_limit));
    line("clip", clip ? "true" : "false");
    line("square_budget", square_budget);
    line("mnist_dir", mnist_dir.string());
    line("cifar_dir", cifar_dir.string());
    line("synthetic_train", synthetic_train);
    line("synthetic_test", synthetic_test);
    line("synthetic_side", synthetic_side);
    line("synthetic_classes", synthetic_classes);
    line("synthetic_noise", synthetic_noise);
    return out;
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig c) {
    std::set<std::string> seen;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view text = raw;
        if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
        text = trim(text);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) throw FormatError(fmt::format("config line {}: expected key = value", line));
        const std::string key(trim(text.substr(0, eq)));
        const std::string_view value = trim(text.substr(eq + 1));
        if (key.empty() || value.empty()) throw FormatError(fmt::format("config line {}: empty key or value", line));

        if (key == "dataset") c.dataset = value;
        else if (key == "projection") push_list(c.projections, seen, key, parse_projection_kind(value));
        else if (key == "r") push_list(c.components, seen, key, parse_number<std::size_t>(value, key, line));
        else if (key == "density") c.density = parse_number<double>(value, key, line);
        else if (key == "head") c.head = value;
        else if (key == "epochs") c.train.epochs = parse_number<int>(value, key, line);
        else if (key == "learning_rate") c.train.learning_rate = parse_number<double>(value, key, line);
        else if (key == "batch_size") c.train.batch_size = parse_number<std::size_t>(value, key, line);
        else if (key == "hidden") push_list(c.train.hidden, seen, key, parse_number<std::size_t>(value, key, line));
        else if (key == "attack" && value == "none") {
            seen.insert(key);
            c.attacks.clear();
        } else if (key == "attack") push_list(c.attacks, seen, key, parse_attack_kind(value));
        else if (key == "norm") push_list(c.norms, seen, key, parse_norm(value));
        else if (key == "epsilon") push_list(c.epsilons, seen, key, parse_number<double>(value, key, line));
        else if (key == "seed") push_list(c.seeds, seen, key, parse_number<std::uint64_t>(value, key, line));
        else if (key == "out_dir") c.out_dir = std::string(value);
        else if (key == "limit") c.limit = parse_limit(value, key, line);
        else if (key == "train_limit") c.train_limit = parse_limit(value, key, line);
        else if (key == "clip") c.clip = parse_bool(value, key, line);
        else if (key == "square_budget") c.square_budget = parse_number<int>(value, key, line);
        else if (key == "mnist_dir") c.mnist_dir = std::string(value);
        else if (key == "cifar_dir") c.cifar_dir = std::string(value);
        else if (key == "synthetic_train") c.synthetic_train = parse_number<std::size_t>(value, key, line);
        else if (key == "synthetic_test") c.synthetic_test = parse_number<std::size_t>(value, key, line);
        else if (key == "synthetic_side") c.synthetic_side = parse_number<std::size_t>(value, key, line);
        else if (key == "synthetic_classes") c.synthetic_classes = parse_number<std::size_t>(value, key, line);
        else if (key == "synthetic_noise") c.synthetic_noise = parse_number<double>(value, key, line);
        else throw ParameterError(fmt::format("config line {}: unknown key '{}'", line, key));
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open config file {}", path.string()));
    return parse_config(in, std::move(base));
}

ExperimentData load_experiment_data(const ExperimentConfig& config) {
    ExperimentData data;
    if (config.dataset == "mnist") {
        auto splits = load_mnist_dir(config.mnist_dir);
        data.train = std::move(splits.train);
        data.test = std::move(splits.test);
    } else if (config.dataset == "cifar-binary") {
        auto splits = load_cifar_binary_dir(config.cifar_dir);
        data.train = std::move(splits.train);
        data.test = std::move(splits.test);
    } else if (config.dataset == "synthetic") {
        // One draw, split in two, so both halves share the class prototypes.
        const auto all = synthetic_blobs(config.synthetic_train + config.synthetic_test, config.synthetic_side,
                                         config.synthetic_classes, config.seeds.front(), config.synthetic_noise);
        data.train = all.head(config.synthetic_train);
        data.test = all.tail(config.synthetic_test);
    } else {
        throw ParameterError(fmt::format("unknown dataset '{}'", config.dataset));
    }
    if (config.train_limit < data.train.size()) data.train = data.train.head(config.train_limit);
    return data;
}

}  // namespace spcarob
