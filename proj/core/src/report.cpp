#include "spcarob/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "spcarob/error.hpp"

namespace spcarob {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    f << text;
    if (!f) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T number(std::string_view text, int line, std::string_view column) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end)
        throw FormatError(fmt::format("csv line {}: bad {} '{}'", line, column, text));
    return value;
}

std::string real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", v);
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string format_csv(const ResultTable& table) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& row : table) {
        const std::string acc = row.ok() ? fmt::format("{:.6f}", row.accuracy) : std::string("error");
        out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", row.dataset, row.projection, row.r, row.head, row.attack,
                           row.norm, row.epsilon, acc, row.n, row.seed);
    }
    return out;
}

void write_csv(const ResultTable& table, const std::filesystem::path& path) {
    if (table.empty()) throw ParameterError(fmt::format("refusing to write an empty result table to '{}'", path.string()));
    for (const auto& row : table)
        if (row.ok() && !(row.accuracy >= 0.0 && row.accuracy <= 1.0))
            throw ParameterError(fmt::format("result row accuracy {} outside [0, 1]", row.accuracy));
    write_text(path, format_csv(table));
}

ResultTable parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw FormatError(fmt::format("csv header must be '{}'", kCsvHeader));
    ResultTable table;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 10) throw FormatError(fmt::format("csv line {}: expected 10 fields, got {}", lineno, f.size()));
        ResultRow row;
        row.dataset = f[0];
        row.projection = f[1];
        row.r = number<std::size_t>(f[2], lineno, "r");
        row.head = f[3];
        row.attack = f[4];
        row.norm = f[5];
        row.epsilon = number<double>(f[6], lineno, "epsilon");
        if (f[7] == "error")
            row.error = "error";
        else
            row.accuracy = number<double>(f[7], lineno, "accuracy");
        row.n = number<std::size_t>(f[8], lineno, "n");
        row.seed = number<std::uint64_t>(f[9], lineno, "seed");
        table.push_back(std::move(row));
    }
    return table;
}

ResultTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

void write_certificate_csv(const std::vector<CertificateRecord>& records, const std::filesystem::path& path) {
    std::string out = "index,clean_pred,label,margin,dual_norm,radius,norm_p\n";
    for (const auto& r : records)
        out += fmt::format("{},{},{},{},{},{},{}\n", r.index, r.clean_pred, r.label, real(r.margin), real(r.dual_norm),
                           real(r.radius), to_string(r.p));
    write_text(path, out);
}

SvgPoint svg_point(const SvgLayout& layout, std::size_t panel, double epsilon, double accuracy, double eps_max) {
    const double ox = static_cast<double>(panel % layout.columns) * layout.panel_width;
    const double oy = static_cast<double>(panel / layout.columns) * layout.panel_height;
    return {ox + layout.left + epsilon / eps_max * layout.plot_width(),
            oy + layout.top + (1.0 - accuracy) * layout.plot_height()};
}

namespace {

constexpr const char* kPalette[] = {"#440154", "#3b528b", "#21918c", "#5ec962", "#fde725",
                                    "#e66101", "#b2182b", "#762a83", "#1b7837", "#2166ac"};

std::string norm_label(const std::string& norm) {
    if (norm == "inf") return "L-inf";
    if (norm == "2") return "L2";
    return norm;
}

}  // namespace

std::string render_curves_svg(const ResultTable& table, const SvgLayout& layout) {
    using PanelKey = std::tuple<std::string, std::string, std::string>;           // dataset, attack, norm
    using SeriesKey = std::tuple<std::string, std::size_t, std::string>;          // projection, r, head
    std::map<PanelKey, std::map<SeriesKey, std::vector<std::pair<double, double>>>> panels;
    std::set<std::size_t> all_r;
    for (const auto& row : table) {
        if (!row.ok() || row.attack == "clean") continue;
        panels[{row.dataset, row.attack, row.norm}][{row.projection, row.r, row.head}].emplace_back(row.epsilon,
                                                                                                  row.accuracy);
        all_r.insert(row.r);
    }
    if (panels.empty()) throw ParameterError("render_curves: no plottable rows");

    const std::size_t n_panels = panels.size();
    const std::size_t cols = std::min(layout.columns, n_panels);
    const std::size_t rows = (n_panels + layout.columns - 1) / layout.columns;
    const double width = static_cast<double>(cols) * layout.panel_width;
    const double height = static_cast<double>(rows) * layout.panel_height;

    std::string svg = fmt::format(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{:.0f}\" height=\"{:.0f}\" "
        "viewBox=\"0 0 {:.0f} {:.0f}\" font-family=\"sans-serif\" font-size=\"11\">\n"
        "<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n",
        width, height, width, height, width, height);

    std::size_t panel = 0;
    for (auto& [pkey, series] : panels) {
        const auto& [dataset, attack, norm] = pkey;
        double eps_max = 0.0;
        for (auto& [skey, pts] : series) {
            std::sort(pts.begin(), pts.end());
            eps_max = std::max(eps_max, pts.back().first);
        }
        if (eps_max <= 0.0) eps_max = 1.0;

        const SvgPoint origin = svg_point(layout, panel, 0.0, 0.0, eps_max);
        const SvgPoint corner = svg_point(layout, panel, eps_max, 1.0, eps_max);
        svg += fmt::format("<g class=\"panel\" id=\"panel{}\">\n", panel);
        svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"13\">{} {} {}</text>\n", origin.x,
                           corner.y - 12.0, xml_escape(dataset), xml_escape(attack), norm_label(norm));
        svg += fmt::format(
            "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"#333\"/>\n",
            origin.x, corner.y, layout.plot_width(), layout.plot_height());
        for (int t = 0; t <= 4; ++t) {
            const double acc = t / 4.0;
            const SvgPoint p = svg_point(layout, panel, 0.0, acc, eps_max);
            svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#ddd\"/>\n", p.x,
                               p.y, p.x + layout.plot_width(), p.y);
            svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.2f}</text>\n", p.x - 4.0,
                               p.y + 4.0, acc);
            const double eps = eps_max * t / 4.0;
            const SvgPoint q = svg_point(layout, panel, eps, 0.0, eps_max);
            svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:.3g}</text>\n", q.x,
                               q.y + 14.0, eps);
        }
        svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">epsilon</text>\n",
                           origin.x + layout.plot_width() / 2.0, origin.y + 32.0);
        svg += fmt::format(
            "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 {:.2f} {:.2f})\">accuracy</text>\n",
            origin.x - 42.0, origin.y - layout.plot_height() / 2.0, origin.x - 42.0, origin.y - layout.plot_height() / 2.0);

        std::size_t legend = 0;
        for (const auto& [skey, pts] : series) {
            const auto& [projection, r, head] = skey;
            const auto rank = static_cast<std::size_t>(std::distance(all_r.begin(), all_r.find(r)));
            const char* color = kPalette[rank % std::size(kPalette)];
            const char* dash = projection == "pca" ? " stroke-dasharray=\"6,4\"" : "";
            std::string points;
            for (const auto& [eps, acc] : pts) {
                const SvgPoint p = svg_point(layout, panel, eps, acc, eps_max);
                if (!points.empty()) points += ' ';
                points += fmt::format("{:.2f},{:.2f}", p.x, p.y);
            }
            svg += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{}/>\n", points,
                               color, dash);
            const double lx = corner.x + 10.0;
            const double ly = corner.y + 10.0 + 14.0 * static_cast<double>(legend++);
            svg += fmt::format(
                "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"1.5\"{}/>\n",
                lx, ly, lx + 22.0, ly, color, dash);
            svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{} r={} {}</text>\n", lx + 26.0, ly + 4.0,
                               xml_escape(projection), r, xml_escape(head));
        }
        svg += "</g>\n";
        ++panel;
    }
    svg += "</svg>\n";
    return svg;
}

void render_curves(const ResultTable& table, const std::filesystem::path& path, const SvgLayout& layout) {
    if (table.empty()) throw ParameterError(fmt::format("refusing to plot an empty result table to '{}'", path.string()));
    write_text(path, render_curves_svg(table, layout));
}

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

GrayImage to_image(std::span<const double> x, std::size_t width, std::size_t height) {
    if (x.size() != width * height)
        throw DimensionError(fmt::format("image of {}x{} needs {} pixels, got {}", width, height, width * height, x.size()));
    GrayImage img{width, height, {}};
    img.pixels.reserve(x.size());
    for (double v : x) img.pixels.push_back(quantize(v));
    return img;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
    std::string out = fmt::format("P5\n{} {}\n255\n", image.width, image.height);
    out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
    write_text(path, out);
}

GrayImage read_pgm(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    std::istringstream in(text);
    std::string magic;
    GrayImage img;
    int maxval = 0;
    in >> magic >> img.width >> img.height >> maxval;
    if (!in || magic != "P5" || maxval != 255) throw FormatError(fmt::format("{}: not an 8-bit binary PGM", path.string()));
    in.get();
    const auto offset = static_cast<std::size_t>(in.tellg());
    if (text.size() - offset < img.width * img.height)
        throw TruncationError(fmt::format("{}: pixel data truncated", path.string()));
    img.pixels.assign(text.begin() + static_cast<std::ptrdiff_t>(offset),
                      text.begin() + static_cast<std::ptrdiff_t>(offset + img.width * img.height));
    return img;
}

AdvexDump dump_adversarial_grid(const ProjectionModel& projection, const Head& head, const LabeledDataset& data,
                                const AttackConfig& config, std::size_t count, const std::filesystem::path& dir) {
    const std::size_t d = data.dim();
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
    if (side * side != d) throw ParameterError(fmt::format("dump_adversarial_grid: D = {} is not a square image", d));
    count = std::min(count, data.size());
    if (count == 0) throw ParameterError("dump_adversarial_grid: nothing to dump");
    std::filesystem::create_directories(dir);

    const ProjectedClassifier model(projection, head);
    AdvexDump dump;
    for (std::size_t i = 0; i < count; ++i) {
        AttackConfig c = config;
        c.seed = example_seed(config, i);
        const auto x = data.x.row(i);
        const AttackResult res = run_attack(model, x, data.y[i], c);
        Vec delta(d);
        for (std::size_t j = 0; j < d; ++j) delta[j] = std::abs(res.x_adv[j] - x[j]);
        dump.clean.push_back(to_image(x, side, side));
        dump.adversarial.push_back(to_image(res.x_adv, side, side));
        dump.perturbation.push_back(to_image(delta, side, side));
        write_pgm(dump.clean.back(), dir / fmt::format("clean_{}.pgm", i));
        write_pgm(dump.adversarial.back(), dir / fmt::format("adv_{}.pgm", i));
        write_pgm(dump.perturbation.back(), dir / fmt::format("pert_{}.pgm", i));
    }

    GrayImage& grid = dump.grid;
    grid.width = 3 * side + 2;
    grid.height = count * side + (count - 1);
    grid.pixels.assign(grid.width * grid.height, 128);
    for (std::size_t i = 0; i < count; ++i) {
        const GrayImage* tiles[] = {&dump.clean[i], &dump.adversarial[i], &dump.perturbation[i]};
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t rr = 0; rr < side; ++rr)
                for (std::size_t cc = 0; cc < side; ++cc)
                    grid.pixels[(i * (side + 1) + rr) * grid.width + t * (side + 1) + cc] =
                        tiles[t]->pixels[rr * side + cc];
    }
    write_pgm(grid, dir / "grid.pgm");
    return dump;
}

}  // namespace spcarob
