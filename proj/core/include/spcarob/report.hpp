#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spcarob/attacks.hpp"
#include "spcarob/certificates.hpp"
#include "spcarob/datasets.hpp"
#include "spcarob/heads.hpp"
#include "spcarob/projection.hpp"

namespace spcarob {

// One CSV line. attack is an attack name, "clean" or "certified"; norm is
// "inf", "2" or "none" for clean rows.
struct ResultRow {
    std::string dataset;
    std::string projection;
    std::size_t r = 0;
    std::string head;
    std::string attack;
    std::string norm;
    double epsilon = 0.0;
    double accuracy = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string error;  // non-empty marks a failed cell; written as accuracy "error"

    bool ok() const noexcept { return error.empty(); }
};

using ResultTable = std::vector<ResultRow>;

inline constexpr const char* kCsvHeader = "dataset,projection,r,head,attack,norm,epsilon,accuracy,n,seed";

std::string format_csv(const ResultTable& table);
void write_csv(const ResultTable& table, const std::filesystem::path& path);
ResultTable parse_csv(const std::string& text);
ResultTable read_csv(const std::filesystem::path& path);

void write_certificate_csv(const std::vector<CertificateRecord>& records, const std::filesystem::path& path);

// Panel geometry for render_curves. Panels are laid out two per row. Inside
// a panel, ε ∈ [0, eps_max] maps to x ∈ [left, left + plot_width] and
// accuracy ∈ [0, 1] maps to y ∈ [top + plot_height, top].
struct SvgLayout {
    double panel_width = 420.0;
    double panel_height = 300.0;
    double left = 60.0;
    double right = 130.0;
    double top = 36.0;
    double bottom = 48.0;
    std::size_t columns = 2;

    double plot_width() const noexcept { return panel_width - left - right; }
    double plot_height() const noexcept { return panel_height - top - bottom; }
};

struct SvgPoint {
    double x = 0.0;
    double y = 0.0;
};

// Absolute coordinates of (ε, accuracy) in panel `panel`.
SvgPoint svg_point(const SvgLayout& layout, std::size_t panel, double epsilon, double accuracy, double eps_max);

// One panel per (dataset, attack, norm), one polyline per (projection, r,
// head); SPCA solid, PCA dashed, color keyed on r. Clean and error rows are
// skipped.
std::string render_curves_svg(const ResultTable& table, const SvgLayout& layout = {});
void render_curves(const ResultTable& table, const std::filesystem::path& path, const SvgLayout& layout = {});

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

std::uint8_t quantize(double v);  // round(255 · clamp(v, 0, 1))
GrayImage to_image(std::span<const double> x, std::size_t width, std::size_t height);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

struct AdvexDump {
    std::vector<GrayImage> clean;
    std::vector<GrayImage> adversarial;
    std::vector<GrayImage> perturbation;  // round(255 · |x' - x|)
    GrayImage grid;                        // one row per example: clean | adversarial | perturbation
};

// Writes clean_<i>.pgm, adv_<i>.pgm, pert_<i>.pgm and grid.pgm under dir.
AdvexDump dump_adversarial_grid(const ProjectionModel& projection, const Head& head, const LabeledDataset& data,
                                const AttackConfig& config, std::size_t count, const std::filesystem::path& dir);

}  // namespace spcarob
