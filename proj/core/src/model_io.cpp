#include "spcarob/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "spcarob/error.hpp"

namespace spcarob {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

namespace {

template <class T>
void put(std::string& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

class Reader {
public:
    Reader(std::vector<char> bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

    template <class T>
    T get(std::string_view what) {
        T value;
        std::memcpy(&value, take(sizeof(T), what), sizeof(T));
        return value;
    }

    const char* take(std::size_t n, std::string_view what) {
        if (n > bytes_.size() - pos_)
            throw TruncationError(fmt::format("{}: file ends inside {} (offset {}, need {} bytes, have {})", path_,
                                              what, pos_, n, bytes_.size() - pos_));
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    bool done() const noexcept { return pos_ == bytes_.size(); }

private:
    std::vector<char> bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

Mat row_vector(const Vec& v) { return Mat(1, v.size(), v); }

Vec as_vector(const Mat& m) { return Vec(m.values().begin(), m.values().end()); }

Mat scalar(double v) { return Mat(1, 1, v); }

}  // namespace

void write_matrices(const std::filesystem::path& path, const std::vector<NamedMatrix>& entries) {
    std::string out(kModelMagic, sizeof(kModelMagic));
    put<std::uint16_t>(out, kModelVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out += e.name;
        put<std::uint64_t>(out, e.value.rows());
        put<std::uint64_t>(out, e.value.cols());
        for (double v : e.value.values()) put<double>(out, v);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

std::vector<NamedMatrix> read_matrices(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot open '{}'", path.string()));
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader in(std::move(bytes), path.string());

    const char* magic = in.take(sizeof(kModelMagic), "magic");
    if (std::memcmp(magic, kModelMagic, sizeof(kModelMagic)) != 0)
        throw FormatError(fmt::format("{}: not a model file (bad magic)", path.string()));
    const auto version = in.get<std::uint16_t>("version");
    if (version != kModelVersion)
        throw VersionError(fmt::format("{}: model file version {} (expected {})", path.string(), version, kModelVersion));
    const auto count = in.get<std::uint32_t>("entry count");

    std::vector<NamedMatrix> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = in.get<std::uint32_t>("name length");
        const char* name = in.take(len, "entry name");
        NamedMatrix e;
        e.name.assign(name, len);
        const auto rows = in.get<std::uint64_t>("row count");
        const auto cols = in.get<std::uint64_t>("column count");
        if (cols != 0 && rows > (std::numeric_limits<std::uint64_t>::max() / 8) / cols)
            throw FormatError(fmt::format("{}: entry '{}' has an impossible shape {}x{}", path.string(), e.name, rows, cols));
        const char* payload = in.take(rows * cols * sizeof(double), "matrix payload");
        Vec values(rows * cols);
        std::memcpy(values.data(), payload, values.size() * sizeof(double));
        e.value = Mat(rows, cols, std::move(values));
        entries.push_back(std::move(e));
    }
    if (!in.done()) throw FormatError(fmt::format("{}: trailing bytes after the last entry", path.string()));
    return entries;
}

void save_model(const std::filesystem::path& path, const ProjectionModel& projection, const std::optional<Head>& head) {
    std::vector<NamedMatrix> entries;
    entries.push_back({"projection.kind", scalar(projection.kind == ProjectionKind::Pca ? 0.0 : 1.0)});
    entries.push_back({"projection.W", projection.w});
    entries.push_back({"projection.b", row_vector(projection.b)});
    if (head) {
        if (const auto* lin = std::get_if<LinearHead>(&*head)) {
            entries.push_back({"head.kind", scalar(0.0)});
            entries.push_back({"head.U", lin->u});
            entries.push_back({"head.bias", row_vector(lin->biases)});
        } else {
            const auto& mlp = std::get<MlpHead>(*head);
            entries.push_back({"head.kind", scalar(1.0)});
            for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
                entries.push_back({fmt::format("head.layer{}.W", l), mlp.layers[l].w});
                entries.push_back({fmt::format("head.layer{}.b", l), row_vector(mlp.layers[l].b)});
            }
        }
    }
    write_matrices(path, entries);
}

SavedModel load_model(const std::filesystem::path& path) {
    std::map<std::string, Mat> by_name;
    for (auto& e : read_matrices(path)) by_name[e.name] = std::move(e.value);
    auto need = [&](const std::string& name) -> const Mat& {
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw FormatError(fmt::format("{}: missing entry '{}'", path.string(), name));
        return it->second;
    };
    auto kind_of = [&](const std::string& name) {
        const Mat& m = need(name);
        if (m.rows() != 1 || m.cols() != 1)
            throw FormatError(fmt::format("{}: entry '{}' must be 1x1", path.string(), name));
        return m(0, 0);
    };

    SavedModel out;
    const double pk = kind_of("projection.kind");
    if (pk != 0.0 && pk != 1.0) throw FormatError(fmt::format("{}: unknown projection kind {}", path.string(), pk));
    out.projection = ProjectionModel::from_matrix(pk == 0.0 ? ProjectionKind::Pca : ProjectionKind::Spca,
                                                  need("projection.W"), as_vector(need("projection.b")));

    if (by_name.count("head.kind")) {
        const double hk = kind_of("head.kind");
        if (hk == 0.0) {
            LinearHead lin{need("head.U"), as_vector(need("head.bias"))};
            lin.validate();
            out.head = std::move(lin);
        } else if (hk == 1.0) {
            MlpHead mlp;
            for (std::size_t l = 0; by_name.count(fmt::format("head.layer{}.W", l)); ++l)
                mlp.layers.push_back(
                    {need(fmt::format("head.layer{}.W", l)), as_vector(need(fmt::format("head.layer{}.b", l)))});
            if (mlp.layers.empty()) throw FormatError(fmt::format("{}: MLP head without layers", path.string()));
            mlp.validate();
            out.head = std::move(mlp);
        } else {
            throw FormatError(fmt::format("{}: unknown head kind {}", path.string(), hk));
        }
    }
    return out;
}

}  // namespace spcarob
