#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spcarob/heads.hpp"
#include "spcarob/numerics.hpp"
#include "spcarob/projection.hpp"

namespace spcarob {

// File layout, all integers little-endian:
//   "SPCR" | u16 version | u32 entry count
//   per entry: u32 name length | name bytes | u64 rows | u64 cols | rows*cols f64, row-major
inline constexpr char kModelMagic[4] = {'S', 'P', 'C', 'R'};
inline constexpr std::uint16_t kModelVersion = 1;

struct NamedMatrix {
    std::string name;
    Mat value;
};

void write_matrices(const std::filesystem::path& path, const std::vector<NamedMatrix>& entries);
// Throws FormatError on a bad magic, VersionError on a version mismatch and
// TruncationError when the file ends early. Nothing is returned on failure.
std::vector<NamedMatrix> read_matrices(const std::filesystem::path& path);

struct SavedModel {
    ProjectionModel projection;
    std::optional<Head> head;  // absent for projection-only files
};

void save_model(const std::filesystem::path& path, const ProjectionModel& projection,
                const std::optional<Head>& head = std::nullopt);
SavedModel load_model(const std::filesystem::path& path);

}  // namespace spcarob
