#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace landau {

/// Row-major float64 array with its shape.
struct GridDump {
    std::uint64_t rows = 0; // N2
    std::uint64_t cols = 0; // N1, the fastest index
    std::vector<double> values;
};

/// Binary layout: rows and cols as little-endian uint64, then rows * cols
/// little-endian float64 values in row-major order. Throws IoError.
void write_grid_dump(const std::filesystem::path& file, const GridDump& dump);
GridDump read_grid_dump(const std::filesystem::path& file);

} // namespace landau
