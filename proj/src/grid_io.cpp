#include "landau/grid_io.hpp"

#include "landau/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace landau {

namespace {

static_assert(std::endian::native == std::endian::little, "grid dumps assume a little-endian host");

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

} // namespace

void write_grid_dump(const std::filesystem::path& file, const GridDump& dump) {
    if (dump.values.size() != dump.rows * dump.cols) throw IoError("grid dump shape does not match its values");
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot open " + file.string() + " for writing");
    put(out, dump.rows);
    put(out, dump.cols);
    out.write(reinterpret_cast<const char*>(dump.values.data()),
              static_cast<std::streamsize>(dump.values.size() * sizeof(double)));
    if (!out) throw IoError("cannot write " + file.string());
}

GridDump read_grid_dump(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    GridDump d;
    in.read(reinterpret_cast<char*>(&d.rows), sizeof d.rows);
    in.read(reinterpret_cast<char*>(&d.cols), sizeof d.cols);
    if (!in) throw IoError(file.string() + ": truncated header");
    const auto expected = std::filesystem::file_size(file);
    if (d.cols != 0 && d.rows > (expected - 16) / 8 / d.cols) throw IoError(file.string() + ": shape exceeds file size");
    if (16 + 8 * d.rows * d.cols != expected) throw IoError(file.string() + ": size does not match the header");
    d.values.resize(d.rows * d.cols);
    in.read(reinterpret_cast<char*>(d.values.data()), static_cast<std::streamsize>(d.values.size() * sizeof(double)));
    if (!in) throw IoError(file.string() + ": truncated data");
    return d;
}

} // namespace landau
