#include <fnsr/io.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "field container assumes a little-endian host");

namespace fnsr {
namespace {

constexpr char kMagic[8] = {'F', 'N', 'S', 'R', 'F', 'L', 'D', '1'};

void write_header(std::ostream& os, const TorusGrid& g, std::uint32_t rank) {
    os.write(kMagic, 8);
    std::uint32_t h[3] = {std::uint32_t(g.d), std::uint32_t(g.n), rank};
    os.write(reinterpret_cast<const char*>(h), sizeof h);
}

void write_block(std::ostream& os, const Eigen::ArrayXd& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             std::streamsize(sizeof(double)) * v.size());
}

struct Header {
    TorusGrid grid;
    std::uint32_t rank;
};

Header read_header(std::istream& is, std::uint32_t want_rank) {
    char magic[8];
    std::uint32_t h[3];
    is.read(magic, 8);
    is.read(reinterpret_cast<char*>(h), sizeof h);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("field container: bad magic");
    if (h[2] != want_rank) throw std::runtime_error("field container: rank mismatch");
    return {TorusGrid(int(h[0]), int(h[1])), h[2]};
}

Eigen::ArrayXd read_block(std::istream& is, std::ptrdiff_t count) {
    Eigen::ArrayXd v(count);
    is.read(reinterpret_cast<char*>(v.data()), std::streamsize(sizeof(double)) * count);
    if (!is) throw std::runtime_error("field container: truncated payload");
    return v;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    return is;
}

} // namespace

void write_field(std::ostream& os, const TorusField& f) {
    write_header(os, f.grid(), 0);
    write_block(os, f.values());
}

void write_field(std::ostream& os, const TorusVectorField& f) {
    write_header(os, f.grid(), 1);
    for (int i = 0; i < f.grid().d; ++i) write_block(os, f[i].values());
}

void write_field(std::ostream& os, const TorusTensorField& f) {
    write_header(os, f.grid(), 2);
    for (int i = 0; i < f.grid().d; ++i)
        for (int j = 0; j < f.grid().d; ++j) write_block(os, f(i, j).values());
}

TorusField read_scalar_field(std::istream& is) {
    Header h = read_header(is, 0);
    return TorusField(h.grid, read_block(is, h.grid.size()));
}

TorusVectorField read_vector_field(std::istream& is) {
    Header h = read_header(is, 1);
    TorusVectorField v(h.grid);
    for (int i = 0; i < h.grid.d; ++i)
        v[i] = TorusField(h.grid, read_block(is, h.grid.size()));
    return v;
}

TorusTensorField read_tensor_field(std::istream& is) {
    Header h = read_header(is, 2);
    TorusTensorField t(h.grid);
    for (int i = 0; i < h.grid.d; ++i)
        for (int j = 0; j < h.grid.d; ++j)
            t(i, j) = TorusField(h.grid, read_block(is, h.grid.size()));
    return t;
}

void save_field(const std::string& path, const TorusField& f) {
    auto os = open_out(path);
    write_field(os, f);
}
void save_field(const std::string& path, const TorusVectorField& f) {
    auto os = open_out(path);
    write_field(os, f);
}
void save_field(const std::string& path, const TorusTensorField& f) {
    auto os = open_out(path);
    write_field(os, f);
}
TorusField load_scalar_field(const std::string& path) {
    auto is = open_in(path);
    return read_scalar_field(is);
}
TorusVectorField load_vector_field(const std::string& path) {
    auto is = open_in(path);
    return read_vector_field(is);
}
TorusTensorField load_tensor_field(const std::string& path) {
    auto is = open_in(path);
    return read_tensor_field(is);
}

namespace {

void csv_header(std::ostream& os, int d, int ncomp) {
    for (int a = 0; a < d; ++a) os << "x" << a << ",";
    for (int c = 0; c < ncomp; ++c) os << "v" << c << (c + 1 < ncomp ? "," : "\n");
}

} // namespace

void write_csv(std::ostream& os, const TorusField& f) {
    const TorusGrid& g = f.grid();
    csv_header(os, g.d, 1);
    os.precision(17);
    for_each_point(g, [&](std::ptrdiff_t idx, const std::array<double, 3>& x) {
        for (int a = 0; a < g.d; ++a) os << x[a] << ",";
        os << f.values()[idx] << "\n";
    });
}

void write_csv(std::ostream& os, const TorusVectorField& f) {
    const TorusGrid& g = f.grid();
    csv_header(os, g.d, g.d);
    os.precision(17);
    for_each_point(g, [&](std::ptrdiff_t idx, const std::array<double, 3>& x) {
        for (int a = 0; a < g.d; ++a) os << x[a] << ",";
        for (int c = 0; c < g.d; ++c)
            os << f[c].values()[idx] << (c + 1 < g.d ? "," : "\n");
    });
}

} // namespace fnsr
