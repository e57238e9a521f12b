#include "lagns/io.hpp"

#include <cstdio>
#include <cstring>

namespace lagns {

namespace {

template <typename T> void write_raw(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T> T read_raw(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

} // namespace

void dump_field(const std::filesystem::path& path, const GridSpec& grid,
                const std::vector<const Eigen::ArrayXd*>& components) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
    out.write("LAGF", 4);
    write_raw<std::uint32_t>(out, kFieldFormatVersion);
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(grid.n));
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(grid.N));
    write_raw<double>(out, grid.L);
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(components.size()));
    for (const auto* c : components)
        out.write(reinterpret_cast<const char*>(c->data()),
                  static_cast<std::streamsize>(sizeof(double) * c->size()));
}

void dump_field(const std::filesystem::path& path, const ScalarField& f) {
    dump_field(path, f.grid(), {&f.values()});
}

void dump_field(const std::filesystem::path& path, const VectorField& v) {
    std::vector<const Eigen::ArrayXd*> comps;
    for (auto& c : v.components()) comps.push_back(&c.values());
    dump_field(path, v.grid(), comps);
}

void dump_field(const std::filesystem::path& path, const MatrixField& M) {
    std::vector<const Eigen::ArrayXd*> comps;
    for (auto& c : M.components()) comps.push_back(&c.values());
    dump_field(path, M.grid(), comps);
}

LoadedField load_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, "LAGF", 4) != 0)
        throw ValidationError(path.string() + ": not a LAGF field dump");
    const auto version = read_raw<std::uint32_t>(in);
    if (version != kFieldFormatVersion)
        throw ValidationError(path.string() + ": unsupported format version " +
                              std::to_string(version));
    LoadedField lf;
    lf.grid.n = static_cast<int>(read_raw<std::uint32_t>(in));
    lf.grid.N = static_cast<int>(read_raw<std::uint32_t>(in));
    lf.grid.L = read_raw<double>(in);
    lf.grid.validate();
    const auto ncomp = read_raw<std::uint32_t>(in);
    for (std::uint32_t c = 0; c < ncomp; ++c) {
        Eigen::ArrayXd a(static_cast<Eigen::Index>(lf.grid.points()));
        in.read(reinterpret_cast<char*>(a.data()),
                static_cast<std::streamsize>(sizeof(double) * a.size()));
        if (!in) throw ValidationError(path.string() + ": truncated field dump");
        lf.components.push_back(std::move(a));
    }
    return lf;
}

VectorField load_vector_field(const std::filesystem::path& path) {
    LoadedField lf = load_field(path);
    if (static_cast<int>(lf.components.size()) != lf.grid.n)
        throw ValidationError(path.string() + ": component count is not n");
    std::vector<ScalarField> comps;
    for (auto& a : lf.components)
        comps.push_back(ScalarField::from_physical(lf.grid, std::move(a)));
    return VectorField(lf.grid, std::move(comps));
}

ScalarField load_scalar_field(const std::filesystem::path& path) {
    LoadedField lf = load_field(path);
    if (lf.components.size() != 1)
        throw ValidationError(path.string() + ": expected one component");
    return ScalarField::from_physical(lf.grid, std::move(lf.components[0]));
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& header) {
    out_.open(path);
    if (!out_) throw ValidationError("cannot open " + path.string() + " for writing");
    out_ << header << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';
    out_.flush();
}

std::string CsvWriter::num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            auto pos = s.find(',', start);
            cells.push_back(s.substr(start, pos == std::string::npos ? pos : pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        return cells;
    };
    if (std::getline(in, line)) t.header = split(line);
    while (std::getline(in, line))
        if (!line.empty()) t.rows.push_back(split(line));
    return t;
}

} // namespace lagns
