#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lagns/field.hpp"

namespace lagns {

/// Binary field dump, little-endian:
///   magic "LAGF", u32 version, u32 n, u32 N, f64 L, u32 component count,
///   then row-major f64 values per component.
inline constexpr std::uint32_t kFieldFormatVersion = 1;

void dump_field(const std::filesystem::path& path, const GridSpec& grid,
                const std::vector<const Eigen::ArrayXd*>& components);

void dump_field(const std::filesystem::path& path, const ScalarField& f);
void dump_field(const std::filesystem::path& path, const VectorField& v);
void dump_field(const std::filesystem::path& path, const MatrixField& M);

struct LoadedField {
    GridSpec grid;
    std::vector<Eigen::ArrayXd> components;
};

LoadedField load_field(const std::filesystem::path& path);

VectorField load_vector_field(const std::filesystem::path& path);
ScalarField load_scalar_field(const std::filesystem::path& path);

/// Line-buffered CSV writer; doubles are printed with %.17g so identical runs
/// produce identical bytes.
class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::string& header);
    void row(const std::vector<std::string>& cells);
    void row(std::initializer_list<std::string> cells) { row(std::vector<std::string>(cells)); }
    static std::string num(double v);

  private:
    std::ofstream out_;
};

/// Read a CSV file into header + string cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

} // namespace lagns
