#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <boost/crc.hpp>

#include "dualschro/errors.hpp"
#include "dualschro/mesh.hpp"

namespace dualschro::io {

/// Shortest faithful text for a double: 17 significant digits.
inline std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::uint32_t crc32(const std::string& bytes) {
    boost::crc_32_type crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

inline std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
}

/// CSV text with a header row; every number at 17 significant digits.
class Csv {
public:
    explicit Csv(std::vector<std::string> header) : columns_(header.size()) { line(header); }

    Csv& row(const std::vector<double>& values) {
        if (values.size() != columns_) throw ContractError("csv: row width does not match header");
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(num(v));
        line(cells);
        return *this;
    }

    /// Row of preformatted cells.
    Csv& cells(const std::vector<std::string>& values) {
        if (values.size() != columns_) throw ContractError("csv: row width does not match header");
        line(values);
        return *this;
    }

    std::string str() const { return text_.str(); }

private:
    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) text_ << (i ? "," : "") << cells[i];
        text_ << '\n';
    }

    std::size_t columns_;
    std::ostringstream text_;
};

/// Grid fields as CSV: x[,y] followed by one column per field.
inline std::string fields_csv(const std::vector<std::string>& names, const std::vector<const Field*>& fields) {
    if (names.size() != fields.size() || fields.empty()) throw ContractError("fields_csv: names and fields differ");
    const DomainMesh& m = fields.front()->mesh();
    std::vector<std::string> header = m.dim == 1 ? std::vector<std::string>{"x"} : std::vector<std::string>{"x", "y"};
    header.insert(header.end(), names.begin(), names.end());
    Csv csv(header);
    const int ny = m.dim == 1 ? 1 : m.n;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < m.n; ++i) {
            std::vector<double> row{m.coord(0, i)};
            if (m.dim == 2) row.push_back(m.coord(1, j));
            for (const Field* f : fields) row.push_back((*f)[m.index(i, j)]);
            csv.row(row);
        }
    return csv.str();
}

/// Writes files under one output directory and records them for the manifest.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {}

    void write(const std::string& name, const std::string& text) {
        write_file(root_ / name, text);
        files_.emplace_back(name, text);
    }

    /// manifest.txt: config hash, then one line per file with its CRC-32 and byte count.
    void write_manifest(const std::string& canonical_config) const {
        std::ostringstream m;
        m << "config_crc32=" << hex32(crc32(canonical_config)) << '\n';
        for (const auto& [name, text] : files_)
            m << "file=" << name << " crc32=" << hex32(crc32(text)) << " bytes=" << text.size() << '\n';
        write_file(root_ / "manifest.txt", m.str());
    }

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
    std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace dualschro::io
