#include "ecar/io.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace ecar {

namespace {

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim surrounding whitespace
        const auto first = cell.find_first_not_of(" \t\r");
        if (first == std::string::npos) {
            cells.emplace_back();
        } else {
            const auto last = cell.find_last_not_of(" \t\r");
            cells.push_back(cell.substr(first, last - first + 1));
        }
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_double(const std::string& cell, const std::string& path, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": cannot parse '" + cell +
                                    "' as a number");
    }
}

}  // namespace

bool CsvTable::has(const std::string& name) const {
    return std::find(columns.begin(), columns.end(), name) != columns.end();
}

Index CsvTable::column_index(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    require(it != columns.end(), "missing required column '" + name + "'");
    return static_cast<Index>(it - columns.begin());
}

Vector CsvTable::column(const std::string& name) const {
    return values.col(column_index(name));
}

CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open '" + path + "'");

    std::string line;
    std::size_t line_no = 0;
    CsvTable table;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_cells(line);
        if (table.columns.empty()) {
            require(!cells.empty(), path + ": empty header row");
            table.columns = cells;
            continue;
        }
        require(cells.size() == table.columns.size(),
                path + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.columns.size()) +
                    " cells, found " + std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) row[j] = parse_double(cells[j], path, line_no);
        rows.push_back(std::move(row));
    }
    require(!table.columns.empty(), path + ": no header row");

    table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.columns.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            table.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return table;
}

void write_csv_table(const std::string& path, const std::vector<std::string>& columns, const Matrix& values) {
    require(static_cast<Index>(columns.size()) == values.cols(), "column names do not match value columns");
    std::ostringstream out;
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (j > 0) out << ',';
        out << columns[j];
    }
    out << '\n';
    out.precision(17);
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index j = 0; j < values.cols(); ++j) {
            if (j > 0) out << ',';
            out << values(i, j);
        }
        out << '\n';
    }
    write_text_file(path, out.str());
}

AdjacencyGraph read_edge_list(const std::string& path, Index n) {
    std::ifstream in(path);
    require(in.good(), "cannot open '" + path + "'");

    std::vector<std::pair<Index, Index>> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::replace(line.begin(), line.end(), ',', ' ');
        std::stringstream ss(line);
        long long a = 0;
        long long b = 0;
        if (!(ss >> a)) continue;  // blank or comment-only line
        require(static_cast<bool>(ss >> b), path + ":" + std::to_string(line_no) + ": expected two region indices");
        long long extra = 0;
        require(!(ss >> extra), path + ":" + std::to_string(line_no) + ": expected exactly two region indices");
        pairs.emplace_back(static_cast<Index>(a), static_cast<Index>(b));
    }
    return build_adjacency_from_edges(n, pairs);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open '" + path + "' for writing");
    out << content;
    require(out.good(), "failed writing '" + path + "'");
}

std::string content_fingerprint(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace ecar
