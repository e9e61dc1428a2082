#pragma once

#include <string>
#include <vector>

#include "ecar/adjacency.hpp"
#include "ecar/types.hpp"

namespace ecar {

// Numeric table with a header row. All body cells must parse as doubles.
struct CsvTable {
    std::vector<std::string> columns;
    Matrix values;  // rows x columns

    Index rows() const { return values.rows(); }
    bool has(const std::string& name) const;
    Index column_index(const std::string& name) const;  // throws when missing
    Vector column(const std::string& name) const;
};

CsvTable read_csv_table(const std::string& path);
void write_csv_table(const std::string& path, const std::vector<std::string>& columns, const Matrix& values);

// Edge list: two 1-based region indices per line, separated by commas or
// whitespace; blank lines and '#' comments ignored.
AdjacencyGraph read_edge_list(const std::string& path, Index n);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Stable 64-bit FNV-1a fingerprint of the bytes, hex encoded. Identifies the
// exact input content inside run manifests.
std::string content_fingerprint(const std::string& bytes);

}  // namespace ecar
