#pragma once

// CSV and file helpers shared by the command-line tools.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "deepbf/models.hpp"

namespace deepbf {

/// Shortest round-trip decimal; integral values get a trailing ".0";
/// infinities print as inf / -inf.
std::string format_number(double v);

/// Parses a number written by format_number (also plain integers, inf, -inf,
/// nan). Throws ConfigError on anything else.
double parse_number(std::string_view token);

/// "# deepbf <version> config_hash=<hex> seed=<seed>"
std::string provenance_comment(std::uint64_t config_hash, std::uint64_t seed);

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    void comment(std::string_view text);
    void row(const std::vector<std::string>& cells);
    std::string str() const { return out_; }

private:
    std::size_t width_;
    std::string out_;
    bool header_written_ = false;
    std::vector<std::string> header_;

    void flush_header();
};

struct CsvTable {
    std::vector<std::string> header; // empty when the file has none
    std::vector<std::vector<std::string>> rows;

    /// Column index by header name; throws ConfigError if absent.
    std::size_t column(std::string_view name) const;
};

/// Skips '#' comment lines. The first remaining line is a header when any
/// of its cells is not a number.
CsvTable parse_csv(std::string_view text);

/// One dataset per row; every row must have the same number of columns.
std::vector<Data> parse_data_csv(std::string_view text);

std::string read_file(const std::string& path);
/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, std::string_view content);

} // namespace deepbf
