#include "deepbf/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "deepbf/checkpoint.hpp"
#include "deepbf/error.hpp"

namespace deepbf {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

double parse_number(std::string_view token) {
    if (token == "inf" || token == "+inf") return HUGE_VAL;
    if (token == "-inf") return -HUGE_VAL;
    if (token == "nan") return std::nan("");
    const char* first = token.data();
    const char* last = first + token.size();
    if (first != last && *first == '+') ++first;
    double v = 0.0;
    const auto res = std::from_chars(first, last, v);
    if (first == last || res.ec != std::errc{} || res.ptr != last)
        throw ConfigError("not a number: '" + std::string(token) + "'");
    return v;
}

std::string provenance_comment(std::uint64_t config_hash, std::uint64_t seed) {
    return std::string("# deepbf ") + DEEPBF_VERSION + " config_hash=" + hash_hex(config_hash) +
           " seed=" + std::to_string(seed);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()), header_(std::move(header)) {}

void CsvWriter::comment(std::string_view text) {
    if (header_written_) throw Error("CSV comments must precede the header");
    out_ += text.starts_with("#") ? std::string(text) : "# " + std::string(text);
    out_ += '\n';
}

void CsvWriter::flush_header() {
    if (header_written_) return;
    header_written_ = true;
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (i) out_ += ',';
        out_ += header_[i];
    }
    out_ += '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw Error("CSV row has the wrong number of cells");
    flush_header();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ += ',';
        out_ += cells[i];
    }
    out_ += '\n';
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ConfigError("CSV has no column '" + std::string(name) + "'");
}

namespace {

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
        cells.emplace_back(cell);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

bool is_number(const std::string& s) {
    try {
        parse_number(s);
        return true;
    } catch (const ConfigError&) {
        return false;
    }
}

} // namespace

CsvTable parse_csv(std::string_view text) {
    CsvTable t;
    bool first = true;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> cells = split_line(line);
        if (first) {
            first = false;
            bool header = false;
            for (const auto& c : cells) header = header || !is_number(c);
            if (header) {
                t.header = std::move(cells);
                continue;
            }
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

std::vector<Data> parse_data_csv(std::string_view text) {
    const CsvTable t = parse_csv(text);
    if (t.rows.empty()) throw ConfigError("data file has no rows");
    std::vector<Data> out;
    out.reserve(t.rows.size());
    const std::size_t width = t.rows[0].size();
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r].size() != width)
            throw ConfigError("data row " + std::to_string(r + 1) + " has " + std::to_string(t.rows[r].size()) +
                              " columns, expected " + std::to_string(width));
        Data d;
        d.reserve(width);
        for (const auto& c : t.rows[r]) d.push_back(parse_number(c));
        out.push_back(std::move(d));
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
        if (ec) throw ConfigError("cannot create directory '" + target.parent_path().string() + "': " + ec.message());
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ConfigError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw ConfigError("cannot move '" + tmp.string() + "' to '" + path + "': " + ec.message());
}

} // namespace deepbf
