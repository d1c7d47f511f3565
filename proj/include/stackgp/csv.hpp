#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stackgp::csv {

/// Header plus rows of a comma-separated file. Fields may be double-quoted;
/// surrounding whitespace is trimmed.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a named column; throws SchemaError if absent.
    std::size_t column(std::string_view name) const;
    bool has_column(std::string_view name) const;
};

Table parse(std::string_view text, const std::string& source = "<memory>");
Table read(const std::filesystem::path& path);

double parse_double(std::string_view field, const std::string& context);
std::string format_double(double v);

/// Quotes a field if it contains a separator, quote or newline.
std::string escape(std::string_view field);

}  // namespace stackgp::csv
