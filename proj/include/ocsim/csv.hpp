#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ocsim {

/// Splits one line of unquoted comma-separated values.
std::vector<std::string> split_csv_line(std::string_view line);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws std::out_of_range when absent.
    std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& file);

/// Writes `content` to `file`, creating parent directories.
void write_text_file(const std::filesystem::path& file, std::string_view content);
std::string read_text_file(const std::filesystem::path& file);

} // namespace ocsim
