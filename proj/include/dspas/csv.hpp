#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace dspas {

/// In-memory table written as RFC-4180 CSV (CRLF line ends, quotes doubled).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Throws ContractViolation if the row width differs from the header.
    void add_row(std::vector<std::string> row);

    /// Index of column `name`; throws ContractViolation if absent.
    std::size_t column(const std::string& name) const;
    double number(std::size_t row, const std::string& name) const;
};

std::string csv_escape(const std::string& field);
void write_csv(std::ostream& out, const CsvTable& table);
void write_csv(const std::string& path, const CsvTable& table);

/// Shortest round-trip decimal form.
std::string format_number(double v);
std::string format_number(std::uint64_t v);

} // namespace dspas
