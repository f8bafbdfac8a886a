#include "dspas/csv.hpp"

#include <charconv>
#include <fstream>

#include "dspas/error.hpp"

namespace dspas {

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) {
        throw ContractViolation("CSV row has " + std::to_string(row.size()) + " fields, header has " +
                                std::to_string(header.size()));
    }
    rows.push_back(std::move(row));
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return i;
        }
    }
    throw ContractViolation("no CSV column named " + name);
}

double CsvTable::number(std::size_t row, const std::string& name) const {
    return std::stod(rows.at(row).at(column(name)));
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

void write_csv(std::ostream& out, const CsvTable& table) {
    auto line = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i > 0) {
                out << ',';
            }
            out << csv_escape(fields[i]);
        }
        out << "\r\n";
    };
    line(table.header);
    for (const auto& row : table.rows) {
        line(row);
    }
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot open " + path + " for writing");
    }
    write_csv(out, table);
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_number(std::uint64_t v) {
    return std::to_string(v);
}

} // namespace dspas
