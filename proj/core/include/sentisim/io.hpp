#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "sentisim/market.hpp"

namespace sentisim::io {

/// Malformed or incomplete tabular input.
struct CsvError : std::runtime_error {
    explicit CsvError(const std::string& what) : std::runtime_error(what) {}
};

/// Numeric table with named columns; the unit of every CSV report.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int column_index(const std::string& name) const;  // -1 when absent
    std::vector<double> column(const std::string& name) const;
};

std::string format_double(double value);  // shortest round-trippable form

void write_csv(const Table& table, std::ostream& out);
Table read_csv(std::istream& in);
void write_csv_file(const Table& table, const std::filesystem::path& path);
Table read_csv_file(const std::filesystem::path& path);

/// Market path serialization: header t,price,state,psi,sigma.
void write_path_csv(const market::MarketPath& path, std::ostream& out);
void write_path_csv_file(const market::MarketPath& path, const std::filesystem::path& file);

/// Reads a path written by write_path_csv or any CSV with a price column;
/// state/psi/sigma are optional and left empty when absent.
market::MarketPath read_path_csv(std::istream& in);
market::MarketPath read_path_csv_file(const std::filesystem::path& file);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace sentisim::io
