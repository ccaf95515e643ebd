#include "sentisim/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sentisim::io {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& field, long line_number) {
    try {
        std::size_t used = 0;
        const double value = std::stod(field, &used);
        while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used]))) ++used;
        if (used != field.size()) throw std::invalid_argument(field);
        return value;
    } catch (const std::exception&) {
        throw CsvError("line " + std::to_string(line_number) + ": not a number: '" + field + "'");
    }
}

}  // namespace

int Table::column_index(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

std::vector<double> Table::column(const std::string& name) const {
    const int index = column_index(name);
    if (index < 0) throw CsvError("missing column: " + name);
    std::vector<double> values;
    values.reserve(rows.size());
    for (const auto& row : rows) values.push_back(row[index]);
    return values;
}

std::string format_double(double value) {
    char buffer[64];
    if (value == std::floor(value) && std::abs(value) < 1e15) {
        std::snprintf(buffer, sizeof buffer, "%.0f", value);
    } else {
        std::snprintf(buffer, sizeof buffer, "%.17g", value);
    }
    return buffer;
}

void write_csv(const Table& table, std::ostream& out) {
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        out << (i ? "," : "") << table.columns[i];
    }
    out << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "") << format_double(row[i]);
        }
        out << "\n";
    }
}

Table read_csv(std::istream& in) {
    Table table;
    std::string line;
    if (!std::getline(in, line)) throw CsvError("empty CSV: missing header");
    table.columns = split_line(line);
    long line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != table.columns.size()) {
            throw CsvError("line " + std::to_string(line_number) + ": expected " +
                           std::to_string(table.columns.size()) + " fields, got " +
                           std::to_string(fields.size()));
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& field : fields) row.push_back(parse_double(field, line_number));
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_csv_file(const Table& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    write_csv(table, out);
    if (!out.good()) throw std::runtime_error("failed writing: " + path.string());
}

Table read_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open: " + path.string());
    return read_csv(in);
}

void write_path_csv(const market::MarketPath& path, std::ostream& out) {
    out << "t,price,state,psi,sigma\n";
    for (long t = 0; t < path.size(); ++t) {
        out << (t + 1) << "," << format_double(path.price[t]) << ","
            << (t < static_cast<long>(path.state.size()) ? path.state[t] : 0) << ","
            << format_double(t < static_cast<long>(path.psi.size()) ? path.psi[t] : 0.0) << ","
            << format_double(t < static_cast<long>(path.sigma.size()) ? path.sigma[t] : 0.0)
            << "\n";
    }
}

void write_path_csv_file(const market::MarketPath& path, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
    write_path_csv(path, out);
    if (!out.good()) throw std::runtime_error("failed writing: " + file.string());
}

market::MarketPath read_path_csv(std::istream& in) {
    const Table table = read_csv(in);
    const int price_index = table.column_index("price");
    if (price_index < 0) throw CsvError("missing column: price");
    const int state_index = table.column_index("state");
    const int psi_index = table.column_index("psi");
    const int sigma_index = table.column_index("sigma");

    market::MarketPath path;
    path.price.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        path.price.push_back(row[price_index]);
        if (state_index >= 0) path.state.push_back(static_cast<int>(std::lround(row[state_index])));
        if (psi_index >= 0) path.psi.push_back(row[psi_index]);
        if (sigma_index >= 0) path.sigma.push_back(row[sigma_index]);
    }
    if (path.price.empty()) throw CsvError("path CSV has no rows");
    return path;
}

market::MarketPath read_path_csv_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw CsvError("cannot open: " + file.string());
    return read_path_csv(in);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << contents;
    if (!out.good()) throw std::runtime_error("failed writing: " + path.string());
}

}  // namespace sentisim::io
