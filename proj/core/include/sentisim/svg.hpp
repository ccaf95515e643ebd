#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sentisim::svg {

/// Minimal hand-rolled SVG charts; CSV remains the interface of record.

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Grid of scatter panes (one per series), each with a y=x guide line.
void write_scatter_grid(const std::filesystem::path& file, std::span<const Series> panes,
                        int columns, const std::string& title);

void write_histogram(const std::filesystem::path& file, std::span<const double> values,
                     int bins, const std::string& title);

void write_line_chart(const std::filesystem::path& file, std::span<const double> values,
                      const std::string& title);

}  // namespace sentisim::svg
