#include "sentisim/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sentisim::svg {

namespace {

constexpr int kPaneSize = 220;
constexpr int kMargin = 36;

std::string num(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.2f", v);
    return buffer;
}

std::pair<double, double> value_range(std::span<const double> values) {
    double lo = values.empty() ? 0.0 : values[0];
    double hi = lo;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    return {lo, hi};
}

void save(const std::filesystem::path& file, const std::string& body, int width, int height) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << body << "</svg>\n";
}

}  // namespace

void write_scatter_grid(const std::filesystem::path& file, std::span<const Series> panes,
                        int columns, const std::string& title) {
    const int rows = static_cast<int>((panes.size() + columns - 1) / columns);
    const int width = columns * kPaneSize + 2 * kMargin;
    const int height = rows * kPaneSize + 2 * kMargin + 20;
    std::ostringstream body;
    body << "<text x=\"" << kMargin << "\" y=\"20\">" << title << "</text>\n";
    for (std::size_t p = 0; p < panes.size(); ++p) {
        const auto& pane = panes[p];
        const int px = kMargin + static_cast<int>(p % columns) * kPaneSize;
        const int py = kMargin + 20 + static_cast<int>(p / columns) * kPaneSize;
        const int plot = kPaneSize - 40;
        std::vector<double> all(pane.x.begin(), pane.x.end());
        all.insert(all.end(), pane.y.begin(), pane.y.end());
        const auto [lo, hi] = value_range(all);
        auto sx = [&](double v) { return px + (v - lo) / (hi - lo) * plot; };
        auto sy = [&](double v) { return py + plot - (v - lo) / (hi - lo) * plot; };
        body << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << plot
             << "\" height=\"" << plot << "\" fill=\"none\" stroke=\"#888\"/>\n";
        body << "<line x1=\"" << num(sx(lo)) << "\" y1=\"" << num(sy(lo)) << "\" x2=\""
             << num(sx(hi)) << "\" y2=\"" << num(sy(hi))
             << "\" stroke=\"#bbb\" stroke-dasharray=\"3,3\"/>\n";
        for (std::size_t i = 0; i < pane.x.size(); ++i) {
            body << "<circle cx=\"" << num(sx(pane.x[i])) << "\" cy=\"" << num(sy(pane.y[i]))
                 << "\" r=\"2.2\" fill=\"#2266cc\" fill-opacity=\"0.7\"/>\n";
        }
        body << "<text x=\"" << px << "\" y=\"" << py + plot + 14 << "\">" << pane.label
             << " [" << num(lo) << "," << num(hi) << "]</text>\n";
    }
    save(file, body.str(), width, height);
}

void write_histogram(const std::filesystem::path& file, std::span<const double> values,
                     int bins, const std::string& title) {
    bins = std::max(1, bins);
    const auto [lo, hi] = value_range(values);
    std::vector<long> counts(bins, 0);
    for (double v : values) {
        int b = static_cast<int>((v - lo) / (hi - lo) * bins);
        b = std::clamp(b, 0, bins - 1);
        ++counts[b];
    }
    const long peak = std::max<long>(1, *std::max_element(counts.begin(), counts.end()));
    const int width = 440, height = 280, plot_w = width - 2 * kMargin,
              plot_h = height - 2 * kMargin - 20;
    std::ostringstream body;
    body << "<text x=\"" << kMargin << "\" y=\"20\">" << title << "</text>\n";
    const double bar_w = static_cast<double>(plot_w) / bins;
    for (int b = 0; b < bins; ++b) {
        const double bar_h = static_cast<double>(counts[b]) / peak * plot_h;
        body << "<rect x=\"" << num(kMargin + b * bar_w) << "\" y=\""
             << num(kMargin + 20 + plot_h - bar_h) << "\" width=\"" << num(bar_w - 1)
             << "\" height=\"" << num(bar_h) << "\" fill=\"#2266cc\"/>\n";
    }
    body << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin + 20 + plot_h << "\" x2=\""
         << kMargin + plot_w << "\" y2=\"" << kMargin + 20 + plot_h
         << "\" stroke=\"#444\"/>\n";
    body << "<text x=\"" << kMargin << "\" y=\"" << height - 8 << "\">" << num(lo)
         << "</text>\n";
    body << "<text x=\"" << kMargin + plot_w - 30 << "\" y=\"" << height - 8 << "\">"
         << num(hi) << "</text>\n";
    save(file, body.str(), width, height);
}

void write_line_chart(const std::filesystem::path& file, std::span<const double> values,
                      const std::string& title) {
    const auto [lo, hi] = value_range(values);
    const int width = 720, height = 300, plot_w = width - 2 * kMargin,
              plot_h = height - 2 * kMargin - 20;
    std::ostringstream body;
    body << "<text x=\"" << kMargin << "\" y=\"20\">" << title << "</text>\n";
    body << "<rect x=\"" << kMargin << "\" y=\"" << kMargin + 20 << "\" width=\"" << plot_w
         << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#888\"/>\n";
    body << "<polyline fill=\"none\" stroke=\"#2266cc\" stroke-width=\"1\" points=\"";
    const long n = static_cast<long>(values.size());
    for (long i = 0; i < n; ++i) {
        const double x = kMargin + (n > 1 ? static_cast<double>(i) / (n - 1) : 0.5) * plot_w;
        const double y = kMargin + 20 + plot_h - (values[i] - lo) / (hi - lo) * plot_h;
        body << num(x) << "," << num(y) << " ";
    }
    body << "\"/>\n";
    body << "<text x=\"" << kMargin << "\" y=\"" << height - 8 << "\">min " << num(lo)
         << ", max " << num(hi) << "</text>\n";
    save(file, body.str(), width, height);
}

}  // namespace sentisim::svg
