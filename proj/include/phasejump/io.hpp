#pragma once

// Artifact I/O: atomic file writes, FNV-1a content hashing, CSV emission with
// metadata sidecars, and minimal SVG line plots of tabular data.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "phasejump/errors.hpp"
#include "phasejump/version.hpp"

namespace phasejump::io {

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
    return buf;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// temp file in the target directory, then rename (atomic on POSIX)
inline void atomic_write(const std::filesystem::path& path,
                         std::string_view content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ConfigError("io: cannot open " + tmp.string());
        os.write(content.data(), std::streamsize(content.size()));
        if (!os) throw ConfigError("io: short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

struct Column {
    std::string name;
    std::string unit;
};

// Column-oriented table; every CSV gets a header row and a .meta.json sidecar
// naming units, the generating config hash, and the artifact version.
class Table {
  public:
    explicit Table(std::vector<Column> columns) : columns_(std::move(columns)) {
        if (columns_.empty()) throw ConfigError("Table: needs columns");
        cells_.resize(columns_.size());
    }

    void add_row(std::span<const double> row) {
        if (row.size() != columns_.size())
            throw ConfigError("Table: row width mismatch");
        for (std::size_t i = 0; i < row.size(); ++i)
            cells_[i].push_back(row[i]);
        ++rows_;
    }

    void add_row(std::initializer_list<double> row) {
        add_row(std::span<const double>(row.begin(), row.size()));
    }

    std::size_t rows() const { return rows_; }

    std::string csv() const {
        std::ostringstream os;
        for (std::size_t c = 0; c < columns_.size(); ++c)
            os << columns_[c].name << (c + 1 < columns_.size() ? "," : "\n");
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < columns_.size(); ++c)
                os << format_double(cells_[c][r])
                   << (c + 1 < columns_.size() ? "," : "\n");
        return os.str();
    }

    const std::vector<Column>& columns() const { return columns_; }
    std::span<const double> column(std::size_t i) const { return cells_.at(i); }

  private:
    std::vector<Column> columns_;
    std::vector<std::vector<double>> cells_;
    std::size_t rows_ = 0;
};

// writes name.csv plus name.meta.json; returns the csv content hash
inline std::uint64_t write_table(const std::filesystem::path& dir,
                                 const std::string& name, const Table& table,
                                 const std::string& config_hash) {
    const std::string csv = table.csv();
    atomic_write(dir / (name + ".csv"), csv);
    nlohmann::json meta;
    meta["columns"] = nlohmann::json::array();
    for (const auto& c : table.columns())
        meta["columns"].push_back({{"name", c.name}, {"unit", c.unit}});
    meta["rows"] = table.rows();
    meta["config_hash"] = config_hash;
    meta["version"] = kVersion;
    meta["content_fnv1a64"] = hex64(fnv1a64(csv));
    atomic_write(dir / (name + ".meta.json"), meta.dump(2) + "\n");
    return fnv1a64(csv);
}

// --- minimal SVG line plots --------------------------------------------------

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

namespace detail {

inline void minmax(std::span<const double> v, double& lo, double& hi) {
    for (double d : v) {
        if (!std::isfinite(d)) continue;
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
}

inline std::string ticks_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace detail

// polyline plot of one or more series; enough to eyeball the CSV contents
inline std::string svg_line_plot(std::span<const Series> series,
                                 const std::string& title,
                                 const std::string& xlabel,
                                 const std::string& ylabel, int width = 720,
                                 int height = 480) {
    if (series.empty()) throw ConfigError("svg_line_plot: no series");
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
    double ylo = xlo, yhi = -xlo;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size())
            throw ConfigError("svg_line_plot: x/y length mismatch");
        detail::minmax(s.x, xlo, xhi);
        detail::minmax(s.y, ylo, yhi);
    }
    if (!(xhi > xlo)) xhi = xlo + 1.0;
    if (!(yhi > ylo)) yhi = ylo + 1.0;
    const double ml = 72, mr = 18, mt = 36, mb = 48;
    const double pw = width - ml - mr, ph = height - mt - mb;
    const auto px = [&](double x) { return ml + (x - xlo) / (xhi - xlo) * pw; };
    const auto py = [&](double y) {
        return mt + ph - (y - ylo) / (yhi - ylo) * ph;
    };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
       << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
       << height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"15\">"
       << title << "</text>\n";
    // axes box and ticks
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
       << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = xlo + (xhi - xlo) * i / 4.0;
        const double fy = ylo + (yhi - ylo) * i / 4.0;
        os << "<line x1=\"" << px(fx) << "\" y1=\"" << mt + ph << "\" x2=\""
           << px(fx) << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << px(fx) << "\" y=\"" << mt + ph + 20
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
              "font-size=\"11\">"
           << detail::ticks_label(fx) << "</text>\n";
        os << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(fy) << "\" x2=\""
           << ml << "\" y2=\"" << py(fy) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << ml - 8 << "\" y=\"" << py(fy) + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
              "font-size=\"11\">"
           << detail::ticks_label(fy) << "</text>\n";
    }
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 10
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"13\">"
       << xlabel << "</text>\n";
    os << "<text x=\"18\" y=\"" << mt + ph / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"13\" transform=\"rotate(-90 18 "
       << mt + ph / 2 << ")\">" << ylabel << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& sr = series[s];
        os << "<polyline fill=\"none\" stroke=\"" << palette[s % 6]
           << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < sr.x.size(); ++i) {
            if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) continue;
            os << px(sr.x[i]) << "," << py(sr.y[i]) << " ";
        }
        os << "\"/>\n";
        os << "<text x=\"" << ml + 10 << "\" y=\"" << mt + 16 + 16 * double(s)
           << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
           << palette[s % 6] << "\">" << sr.label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

// convenience: plot selected table columns (x = column xi, y = each yi)
inline void write_svg_plot(const std::filesystem::path& path, const Table& t,
                           std::size_t xi, std::span<const std::size_t> yis,
                           const std::string& title) {
    std::vector<Series> series;
    for (std::size_t yi : yis) {
        Series s;
        s.label = t.columns().at(yi).name;
        const auto xs = t.column(xi);
        const auto ys = t.column(yi);
        s.x.assign(xs.begin(), xs.end());
        s.y.assign(ys.begin(), ys.end());
        series.push_back(std::move(s));
    }
    atomic_write(path, svg_line_plot(series, title, t.columns().at(xi).name,
                                     yis.size() == 1
                                         ? t.columns().at(yis[0]).name
                                         : std::string("value")));
}

}  // namespace phasejump::io
