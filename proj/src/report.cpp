#include "pspectra/report.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pspectra {

std::string format_double(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, end);
}

namespace {

std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

std::string escape_xml(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

CsvTable::CsvTable(std::string command, std::vector<std::string> columns)
    : command_(std::move(command)), columns_(std::move(columns))
{
}

void CsvTable::add_row(const std::vector<double>& values)
{
    if (values.size() != columns_.size()) throw std::logic_error("CsvTable: row width mismatch");
    rows_.push_back(values);
}

std::string CsvTable::body() const
{
    std::ostringstream out;
    for (std::size_t i = 0; i < columns_.size(); ++i) out << (i ? "," : "") << columns_[i];
    out << '\n';
    for (const auto& row : rows_) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
        out << '\n';
    }
    return out.str();
}

void CsvTable::write(const std::string& path) const
{
    auto out = open_out(path);
    out << "# pspectra " << command_ << " generated " << utc_timestamp() << '\n' << body();
}

void write_json(const std::string& path, const nlohmann::json& doc)
{
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

void write_text(const std::string& path, const std::string& text)
{
    auto out = open_out(path);
    out << text;
}

std::string loglog_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                       const std::vector<Series>& series)
{
    constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
            x0 = std::min(x0, std::log10(s.x[i]));
            x1 = std::max(x1, std::log10(s.x[i]));
            y0 = std::min(y0, std::log10(s.y[i]));
            y1 = std::max(y1, std::log10(s.y[i]));
        }
    }
    if (!(x1 >= x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    auto px = [&](double lx) { return L + (lx - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double ly) { return H - B - (ly - y0) / (y1 - y0) * (H - T - B); };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
        << escape_xml(title) << "</text>\n"
        << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double lx = x0 + k * (x1 - x0) / 4, ly = y0 + k * (y1 - y0) / 4;
        svg << "<text x=\"" << px(lx) << "\" y=\"" << H - B + 16
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << format_double(std::round(std::pow(10.0, lx) * 1e4) / 1e4) << "</text>\n"
            << "<text x=\"" << L - 6 << "\" y=\"" << py(ly) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << format_double(std::round(std::pow(10.0, ly) * 1e4) / 1e4) << "</text>\n";
    }
    svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape_xml(xlabel)
        << " (log)</text>\n"
        << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"13\" transform=\"rotate(-90 16 " << (T + H - B) / 2 << ")\">" << escape_xml(ylabel)
        << " (log)</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = colors[k % 5];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
            svg << px(std::log10(s.x[i])) << ',' << py(std::log10(s.y[i])) << ' ';
        }
        svg << "\"/>\n";
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
            svg << "<circle cx=\"" << px(std::log10(s.x[i])) << "\" cy=\"" << py(std::log10(s.y[i]))
                << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        svg << "<text x=\"" << W - R - 8 << "\" y=\"" << T + 16 + 16 * k
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">"
            << escape_xml(s.name) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace pspectra
