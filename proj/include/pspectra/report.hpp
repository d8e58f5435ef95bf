#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace pspectra {

/// Shortest round-trip decimal form with at most 17 significant digits.
std::string format_double(double x);

/// CSV with a leading "# pspectra <command> generated <UTC timestamp>" line,
/// then a header row and one row per record.
class CsvTable {
public:
    CsvTable(std::string command, std::vector<std::string> columns);

    void add_row(const std::vector<double>& values);
    std::size_t row_count() const { return rows_.size(); }

    /// Body without the timestamp line (stable across reruns).
    std::string body() const;
    void write(const std::string& path) const;

private:
    std::string command_;
    std::vector<std::string> columns_;
    std::vector<std::vector<double>> rows_;
};

void write_json(const std::string& path, const nlohmann::json& doc);

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

/// Standalone SVG polyline chart with logarithmic axes; non-positive points
/// are skipped.
std::string loglog_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                       const std::vector<Series>& series);
void write_text(const std::string& path, const std::string& text);

} // namespace pspectra
