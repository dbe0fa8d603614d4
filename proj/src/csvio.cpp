#include "dimred/csvio.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

namespace dimred {

namespace {

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) return out;
        start = comma + 1;
    }
}

}  // namespace

CsvData read_csv(std::istream& in)
{
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& why) { throw CsvError("csv line " + std::to_string(lineno) + ": " + why); };
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (!trim(line).empty()) {
            header = split(line);
            break;
        }
    }
    if (header.empty()) throw CsvError("csv: no header line");
    if (header.size() < 2) fail("need at least one input column and the output");
    const std::size_t cols = header.size();
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split(line);
        if (cells.size() != cols)
            fail("expected " + std::to_string(cols) + " fields, found " + std::to_string(cells.size()));
        for (const auto& cell : cells) {
            double v = 0.0;
            auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || end != cell.data() + cell.size() || cell.empty()) fail("not a number: '" + cell + "'");
            if (!std::isfinite(v)) fail("non-finite value");
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw CsvError("csv: no data rows");
    CsvData out;
    out.X.resize(static_cast<Index>(rows), static_cast<Index>(cols - 1));
    out.y.resize(static_cast<Index>(rows));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j + 1 < cols; ++j)
            out.X(static_cast<Index>(i), static_cast<Index>(j)) = values[i * cols + j];
        out.y(static_cast<Index>(i)) = values[i * cols + cols - 1];
    }
    out.names.assign(header.begin(), header.end() - 1);
    return out;
}

CsvData read_csv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open " + path);
    return read_csv(in);
}

void write_csv(std::ostream& out, const Matrix& X, const Vector& y)
{
    auto flags = out.flags();
    auto precision = out.precision(17);
    for (Index j = 0; j < X.cols(); ++j) out << 'x' << j + 1 << ',';
    out << "y\n";
    for (Index i = 0; i < X.rows(); ++i) {
        for (Index j = 0; j < X.cols(); ++j) out << X(i, j) << ',';
        out << y(i) << '\n';
    }
    out.precision(precision);
    out.flags(flags);
}

void write_csv_file(const std::string& path, const Matrix& X, const Vector& y)
{
    std::ofstream out(path);
    out.imbue(std::locale::classic());
    write_csv(out, X, y);
    if (!out) throw CsvError("cannot write " + path);
}

}  // namespace dimred
