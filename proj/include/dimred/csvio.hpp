#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "dimred/types.hpp"

namespace dimred {

class CsvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CsvData {
    Matrix X;
    Vector y;
    /// Header names of the input columns.
    std::vector<std::string> names;
};

/// Comma-separated numbers under a header line; the last column is the output.
/// Throws CsvError naming the line of the first problem.
CsvData read_csv(std::istream& in);
CsvData read_csv_file(const std::string& path);

/// Header `x1,...,xd,y`, round-trip precision.
void write_csv(std::ostream& out, const Matrix& X, const Vector& y);
void write_csv_file(const std::string& path, const Matrix& X, const Vector& y);

}  // namespace dimred
