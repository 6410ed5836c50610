#ifndef MSCHEME_CSV_HPP
#define MSCHEME_CSV_HPP

#include <string>
#include <vector>

namespace mscheme {

// Splits one CSV line on ','. No quoting support; the file formats used
// here never contain embedded commas.
std::vector<std::string> split_csv_line(const std::string& line);

struct CsvRow {
  long line_number = 0;
  std::vector<std::string> fields;
};

// Reads a CSV file, skipping blank lines and lines starting with '#'.
// The first surviving line is returned as the header.
struct CsvFile {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

CsvFile read_csv(const std::string& path);

}  // namespace mscheme

#endif
