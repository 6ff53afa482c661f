#pragma once

#include <string>
#include <vector>

namespace trainplan {

// Shortest round-trip decimal form; deterministic across runs.
std::string format_double(double value);

// One CSV record; handles double-quoted fields with embedded commas.
std::vector<std::string> split_csv_line(const std::string& line);

std::string trim(const std::string& s);

}  // namespace trainplan
