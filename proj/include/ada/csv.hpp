#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ada::csv {

// Shortest representation that round-trips exactly.
std::string format_double(double v);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

double parse_double(std::string_view field);
long long parse_int(std::string_view field);

}  // namespace ada::csv
