#ifndef NETLATTICE_FORMAT_HPP
#define NETLATTICE_FORMAT_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace netlattice {

/// 17 significant digits, shortest exponent form; round-trips every double.
std::string format_double(double x);
/// Shortest string that round-trips, for labels and directory names.
std::string format_shortest(double x);

double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);
std::uint64_t parse_uint(std::string_view s);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Comma separated list of doubles ("0.1,0.3, 0.5").
std::vector<double> parse_double_list(std::string_view s);

}  // namespace netlattice

#endif
