#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

namespace mib {

// Shortest decimal representation that round-trips to the same double.
// Used everywhere a float reaches a text file so reruns are byte-identical.
std::string format_double(double value);

// Strict parse of a full token; throws std::invalid_argument on junk.
double parse_double(std::string_view token);
long parse_long(std::string_view token);

// Whitespace-separated tokens (space/tab), empty tokens dropped.
std::vector<std::string_view> split_tokens(std::string_view line);

// Trims ASCII whitespace from both ends.
std::string_view trim(std::string_view s);

}  // namespace mib
