#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lrcnn {

/// Line-oriented `key = value` text shared by architecture files and training
/// configs. `#` starts a comment; blank lines are ignored; keys may repeat and
/// keep their order.
struct KeyValueEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<KeyValueEntry> parse_key_values(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

/// Whitespace-separated fields of a value.
std::vector<std::string> split_fields(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace lrcnn
