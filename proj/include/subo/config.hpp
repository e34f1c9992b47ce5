#pragma once

// Flat key=value configuration text with dotted keys, e.g.
//
//   # comment
//   task.kind = er
//   train.batch_size = 16
//
// Whitespace around keys and values is trimmed. Keys are unique per file.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace subo {

using KeyValues = std::map<std::string, std::string>;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::filesystem::path& path);
/// Sorted by key, one `key = value` per line.
void write_key_values(std::ostream& out, const KeyValues& kv);

/// `overrides` win on conflicts.
KeyValues merge_key_values(KeyValues base, const KeyValues& overrides);

/// Comma-separated list; empty items are dropped.
std::vector<std::string> split_list(const std::string& text);

// Strict scalar parsing; the key only feeds the error message.
std::uint64_t parse_uint(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
/// Integers separated by commas, with inclusive ranges "a-b".
std::vector<std::uint64_t> parse_uint_list(const std::string& key, const std::string& value);

/// Shortest round-trip decimal text for a double ('.' separator, no locale).
std::string format_double(double v);

}  // namespace subo
