#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fqgan {

/// File-system failure; the message carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string trim(std::string_view s);

/// Parses a decimal or hexadecimal (0x...p...) double; the whole field must be consumed.
bool parse_double(std::string_view text, double& out);

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);

/// Hexadecimal float text (lossless, locale independent).
std::string format_hex(double v);

/// Writes to `<path>.tmp` then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace fqgan
