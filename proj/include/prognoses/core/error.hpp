#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prognoses {

/// Raised for malformed or semantically invalid user input (files, configs,
/// parameters). The CLI maps it to exit code 2; every other exception is a
/// runtime failure (exit code 1).
class InputError : public std::runtime_error {
public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}

  InputError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  /// Same error, prefixed with the file it came from.
  static InputError in_file(const std::string& path, const InputError& e) {
    InputError out(path + ": " + e.what());
    out.line_ = e.line_;
    return out;
  }

  /// 1-based source line, 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_ = 0;
};

}  // namespace prognoses
