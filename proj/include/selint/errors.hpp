// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace selint {

// Base class for all fatal selint errors. The CLI maps these to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Syntax or semantic error in a policy source, macro file, or generated text.
// what() carries the full "file:line: message" form.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::string file, std::size_t line)
      : Error(file.empty() ? message
                           : file + ":" + std::to_string(line) + ": " + message),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

// Invalid profile or plugin configuration. Carries the offending file and,
// when known, the key so the host can abort naming both.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, std::string file = {},
              std::string key = {})
      : Error(render(message, file, key)),
        file_(std::move(file)),
        key_(std::move(key)) {}

  const std::string& file() const { return file_; }
  const std::string& key() const { return key_; }

 private:
  static std::string render(const std::string& message, const std::string& file,
                            const std::string& key) {
    std::string out;
    if (!file.empty()) out += file + ": ";
    if (!key.empty()) out += "key '" + key + "': ";
    out += message;
    return out;
  }

  std::string file_;
  std::string key_;
};

}  // namespace selint
