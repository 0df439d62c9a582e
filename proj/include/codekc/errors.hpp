#pragma once

#include <stdexcept>
#include <string>

namespace codekc {

// Bad CLI usage or config contents. CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid data (corpus records, shape mismatches, bad arguments). CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pipeline stage is missing an input artifact. CLI exit code 3.
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Positioned lexer/parser failure. Never yields a partial tree; the corpus
// filter consumes these to reject unparsable submissions.
class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(const std::string& msg, int line, int col)
      : std::runtime_error(msg + " at line " + std::to_string(line) + ", col " + std::to_string(col)),
        line_(line),
        col_(col) {}

  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

}  // namespace codekc
