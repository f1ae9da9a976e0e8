#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csrnet {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Carries the 1-based line number of the offending input line.
struct parse_error : std::runtime_error {
  parse_error(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_number(line) {}
  std::size_t line_number;
};

struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct shape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct contract_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct eval_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct load_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace csrnet
