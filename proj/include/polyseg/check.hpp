#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace polyseg {

[[noreturn]] inline void throw_check_failure(const std::string& msg) {
  throw std::invalid_argument(msg);
}

}  // namespace polyseg

// Argument/shape validation. The message should name the offending
// dimension, tensor, or file so callers can act on it.
#define POLYSEG_CHECK(cond, msg)                  \
  do {                                            \
    if (!(cond)) {                                \
      std::ostringstream oss_;                    \
      oss_ << msg;                                \
      ::polyseg::throw_check_failure(oss_.str()); \
    }                                             \
  } while (0)
