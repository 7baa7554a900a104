#pragma once

#include <stdexcept>
#include <string>

namespace tvq {

/// Raised for every data, format or contract violation in the library.
/// The CLI maps it to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(what); }

}  // namespace tvq
