#pragma once

#include <stdexcept>
#include <string>

namespace pushrel {

// All recoverable failures surface as this type. The message carries the
// offending entity (layer name, parameter name, step index, file path).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(what); }

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(what);
}

}  // namespace pushrel
