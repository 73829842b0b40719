#pragma once

#include <stdexcept>
#include <string>

namespace agla {

/// A caller broke a documented precondition (shape mismatch, parameter out
/// of range). These indicate programming errors rather than bad data.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed user data: unknown tokens, unparseable prompts, bad files.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace agla
