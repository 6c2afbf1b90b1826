#pragma once

#include <stdexcept>
#include <string>

namespace narx {

enum class ErrorKind {
  kSpecification,     // invalid model spec, unknown system, malformed term
  kInsufficientData,  // data shorter than the model's maximum lag
  kDegenerateOutput,  // zero-energy target
  kInstability,       // divergent simulation or non-finite state
  kBudget,            // exhaustive enumeration or step cap exceeded
  kDomain,            // argument outside the formula's domain
  kConfig,            // experiment configuration rejected
  kSchema,            // file or term reference does not match the schema
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

// Process exit status for the command-line tool.
int exit_code(ErrorKind kind) noexcept;

}  // namespace narx
