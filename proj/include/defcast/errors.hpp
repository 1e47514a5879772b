#pragma once

#include <stdexcept>
#include <string>

namespace defcast {

// Point outside a kernel's domain, or a coordinate-count mismatch.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed external input: replay CSV rows, RunLog lines, observation streams.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: kernel/opponent mismatch, bad JSON descriptors.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke an API precondition (e.g. out-of-order round index).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace defcast
