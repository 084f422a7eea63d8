#pragma once

#include <stdexcept>
#include <string>

namespace pops {

// Argument outside the mathematical domain of an operation (bad id, g = 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed user input: non-bijective permutations, bad experiment specs,
// unsupported configurations.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller violated an API contract (e.g. a slot plan with two sends from one
// processor). Always a programming bug.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A routing invariant was observed broken at run time.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The literal five-slot step acknowledged a packet whose final delivery then
// conflicted, so the packet no longer exists anywhere in the network.
class LossDetected : public InvariantViolation {
 public:
  using InvariantViolation::InvariantViolation;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pops
