#pragma once

#include <stdexcept>
#include <string>

namespace confsel {

// Input does not satisfy a data, schema, or argument contract.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A backend or estimator cannot produce a result on otherwise valid input:
// singular designs, separation, optimizer failure, incompatible kinds.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A simulation run exceeded its replication failure budget.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace confsel
