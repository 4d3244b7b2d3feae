#ifndef MARPO_ERRORS_HPP_
#define MARPO_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace marpo {

// Malformed input: wrong dimensions, unnormalized distributions, out-of-range
// hyperparameters.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of a function (e.g. log of x <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// KL(p||q) is infinite because p puts mass where q has none.
class DivergenceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Environment used out of order, e.g. step() after the episode ended.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NonFiniteGradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace marpo

#endif  // MARPO_ERRORS_HPP_
