#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sembench {

/// Invalid user-supplied configuration (sizes, flags, case/mesh mismatch).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Interpolation nodes that do not define a Lagrange basis.
class DegenerateBasisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvertedElementError : public std::runtime_error {
 public:
  InvertedElementError(std::size_t elem, double det)
      : std::runtime_error("inverted element " + std::to_string(elem) +
                           " (det J = " + std::to_string(det) + ")"),
        elem_(elem) {}
  std::size_t element() const noexcept { return elem_; }

 private:
  std::size_t elem_;
};

/// Non-positive density or internal energy at a node.
class StateError : public std::runtime_error {
 public:
  StateError(std::size_t node, const std::string& what)
      : std::runtime_error("invalid state at node " + std::to_string(node) +
                           ": " + what),
        node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

class NumericalFault : public std::runtime_error {
 public:
  explicit NumericalFault(std::size_t elem)
      : std::runtime_error("non-finite residual in element " +
                           std::to_string(elem)),
        elem_(elem) {}
  std::size_t element() const noexcept { return elem_; }

 private:
  std::size_t elem_;
};

class InstabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sembench
