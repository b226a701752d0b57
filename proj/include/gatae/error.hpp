#pragma once

#include <stdexcept>
#include <string>

namespace gatae {

// Dimension disagreement between operands.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A vector whose L2 norm is zero where a direction is required.
class ZeroVectorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file (image, feature file, checkpoint, manifest).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the documented range.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Training diverged or produced non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gatae
