#pragma once

#include <stdexcept>
#include <string>

namespace treecal {

// Argument outside the mathematical domain of an operation.
class domain_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Feature vector or matrix width does not match what a model expects.
class dimension_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Root finder target lies outside the bracketing interval.
class bracket_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Undersampling would keep zero majority-class rows.
class degenerate_sample_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; the message carries the offending line number.
class parse_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace treecal
