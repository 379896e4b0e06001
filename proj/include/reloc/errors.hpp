#pragma once

#include <stdexcept>
#include <string>

namespace reloc {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric input outside its documented domain (e.g. overlap not in [0,1]).
struct DomainError : Error {
  using Error::Error;
};

// Vector/matrix dimensions inconsistent with the model configuration.
struct ShapeMismatch : Error {
  using Error::Error;
};

// Embedding dimension does not match the index's declared dimension.
struct DimensionMismatch : Error {
  using Error::Error;
};

struct DuplicateId : Error {
  using Error::Error;
};

struct EmptyIndex : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

// Rotation block of a pose file deviates too far from orthonormal.
struct NonOrthonormalRotation : Error {
  using Error::Error;
};

struct UnsupportedFormat : Error {
  using Error::Error;
};

// Raw quaternion output with near-zero norm; cannot be normalized.
struct DegenerateQuaternion : Error {
  using Error::Error;
};

struct UnknownVariant : Error {
  using Error::Error;
};

struct NoValidPixels : Error {
  using Error::Error;
};

struct NonPositiveDepth : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace reloc
