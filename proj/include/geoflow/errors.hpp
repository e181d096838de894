#pragma once

#include <stdexcept>
#include <string>

namespace geoflow {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Geometry
struct AntipodalError : Error {
  AntipodalError() : Error("log map undefined for antipodal points") {}
};

// Argument / domain validation
struct DomainError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct ZeroVectorError : Error {
  ZeroVectorError() : Error("cosine similarity undefined for zero vector") {}
};
struct LengthMismatchError : Error {
  using Error::Error;
};

// Numerics
struct NonFiniteError : Error {
  using Error::Error;
};
struct DegenerateError : Error {
  using Error::Error;
};

// Retrieval / pipeline
struct EmptyRegionError : Error {
  EmptyRegionError() : Error("no gallery record inside the search region") {}
};
struct ConfigError : Error {
  using Error::Error;
};

// Dataset IO
struct ParseError : Error {
  ParseError(const std::string& msg, long line = -1)
      : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_number(line) {}
  long line_number;
};
struct DuplicateIdError : Error {
  explicit DuplicateIdError(const std::string& id)
      : Error("duplicate record id: " + id) {}
};

}  // namespace geoflow
