#pragma once

#include <stdexcept>
#include <string>

namespace dnadmm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidParameter : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

// Smooth part is not strongly convex (m_f below threshold); raise the ridge.
struct DegenerateCurvature : Error {
  using Error::Error;
};

// The admissible interval for the zeta constant is empty: eps/gamma^2 does
// not exceed (m_f + M_f) / (2 m_f M_f).
struct EmptyZetaInterval : Error {
  using Error::Error;
};

// A non-finite value appeared in an iterate; the run is aborted.
struct NonFinite : Error {
  using Error::Error;
};

struct MaxItersReached : Error {
  using Error::Error;
};

// A point claimed optimal fails its KKT verification; usually the
// centralized solve was not run to sufficient precision.
struct KktViolation : Error {
  using Error::Error;
};

struct ParseError : Error {
  long line_no;
  ParseError(const std::string& what, long line) : Error(what), line_no(line) {}
};

struct MalformedLine : ParseError {
  using ParseError::ParseError;
};

struct MalformedRow : ParseError {
  using ParseError::ParseError;
};

struct IndexOutOfRange : ParseError {
  long index;
  IndexOutOfRange(const std::string& what, long line, long idx)
      : ParseError(what, line), index(idx) {}
};

struct MissingColumn : Error {
  std::string column;
  explicit MissingColumn(const std::string& name)
      : Error("missing column: " + name), column(name) {}
};

// A mailbox slot was overwritten before its payload was consumed.
struct ProtocolViolation : Error {
  using Error::Error;
};

}  // namespace dnadmm
