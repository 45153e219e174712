#pragma once

#include <stdexcept>
#include <string>

namespace compdyn {

// Base for every error the library raises on bad input or failed solves.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input files (OBJ, TetGen, DMAT, JSON).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Arguments that violate a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Linear solve or nonlinear iteration that could not produce a usable result.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace compdyn
