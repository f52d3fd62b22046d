#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reloc {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

/// Rigid-fit input is unusable (fewer than 3 pairs, or near-collinear).
class DegenerateConfiguration : public Error {
 public:
  explicit DegenerateConfiguration(const std::string& msg) : Error(msg) {}
};

/// Too few correspondences to even attempt model estimation.
class InsufficientData : public Error {
 public:
  explicit InsufficientData(const std::string& msg) : Error(msg) {}
};

/// RANSAC found no model supported by at least the minimal sample size.
class NoConsensus : public Error {
 public:
  explicit NoConsensus(const std::string& msg) : Error(msg) {}
};

/// ICP found no correspondences within range at the initial pose.
class NoOverlap : public Error {
 public:
  explicit NoOverlap(const std::string& msg) : Error(msg) {}
};

/// No 3D point projects into the query image; verification cannot run.
class EmptyOverlap : public Error {
 public:
  explicit EmptyOverlap(const std::string& msg) : Error(msg) {}
};

/// Attempt to insert a record whose id already exists.
class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& msg) : Error(msg) {}
};

/// Retrieval was requested against an empty database.
class EmptyDatabase : public Error {
 public:
  explicit EmptyDatabase(const std::string& msg) : Error(msg) {}
};

/// Graph operation referenced a missing node or duplicated an element.
class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string& msg) : Error(msg) {}
};

/// A file could not be parsed. Carries the byte offset (binary formats)
/// or line number (text formats) of the first offending location.
class FormatError : public Error {
 public:
  FormatError(const std::string& msg, std::size_t offset)
      : Error(msg + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  static FormatError at_line(const std::string& msg, std::size_t line) {
    FormatError e(msg, line);
    e.what_ = msg + " (at line " + std::to_string(line) + ")";
    return e;
  }
  const char* what() const noexcept override {
    return what_.empty() ? Error::what() : what_.c_str();
  }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_ = 0;
  std::string what_;
};

}  // namespace reloc
