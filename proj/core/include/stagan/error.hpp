#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stagan {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& what, std::string path)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Dataset-level failures: missing frames, bad manifests, invalid samples.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, std::vector<std::string> violations = {})
      : Error(what), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// A loss or metric term became non-finite; term() names it.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::string term)
      : Error(what + " (" + term + ")"), term_(std::move(term)) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class ShapeMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class DtypeMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class TruncatedBlobError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class MissingParameterError : public CheckpointError {
 public:
  MissingParameterError(const std::string& what, std::vector<std::string> names)
      : CheckpointError(what), names_(std::move(names)) {}
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
};

}  // namespace stagan
