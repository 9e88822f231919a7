#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace coverassert {

// Base for every error the pipeline raises. Modules derive narrow types so
// callers can react to specific conditions (retry, fall back, exit code).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  EmptyInput() : Error("no RTL sources supplied") {}
};

class UnparsableSource : public Error {
 public:
  UnparsableSource(std::string file_id, std::size_t offset, const std::string& what)
      : Error(file_id + ":" + std::to_string(offset) + ": " + what),
        file_id_(std::move(file_id)),
        offset_(offset) {}

  const std::string& file_id() const noexcept { return file_id_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string file_id_;
  std::size_t offset_;
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(const std::string& id) : Error("duplicate id: " + id), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class ProviderUnavailable : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class MalformedProviderReply : public Error {
 public:
  using Error::Error;
};

// Structural problem in an input document; `pointer` is a JSON pointer.
class SchemaViolation : public Error {
 public:
  SchemaViolation(std::string pointer, const std::string& what)
      : Error((pointer.empty() ? std::string("/") : pointer) + ": " + what),
        pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

class SingleCluster : public Error {
 public:
  SingleCluster() : Error("silhouette is undefined for fewer than two clusters") {}
};

class GeneratorFailure : public Error {
 public:
  GeneratorFailure(int iteration, const std::string& what)
      : Error("generator failed at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

class AdapterNotFound : public Error {
 public:
  using Error::Error;
};

class MissingArtifacts : public Error {
 public:
  using Error::Error;
};

}  // namespace coverassert
