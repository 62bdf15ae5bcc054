#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bagent {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or inconsistent attack/taxonomy fields.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Schema violation while loading a task, corpus, or rule file.
class LoadError : public Error {
 public:
  LoadError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class BackboneError : public Error {
 public:
  BackboneError(const std::string& message, bool retryable)
      : Error(message), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

// Raised by replay when a log's digest chain or schema does not hold.
// `step` is the first step whose recorded data is inconsistent; footer
// problems use step == kFooter.
class CorruptionError : public Error {
 public:
  static constexpr std::size_t kFooter = static_cast<std::size_t>(-1);

  CorruptionError(std::size_t step, const std::string& message)
      : Error(message), step_(step) {}
  std::size_t step() const { return step_; }
  bool at_footer() const { return step_ == kFooter; }

 private:
  std::size_t step_;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace bagent
