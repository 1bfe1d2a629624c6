#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dlcz {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or input: maps to exit status 1 in the CLI.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, std::string constraint)
      : Error(field + ": " + constraint), field_(std::move(field)), constraint_(std::move(constraint)) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& constraint() const noexcept { return constraint_; }

 private:
  std::string field_;
  std::string constraint_;
};

// Malformed delimited-text input.
class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Correlation estimate with a zero denominator.
class UndefinedEstimateError : public Error {
 public:
  UndefinedEstimateError(std::uint64_t n_trials, std::uint64_t n_stokes, std::uint64_t n_antistokes,
                         std::uint64_t n_coinc)
      : Error("undefined correlation estimate (trials=" + std::to_string(n_trials) +
              ", stokes=" + std::to_string(n_stokes) + ", antistokes=" + std::to_string(n_antistokes) +
              ", coincidences=" + std::to_string(n_coinc) + ")"),
        n_trials(n_trials),
        n_stokes(n_stokes),
        n_antistokes(n_antistokes),
        n_coinc(n_coinc) {}

  std::uint64_t n_trials, n_stokes, n_antistokes, n_coinc;
};

class UnsupportedInputError : public Error {
 public:
  using Error::Error;
};

class SingularFitError : public Error {
 public:
  using Error::Error;
};

}  // namespace dlcz
