#pragma once

#include <stdexcept>
#include <string>

namespace dimension {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or volume dimensions do not agree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (model, sampling, training, experiment).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or corrupted binary file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Misuse of a recorded autodiff tape.
class TapeError : public Error {
 public:
  using Error::Error;
};

/// Training aborted (non-finite loss and similar).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Failure inside a named experiment stage; the stage is part of the message.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace dimension
