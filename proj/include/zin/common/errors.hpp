#pragma once

#include <stdexcept>
#include <string>

namespace zin {

// base of all library errors
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class StateError : public Error { using Error::Error; };
class CapacityError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class ConstructionError : public Error { using Error::Error; };
class EvaluationError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class IntegrityError : public Error { using Error::Error; };

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  long epoch() const { return epoch_; }

 private:
  long epoch_;
};

}  // namespace zin
