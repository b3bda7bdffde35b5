#pragma once

#include <stdexcept>
#include <string>

namespace hetplan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside the domain an operation accepts.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A file could not be parsed or carries an unsupported schema.
class FormatError : public Error {
 public:
  using Error::Error;
};

class UnknownObject : public Error {
 public:
  using Error::Error;
};

class PushInfeasible : public Error {
 public:
  using Error::Error;
};

class TargetOccupied : public Error {
 public:
  using Error::Error;
};

class NotGraspable : public Error {
 public:
  using Error::Error;
};

class InvalidTarget : public Error {
 public:
  using Error::Error;
};

/// The task cannot be solved with the available primitives.
class InvalidTask : public Error {
 public:
  using Error::Error;
};

class PlannerExhausted : public Error {
 public:
  using Error::Error;
};

class SceneTooCrowded : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace hetplan
