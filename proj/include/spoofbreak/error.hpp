#pragma once

#include <stdexcept>
#include <string>

namespace spoofbreak {

// Error taxonomy shared by all modules. Each subclass corresponds to one
// failure contract named in the public API docs.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class NotFound : public Error {
public:
  using Error::Error;
};

class DecodeError : public Error {
public:
  using Error::Error;
};

class EmptyAudio : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  ParseError(const std::string& msg, int line) : Error(msg), line_number(line) {}
  explicit ParseError(const std::string& msg) : Error(msg), line_number(-1) {}
  int line_number;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class LoadError : public Error {
public:
  using Error::Error;
};

class DataError : public Error {
public:
  using Error::Error;
};

class BackendError : public Error {
public:
  using Error::Error;
};

class NumericalError : public Error {
public:
  using Error::Error;
};

}  // namespace spoofbreak
