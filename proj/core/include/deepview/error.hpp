/*
 * Copyright (c) 2026, The DeepView-NLP Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace deepview {

/// Failure category. Maps one-to-one onto CLI exit codes and HTTP statuses.
enum class ErrorKind {
  validation,  // bad input data or configuration
  transport,   // remote classifier unreachable or misbehaving
  io,          // filesystem failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorKind::validation, message) {}
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& message)
      : Error(ErrorKind::transport, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

/// Throws the same error type as `e` with its message prefixed by `context`.
[[noreturn]] inline void throw_with_context(const Error& e, std::string_view context) {
  const std::string message = std::string(context) + ": " + e.what();
  switch (e.kind()) {
    case ErrorKind::validation:
      throw ValidationError(message);
    case ErrorKind::transport:
      throw TransportError(message);
    case ErrorKind::io:
      throw IoError(message);
  }
  throw Error(e.kind(), message);
}

}  // namespace deepview
