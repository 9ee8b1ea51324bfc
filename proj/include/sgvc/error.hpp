#pragma once

#include <stdexcept>
#include <string>

namespace sgvc {

enum class ErrorKind {
  kConfig,
  kData,
  kNumeric,
  kIo,
  kShape,
  kLabel,
  kSchema,
  kIntegrity,
  kParameter,
  kEmptyInput,
};

/// Base exception for every failure the library reports.
///
/// The kind drives the CLI exit code; the message is meant for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define SGVC_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(Kind, what) {}      \
  };

SGVC_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
SGVC_DEFINE_ERROR(DataError, ErrorKind::kData)
SGVC_DEFINE_ERROR(NumericError, ErrorKind::kNumeric)
SGVC_DEFINE_ERROR(IoError, ErrorKind::kIo)
SGVC_DEFINE_ERROR(ShapeError, ErrorKind::kShape)
SGVC_DEFINE_ERROR(LabelError, ErrorKind::kLabel)
SGVC_DEFINE_ERROR(SchemaError, ErrorKind::kSchema)
SGVC_DEFINE_ERROR(IntegrityError, ErrorKind::kIntegrity)
SGVC_DEFINE_ERROR(ParameterError, ErrorKind::kParameter)
SGVC_DEFINE_ERROR(EmptyInputError, ErrorKind::kEmptyInput)

#undef SGVC_DEFINE_ERROR

const char* to_string(ErrorKind kind) noexcept;

/// Process exit code used by the command-line tool for each error kind.
int exit_code(ErrorKind kind) noexcept;

}  // namespace sgvc
