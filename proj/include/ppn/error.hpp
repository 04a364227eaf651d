#pragma once

#include <stdexcept>
#include <string>

namespace ppn {

// Every error carries a short machine-readable kind tag; the CLI prints
// "error: <kind>: <message>" on a single line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define PPN_DEFINE_ERROR(Name, tag)                                      \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& message) : Error(tag, message) {}   \
  };

PPN_DEFINE_ERROR(ConfigError, "config")
PPN_DEFINE_ERROR(SplitError, "split")
PPN_DEFINE_ERROR(ParseError, "parse")
PPN_DEFINE_ERROR(ValidationError, "validation")
PPN_DEFINE_ERROR(SchemaError, "schema")
PPN_DEFINE_ERROR(InputError, "input")
PPN_DEFINE_ERROR(TruncationError, "truncation")
PPN_DEFINE_ERROR(CoverageError, "coverage")
PPN_DEFINE_ERROR(NumericError, "numeric")
PPN_DEFINE_ERROR(CheckpointError, "checkpoint")
PPN_DEFINE_ERROR(EvaluationError, "evaluation")
PPN_DEFINE_ERROR(BenchmarkError, "benchmark")
PPN_DEFINE_ERROR(UsageError, "usage")
PPN_DEFINE_ERROR(IoError, "io")

#undef PPN_DEFINE_ERROR

}  // namespace ppn
