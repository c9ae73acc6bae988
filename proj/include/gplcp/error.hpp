#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gplcp {

/// Broad failure class; the CLI maps each onto an exit code.
enum class ErrorCategory { usage, input, numerical };

class Error : public std::runtime_error {
 public:
  Error(std::string kind, ErrorCategory category, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)), category_(category) {}

  const std::string& kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_; }

 private:
  std::string kind_;
  ErrorCategory category_;
};

#define GPLCP_DEFINE_ERROR(Name, Category)                          \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& message)                       \
        : Error(#Name, ErrorCategory::Category, message) {}         \
  };

GPLCP_DEFINE_ERROR(ConfigError, input)
GPLCP_DEFINE_ERROR(ParseError, input)
GPLCP_DEFINE_ERROR(SizeMismatch, input)
GPLCP_DEFINE_ERROR(SpecMismatch, input)
GPLCP_DEFINE_ERROR(FactorizationFailure, numerical)
GPLCP_DEFINE_ERROR(NumericalInstability, numerical)
GPLCP_DEFINE_ERROR(DegenerateRange, numerical)

#undef GPLCP_DEFINE_ERROR

/// Model failed validation; carries the full validate_model report.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> report)
      : Error("ValidationError", ErrorCategory::input, join(report)),
        report_(std::move(report)) {}

  const std::vector<std::string>& report() const noexcept { return report_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid model:";
    for (const auto& item : items) out += " " + item + ";";
    return out;
  }
  std::vector<std::string> report_;
};

}  // namespace gplcp
