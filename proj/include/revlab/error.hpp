#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace revlab {

/// Input or configuration rejected before any work starts. Maps to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while fitting a model (bad data for a regime, non-finite gradients). Exit code 3.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while scoring or correlating results. Exit code 4.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using WarningHandler = std::function<void(std::string_view)>;

/// Replaces the process-wide warning sink and returns the previous one.
/// The default handler writes "warning: <msg>" to stderr.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(std::string_view message);

}  // namespace revlab
