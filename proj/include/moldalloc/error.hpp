#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace moldalloc {

enum class Errc {
  NotStartingAtOne,
  NotStrictlyIncreasing,
  NotConcave,
  OutOfRange,
  DegenerateSpeedup,
  RegimeInfeasible,
  InfeasibleRate,
  InfeasibleCapacity,
  Overloaded,
  NonfiniteState,
  SscViolation,
  ConfigInvalid,
  StateSpaceTooLarge,
  SingularSystem,
  DegenerateFit,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::NotStartingAtOne:      return "NotStartingAtOne";
    case Errc::NotStrictlyIncreasing: return "NotStrictlyIncreasing";
    case Errc::NotConcave:            return "NotConcave";
    case Errc::OutOfRange:            return "OutOfRange";
    case Errc::DegenerateSpeedup:     return "DegenerateSpeedup";
    case Errc::RegimeInfeasible:      return "RegimeInfeasible";
    case Errc::InfeasibleRate:        return "InfeasibleRate";
    case Errc::InfeasibleCapacity:    return "InfeasibleCapacity";
    case Errc::Overloaded:            return "Overloaded";
    case Errc::NonfiniteState:        return "NonfiniteState";
    case Errc::SscViolation:          return "SscViolation";
    case Errc::ConfigInvalid:         return "ConfigInvalid";
    case Errc::StateSpaceTooLarge:    return "StateSpaceTooLarge";
    case Errc::SingularSystem:        return "SingularSystem";
    case Errc::DegenerateFit:         return "DegenerateFit";
  }
  return "Unknown";
}

// Errors that stem from bad user input (as opposed to runtime failures such
// as a singular linear system or a broken simulator invariant).
constexpr bool is_validation_error(Errc code) noexcept {
  switch (code) {
    case Errc::NonfiniteState:
    case Errc::SscViolation:
    case Errc::SingularSystem:
    case Errc::DegenerateFit:
      return false;
    default:
      return true;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        message_(what),
        index_(index) {}

  Errc code() const noexcept { return code_; }

  // what() without the error-code prefix.
  const std::string& message() const noexcept { return message_; }

  // 1-based position of the offending element, when the error names one.
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  Errc code_;
  std::string message_;
  std::optional<std::size_t> index_;
};

}  // namespace moldalloc
