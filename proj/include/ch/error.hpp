#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ch {

enum class Errc {
  NonPositiveGamma,
  MobilityNotBoundedBelow,
  PotentialUnboundedBelow,
  LevelTooLarge,
  SpaceNotNested,
  SingularMass,
  NewtonDiverged,
  LinearSolveFailed,
  GridsNotNested,
  NonPositiveError,
  ParseError,
  ValidationError,
  Io,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::NonPositiveGamma: return "NonPositiveGamma";
    case Errc::MobilityNotBoundedBelow: return "MobilityNotBoundedBelow";
    case Errc::PotentialUnboundedBelow: return "PotentialUnboundedBelow";
    case Errc::LevelTooLarge: return "LevelTooLarge";
    case Errc::SpaceNotNested: return "SpaceNotNested";
    case Errc::SingularMass: return "SingularMass";
    case Errc::NewtonDiverged: return "NewtonDiverged";
    case Errc::LinearSolveFailed: return "LinearSolveFailed";
    case Errc::GridsNotNested: return "GridsNotNested";
    case Errc::NonPositiveError: return "NonPositiveError";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Library-wide exception. `code()` identifies the failure class; `key()` is
/// set for configuration errors and names the offending key.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::string key = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        key_(std::move(key)) {}

  Errc code() const noexcept { return code_; }
  const std::string& key() const noexcept { return key_; }

 private:
  Errc code_;
  std::string key_;
};

}  // namespace ch
