#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wot {

enum class Errc {
  InvalidArgument,
  NonIntegrable,
  UnsupportedOrder,
  DimensionMismatch,
  ResolutionTooSmall,
  DimensionTooLarge,
  NotNormalized,
  ZeroDensityRegion,
  NotSPD,
  NotSeparable,
  AllZeroMass,
  NoConvergence,
  UnusableState,
  InsufficientPoints,
  GridNotUniform,
  NonInvertibleJacobian,
  ExtrapolationOutsideMesh,
  DegenerateCutoff,
  StageFailed,
  ConvexityNotCertified,
  DegenerateVariance,
  NoApplicableMethod,
  ConfigInvalid,
  JobFailed,
  ManifestMissing,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace wot
