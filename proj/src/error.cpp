#include "wot/error.hpp"

namespace wot {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NonIntegrable: return "NonIntegrable";
    case Errc::UnsupportedOrder: return "UnsupportedOrder";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ResolutionTooSmall: return "ResolutionTooSmall";
    case Errc::DimensionTooLarge: return "DimensionTooLarge";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::ZeroDensityRegion: return "ZeroDensityRegion";
    case Errc::NotSPD: return "NotSPD";
    case Errc::NotSeparable: return "NotSeparable";
    case Errc::AllZeroMass: return "AllZeroMass";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::UnusableState: return "UnusableState";
    case Errc::InsufficientPoints: return "InsufficientPoints";
    case Errc::GridNotUniform: return "GridNotUniform";
    case Errc::NonInvertibleJacobian: return "NonInvertibleJacobian";
    case Errc::ExtrapolationOutsideMesh: return "ExtrapolationOutsideMesh";
    case Errc::DegenerateCutoff: return "DegenerateCutoff";
    case Errc::StageFailed: return "StageFailed";
    case Errc::ConvexityNotCertified: return "ConvexityNotCertified";
    case Errc::DegenerateVariance: return "DegenerateVariance";
    case Errc::NoApplicableMethod: return "NoApplicableMethod";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::JobFailed: return "JobFailed";
    case Errc::ManifestMissing: return "ManifestMissing";
  }
  return "Unknown";
}

}  // namespace wot
