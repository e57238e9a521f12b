#pragma once

#include <stdexcept>
#include <string>

namespace lagns {

/// Coarse failure class, mapped to CLI exit codes.
enum class ErrorClass {
    Validation = 2,  ///< bad input or configuration
    Smallness = 3,   ///< a smallness hypothesis failed
    Convergence = 4, ///< an iteration did not converge
    Internal = 5,    ///< inconsistent internal state
};

class Error : public std::runtime_error {
  public:
    Error(ErrorClass cls, std::string what) : std::runtime_error(std::move(what)), cls_(cls) {}
    ErrorClass error_class() const { return cls_; }

  private:
    ErrorClass cls_;
};

#define LAGNS_DEFINE_ERROR(Name, Class)                                                 \
    class Name : public Error {                                                         \
      public:                                                                           \
        explicit Name(const std::string& what) : Error(ErrorClass::Class, what) {}      \
    }

LAGNS_DEFINE_ERROR(ValidationError, Validation);
LAGNS_DEFINE_ERROR(NonZeroMean, Validation);
LAGNS_DEFINE_ERROR(ShellOutOfRange, Validation);
LAGNS_DEFINE_ERROR(EmptyTrajectory, Validation);
LAGNS_DEFINE_ERROR(UnsupportedDimension, Validation);
LAGNS_DEFINE_ERROR(IncompatibleData, Validation);
LAGNS_DEFINE_ERROR(ZeroData, Validation);
LAGNS_DEFINE_ERROR(IdenticalInputs, Validation);
LAGNS_DEFINE_ERROR(TooFewSnapshots, Validation);
LAGNS_DEFINE_ERROR(MissingManifest, Validation);
LAGNS_DEFINE_ERROR(DensityContrastTooLarge, Validation);

LAGNS_DEFINE_ERROR(SmallnessViolated, Smallness);
LAGNS_DEFINE_ERROR(Divergent, Smallness);
LAGNS_DEFINE_ERROR(DeterminantNotUnit, Smallness);
LAGNS_DEFINE_ERROR(DisplacementTooLarge, Smallness);

LAGNS_DEFINE_ERROR(InnerNotConverged, Convergence);
LAGNS_DEFINE_ERROR(OuterNotConverged, Convergence);
LAGNS_DEFINE_ERROR(HorizonCollapsed, Convergence);

#undef LAGNS_DEFINE_ERROR

} // namespace lagns
