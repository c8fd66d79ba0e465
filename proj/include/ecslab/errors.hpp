#pragma once

#include <stdexcept>
#include <string>

namespace ecslab {

/// Base class of every error raised by the library. `kind()` is a stable
/// identifier that the CLI maps onto exit codes.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(msg), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define ECSLAB_DEFINE_ERROR(Name)                                              \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& msg) : Error(#Name, msg) {}           \
    };

// input / schema
ECSLAB_DEFINE_ERROR(InputError)
ECSLAB_DEFINE_ERROR(SchemaError)
ECSLAB_DEFINE_ERROR(IdentityViolation)
ECSLAB_DEFINE_ERROR(MissingCriticalPressure)

// molecules
ECSLAB_DEFINE_ERROR(ParseError)
ECSLAB_DEFINE_ERROR(ValenceError)
ECSLAB_DEFINE_ERROR(UnsupportedAtom)
ECSLAB_DEFINE_ERROR(DegenerateRepresentation)

// differentiation / models
ECSLAB_DEFINE_ERROR(NonSmoothPrimitive)
ECSLAB_DEFINE_ERROR(NonPositiveShapeFactor)
ECSLAB_DEFINE_ERROR(CovolumeExceeded)

// solvers
ECSLAB_DEFINE_ERROR(SaturationUnavailable)
ECSLAB_DEFINE_ERROR(OnSaturationLine)
ECSLAB_DEFINE_ERROR(NoRootInBracket)
ECSLAB_DEFINE_ERROR(MultipleRootsAmbiguous)
ECSLAB_DEFINE_ERROR(TrivialRootCollapse)
ECSLAB_DEFINE_ERROR(UnidentifiableParameters)
ECSLAB_DEFINE_ERROR(ZeroReferenceValue)
ECSLAB_DEFINE_ERROR(NonFiniteLoss)

#undef ECSLAB_DEFINE_ERROR

/// Raised by iterative procedures that ran out of budget.
class ConvergenceFailure : public Error {
public:
    explicit ConvergenceFailure(const std::string& msg) : Error("ConvergenceFailure", msg) {}
};

/// ConvergenceFailure carrying the best-so-far state.
template <typename Payload>
class ConvergenceFailureWith : public ConvergenceFailure {
public:
    ConvergenceFailureWith(const std::string& msg, Payload best)
        : ConvergenceFailure(msg), best_(std::move(best)) {}
    const Payload& best() const noexcept { return best_; }

private:
    Payload best_;
};

} // namespace ecslab
