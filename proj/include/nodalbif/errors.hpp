#pragma once

#include <stdexcept>
#include <string>

namespace nodalbif {

/// Base of every error raised by the library. `kind()` is the stable name
/// used in reports and CLI messages.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define NODALBIF_DEFINE_ERROR(Name)                                         \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& what) : Error(#Name, what) {}      \
    }

// grid_core
NODALBIF_DEFINE_ERROR(AllBelowThreshold);
NODALBIF_DEFINE_ERROR(GridMismatch);
// scalar_field
NODALBIF_DEFINE_ERROR(BlowUp);
NODALBIF_DEFINE_ERROR(BracketingFailed);
// spectral
NODALBIF_DEFINE_ERROR(WeightDegenerate);
NODALBIF_DEFINE_ERROR(InvariantViolated);
// coupled
NODALBIF_DEFINE_ERROR(PoleAtMinusOne);
NODALBIF_DEFINE_ERROR(SingularJacobian);
NODALBIF_DEFINE_ERROR(NoConvergence);
NODALBIF_DEFINE_ERROR(AtBifurcation);
// continuation
NODALBIF_DEFINE_ERROR(SwitchFailed);
NODALBIF_DEFINE_ERROR(SignatureBroken);
NODALBIF_DEFINE_ERROR(CorrectorStalled);
// cli_report
NODALBIF_DEFINE_ERROR(SchemaError);
NODALBIF_DEFINE_ERROR(ConfigError);

#undef NODALBIF_DEFINE_ERROR

}  // namespace nodalbif
