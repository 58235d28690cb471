#pragma once

#include <stdexcept>
#include <string>

namespace nelson {

// Base class for all library errors; code() is a stable identifier used in CSV error rows.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define NELSON_DEFINE_ERROR(Name)                                               \
    class Name : public Error {                                                 \
    public:                                                                     \
        explicit Name(const std::string& what) : Error(#Name, what) {}          \
    };

NELSON_DEFINE_ERROR(InvalidParams)
NELSON_DEFINE_ERROR(SingularPoint)
NELSON_DEFINE_ERROR(QuadratureFailure)
NELSON_DEFINE_ERROR(BudgetExceeded)
NELSON_DEFINE_ERROR(InvalidGrid)
NELSON_DEFINE_ERROR(RouteForbidden)
NELSON_DEFINE_ERROR(ProposalMismatch)
NELSON_DEFINE_ERROR(NonFiniteWeight)
NELSON_DEFINE_ERROR(NonPositiveEstimate)
NELSON_DEFINE_ERROR(ProfileNotAdmissible)
NELSON_DEFINE_ERROR(PreflightFailed)
NELSON_DEFINE_ERROR(ConfigError)

#undef NELSON_DEFINE_ERROR

}  // namespace nelson
