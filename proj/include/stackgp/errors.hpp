#pragma once

#include <stdexcept>
#include <string>

namespace stackgp {

/// Broad failure class; the CLI maps each category to an exit code.
enum class ErrorCategory { Config, Data, Numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

#define STACKGP_DEFINE_ERROR(Name, Category)                                  \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what)                                 \
            : Error(ErrorCategory::Category, std::string(#Name ": ") + what) {} \
    }

// Numerical
STACKGP_DEFINE_ERROR(NotPositiveDefinite, Numerical);
STACKGP_DEFINE_ERROR(DimensionMismatch, Numerical);
STACKGP_DEFINE_ERROR(ZeroVariance, Numerical);

// Data
STACKGP_DEFINE_ERROR(LayoutMismatch, Data);
STACKGP_DEFINE_ERROR(TooFewPoints, Data);
STACKGP_DEFINE_ERROR(EmptyInput, Data);
STACKGP_DEFINE_ERROR(SchemaError, Data);
STACKGP_DEFINE_ERROR(JoinError, Data);
STACKGP_DEFINE_ERROR(UnitError, Data);
STACKGP_DEFINE_ERROR(OverlapError, Data);
STACKGP_DEFINE_ERROR(NegativeTotal, Data);
STACKGP_DEFINE_ERROR(InvalidInterval, Data);
STACKGP_DEFINE_ERROR(EmptySplit, Data);
STACKGP_DEFINE_ERROR(MissingCovariate, Data);
STACKGP_DEFINE_ERROR(NoTrainableTasks, Data);
STACKGP_DEFINE_ERROR(ArtifactMismatch, Data);

// Config
STACKGP_DEFINE_ERROR(ConfigError, Config);

#undef STACKGP_DEFINE_ERROR

}  // namespace stackgp
