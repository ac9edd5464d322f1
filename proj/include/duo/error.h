#pragma once

#include <stdexcept>
#include <string>

namespace duo {

/// Base of every error the library raises. Callers that only care that a
/// step failed can catch this; the subclasses name the failure.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define DUO_DEFINE_ERROR(Name)                   \
    class Name : public Error {                  \
    public:                                      \
        using Error::Error;                      \
    }

DUO_DEFINE_ERROR(DegenerateRotation);
DUO_DEFINE_ERROR(NotARotation);
DUO_DEFINE_ERROR(ShapeMismatch);
DUO_DEFINE_ERROR(DegenerateStats);
DUO_DEFINE_ERROR(InvalidArgument);
DUO_DEFINE_ERROR(IoError);
DUO_DEFINE_ERROR(FormatVersionMismatch);
DUO_DEFINE_ERROR(InvalidScheduleParams);
DUO_DEFINE_ERROR(InvalidTimestepOrder);
DUO_DEFINE_ERROR(TimestepOutOfRange);
DUO_DEFINE_ERROR(LatticeMismatch);
DUO_DEFINE_ERROR(SingularCovariance);
DUO_DEFINE_ERROR(InsufficientSamples);
DUO_DEFINE_ERROR(CheckpointMismatch);
DUO_DEFINE_ERROR(NonFiniteLoss);
DUO_DEFINE_ERROR(LayoutMismatch);

#undef DUO_DEFINE_ERROR

}  // namespace duo
