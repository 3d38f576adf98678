#pragma once

#include <stdexcept>
#include <string>

namespace markovopt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MARKOVOPT_DEFINE_ERROR(Name)            \
    class Name : public Error {                 \
    public:                                     \
        using Error::Error;                     \
    }

MARKOVOPT_DEFINE_ERROR(InvalidChain);
MARKOVOPT_DEFINE_ERROR(InvalidDistribution);
MARKOVOPT_DEFINE_ERROR(InvalidProbability);
MARKOVOPT_DEFINE_ERROR(InvalidSize);
MARKOVOPT_DEFINE_ERROR(NonErgodic);
MARKOVOPT_DEFINE_ERROR(NotReversible);
MARKOVOPT_DEFINE_ERROR(CapExceeded);
MARKOVOPT_DEFINE_ERROR(DimensionMismatch);
MARKOVOPT_DEFINE_ERROR(NotPowerOfTwo);
MARKOVOPT_DEFINE_ERROR(InvalidParams);
MARKOVOPT_DEFINE_ERROR(EmptyTrace);
MARKOVOPT_DEFINE_ERROR(BadState);
MARKOVOPT_DEFINE_ERROR(SingularSystem);
MARKOVOPT_DEFINE_ERROR(OddDimension);
MARKOVOPT_DEFINE_ERROR(ConfigError);
MARKOVOPT_DEFINE_ERROR(MalformedCsv);

#undef MARKOVOPT_DEFINE_ERROR

}  // namespace markovopt
