#pragma once

#include <stdexcept>
#include <string>

namespace gsgraph {

// Base for everything thrown by the library. The CLI maps each concrete
// type to a distinct exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DivergenceError : Error {
    using Error::Error;
};

struct EmptyMaskError : Error {
    using Error::Error;
};
struct NoOverlapError : Error {
    using Error::Error;
};

struct TooFewPointsError : Error {
    using Error::Error;
};
struct DegenerateNeighborhoodError : Error {
    using Error::Error;
};

struct UnknownPredicateAxisError : Error {
    using Error::Error;
};
struct CategoryAbsentError : Error {
    using Error::Error;
};
struct UnmatchedClusterError : Error {
    using Error::Error;
};

struct NoCandidateError : Error {
    using Error::Error;
};
struct EndpointError : Error {
    using Error::Error;
};
struct MalformedResponseError : Error {
    using Error::Error;
};
struct InvalidClusterIdError : Error {
    using Error::Error;
};

struct SpecError : Error {
    using Error::Error;
};

}  // namespace gsgraph
