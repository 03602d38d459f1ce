#pragma once

#include <stdexcept>
#include <string>

namespace exechecker {

// Base for every domain error raised by the library. The CLI maps these to
// exit code 1 with a one-line diagnostic.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : Error { using Error::Error; };           // malformed input file
struct SchemaError : Error { using Error::Error; };          // file/topology mismatch
struct ValueError : Error { using Error::Error; };           // non-finite or out-of-range value
struct DegenerateError : Error { using Error::Error; };      // scale/norm denominator ~ 0
struct LengthError : Error { using Error::Error; };          // sequence shorter than crop
struct SpecError : Error { using Error::Error; };            // bad synthetic motion spec
struct ShapeError : Error { using Error::Error; };           // tensor shape mismatch
struct GraphError : Error { using Error::Error; };           // backward on non-scalar loss
struct RankError : Error { using Error::Error; };            // singular covariance in CCA
struct InsufficientDataError : Error { using Error::Error; };// too few sequences for triplets
struct AnnotationError : Error { using Error::Error; };      // empty joint annotation
struct IndexError : Error { using Error::Error; };           // block/joint index out of range
struct UnknownExerciseError : Error { using Error::Error; }; // exercise missing from database
struct EmptyError : Error { using Error::Error; };           // no sequences to embed
struct IOError : Error { using Error::Error; };              // filesystem failure

}  // namespace exechecker
