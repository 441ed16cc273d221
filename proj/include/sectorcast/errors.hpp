#pragma once

#include <stdexcept>
#include <string>

namespace sectorcast {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Data ingestion.
struct MissingColumnError : Error { using Error::Error; };
struct MalformedRowError : Error { using Error::Error; };
struct EmptyFileError : Error { using Error::Error; };
struct NonPositivePriceError : Error { using Error::Error; };
struct DegenerateSplitError : Error { using Error::Error; };

// Learners.
struct SingleClassTrainingError : Error { using Error::Error; };
struct InsufficientClassDataError : Error { using Error::Error; };
struct NumericalFailureError : Error { using Error::Error; };
struct DimensionMismatchError : Error { using Error::Error; };
struct InvalidDistributionError : Error { using Error::Error; };
struct KTooLargeError : Error { using Error::Error; };
struct TooFewRecordsError : Error { using Error::Error; };

// Model selection.
struct InvalidKError : Error { using Error::Error; };
struct DegenerateFoldError : Error { using Error::Error; };

// Committee / evaluation.
struct EmptyTrainingError : Error { using Error::Error; };
struct LengthMismatchError : Error { using Error::Error; };
struct EmptyInputError : Error { using Error::Error; };

// Pipeline.
struct ConfigError : Error { using Error::Error; };

inline void require_dimension(std::size_t expected, std::size_t got) {
  if (expected != got)
    throw DimensionMismatchError("dimension mismatch: expected " +
                                 std::to_string(expected) + ", got " +
                                 std::to_string(got));
}

}  // namespace sectorcast
