#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace selrec {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- data ingestion -------------------------------------------------------

struct EmptyFile : Error {
    using Error::Error;
};

struct MissingColumn : Error {
    explicit MissingColumn(const std::string& name)
        : Error("missing column: " + name), column(name) {}
    std::string column;
};

struct NonNumericCell : Error {
    NonNumericCell(std::size_t row, std::size_t col, const std::string& text)
        : Error("non-numeric cell at row " + std::to_string(row) + ", column " +
                std::to_string(col) + ": \"" + text + "\""),
          row(row), col(col) {}
    std::size_t row;
    std::size_t col;
};

struct InvalidBinaryValue : Error {
    InvalidBinaryValue(std::size_t row, const std::string& column, double value)
        : Error("column " + column + " is declared binary but row " +
                std::to_string(row) + " holds " + std::to_string(value) +
                " (want +1 or -1)"),
          row(row), column(column) {}
    std::size_t row;
    std::string column;
};

struct SpecMismatch : Error {
    using Error::Error;
};

struct DegenerateCovariate : Error {
    using Error::Error;
};

// --- density estimation ---------------------------------------------------

struct DegenerateSample : Error {
    using Error::Error;
};

// --- recruitment ----------------------------------------------------------

struct LengthMismatch : Error {
    using Error::Error;
};

struct TooManyStrata : Error {
    using Error::Error;
};

struct InfeasibleCohort : Error {
    using Error::Error;
};

struct InvalidValue : Error {
    using Error::Error;
};

// --- model fitting --------------------------------------------------------

struct DidNotConverge : Error {
    using Error::Error;
};

struct SeparationDetected : Error {
    using Error::Error;
};

struct SingularInformation : Error {
    using Error::Error;
};

struct NoEvents : Error {
    using Error::Error;
};

struct MonotoneLikelihood : Error {
    using Error::Error;
};

struct UnconvergedModel : Error {
    using Error::Error;
};

// --- simulation / configuration -------------------------------------------

struct DimensionMismatch : Error {
    using Error::Error;
};

struct InvalidConfig : Error {
    using Error::Error;
};

struct ExcessiveNonConvergence : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace selrec
