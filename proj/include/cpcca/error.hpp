#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cpcca {

/// Stable error identifiers. The string form returned by code_name() is part
/// of the CLI contract and must not change between versions.
enum class ErrorCode : std::uint8_t {
  NonSquare,
  NegativeEntry,
  RowSumViolation,
  ZeroRow,
  InvalidSpec,
  UnknownFixture,
  ParseError,
  FileNotFound,
  IoError,
  InvalidArgument,
  DimensionMismatch,
  DefectiveOrIllConditioned,
  SplitConjugatePair,
  NonNegligibleImaginaryPart,
  UnpairedComplexColumn,
  RankDeficient,
  ConstantVectorNotInSpan,
  DegenerateSimplex,
  InfeasibleScaling,
  SingularDc,
  SingularProjection,
  NoConvergence,
  EmptyRange,
  AllCandidatesSkipped,
  InsufficientPoints,
  DegenerateDesign,
  NumericalError,
};

constexpr std::string_view code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonSquare: return "NON_SQUARE";
    case ErrorCode::NegativeEntry: return "NEGATIVE_ENTRY";
    case ErrorCode::RowSumViolation: return "ROW_SUM_VIOLATION";
    case ErrorCode::ZeroRow: return "ZERO_ROW";
    case ErrorCode::InvalidSpec: return "INVALID_SPEC";
    case ErrorCode::UnknownFixture: return "UNKNOWN_FIXTURE";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::FileNotFound: return "FILE_NOT_FOUND";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::DefectiveOrIllConditioned: return "DEFECTIVE_OR_ILL_CONDITIONED";
    case ErrorCode::SplitConjugatePair: return "SPLIT_CONJUGATE_PAIR";
    case ErrorCode::NonNegligibleImaginaryPart: return "NON_NEGLIGIBLE_IMAGINARY_PART";
    case ErrorCode::UnpairedComplexColumn: return "UNPAIRED_COMPLEX_COLUMN";
    case ErrorCode::RankDeficient: return "RANK_DEFICIENT";
    case ErrorCode::ConstantVectorNotInSpan: return "CONSTANT_VECTOR_NOT_IN_SPAN";
    case ErrorCode::DegenerateSimplex: return "DEGENERATE_SIMPLEX";
    case ErrorCode::InfeasibleScaling: return "INFEASIBLE_SCALING";
    case ErrorCode::SingularDc: return "SINGULAR_DC";
    case ErrorCode::SingularProjection: return "SINGULAR_PROJECTION";
    case ErrorCode::NoConvergence: return "NO_CONVERGENCE";
    case ErrorCode::EmptyRange: return "EMPTY_RANGE";
    case ErrorCode::AllCandidatesSkipped: return "ALL_CANDIDATES_SKIPPED";
    case ErrorCode::InsufficientPoints: return "INSUFFICIENT_POINTS";
    case ErrorCode::DegenerateDesign: return "DEGENERATE_DESIGN";
    case ErrorCode::NumericalError: return "NUMERICAL_ERROR";
  }
  return "UNKNOWN";
}

/// Library exception. `data()` carries the integer payload of the error where
/// one exists: (row, col) for NegativeEntry, (row) for RowSumViolation and
/// ZeroRow, (line) for ParseError, the suggested cluster counts for
/// SplitConjugatePair, the offending column for RankDeficient.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::vector<long long> data = {})
      : std::runtime_error(std::string(code_name(code)) + ": " + message),
        code_(code),
        data_(std::move(data)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<long long>& data() const noexcept { return data_; }

 private:
  ErrorCode code_;
  std::vector<long long> data_;
};

}  // namespace cpcca
