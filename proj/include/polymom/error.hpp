#ifndef POLYMOM_ERROR_HPP
#define POLYMOM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace polymom {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  MissingMoment,
  DegreeOverflow,
  SingularBlock,
  RankDeficient,
  Underdetermined,
  Inconsistent,
  SolverFailed,
  ExtractionFailed,
  Input,
  Schema,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace polymom

#endif  // POLYMOM_ERROR_HPP
