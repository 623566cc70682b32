#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sace {

enum class ErrorKind {
  InvalidInput,
  Schema,
  NonConvergence,
  SingularJacobian,
  DegenerateLikelihood,
  UnsupportedStratumArm,
  EmptyCell,
  EmptyArm,
  EmptyArmInCell,
  TooFewReplicates,
  TooManyFailures,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library. `stage` names the pipeline step
// ("strata", "missingness", ...) once a caller has attached it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string stage = {});

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

  Error with_stage(const std::string& stage) const;

 private:
  ErrorKind kind_;
  std::string stage_;
  std::string detail_;
};

}  // namespace sace
