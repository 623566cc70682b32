#include "sace/error.hpp"

namespace sace {
namespace {

std::string compose(ErrorKind kind, const std::string& message,
                    const std::string& stage) {
  std::string out;
  if (!stage.empty()) out += "[" + stage + "] ";
  out += std::string(to_string(kind)) + ": " + message;
  return out;
}

}  // namespace

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::Schema: return "SchemaError";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::DegenerateLikelihood: return "DegenerateLikelihood";
    case ErrorKind::UnsupportedStratumArm: return "UnsupportedStratumArm";
    case ErrorKind::EmptyCell: return "EmptyCell";
    case ErrorKind::EmptyArm: return "EmptyArm";
    case ErrorKind::EmptyArmInCell: return "EmptyArmInCell";
    case ErrorKind::TooFewReplicates: return "TooFewReplicates";
    case ErrorKind::TooManyFailures: return "TooManyFailures";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::string stage)
    : std::runtime_error(compose(kind, message, stage)),
      kind_(kind),
      stage_(std::move(stage)),
      detail_(message) {}

Error Error::with_stage(const std::string& stage) const {
  return Error(kind_, detail_, stage);
}

}  // namespace sace
