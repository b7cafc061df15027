#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mktsim {

using StakeholderId = std::string;
using AgentId = std::string;
using QueryId = std::string;

enum class ErrorCode {
  CycleDetected,
  UnknownStakeholder,
  NoUserStakeholder,
  UnreachableStakeholder,
  DuplicateId,
  EmptyCandidateSet,
  UnknownAgent,
  DuplicateAgent,
  MissingScore,
  DomainError,
  PoolExhausted,
  ConfigInvalid,
  DigestMismatch,
  DivergenceAt,
  EmptyWindow,
  NotNormalized,
  AllZeroScores,
  MismatchedAgents,
  EmptySample,
  SetMismatch,
  ParseError,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure the library reports carries a stable code; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mktsim
