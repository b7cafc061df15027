#include "mktsim/types.hpp"

namespace mktsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::UnknownStakeholder: return "UnknownStakeholder";
    case ErrorCode::NoUserStakeholder: return "NoUserStakeholder";
    case ErrorCode::UnreachableStakeholder: return "UnreachableStakeholder";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyCandidateSet: return "EmptyCandidateSet";
    case ErrorCode::UnknownAgent: return "UnknownAgent";
    case ErrorCode::DuplicateAgent: return "DuplicateAgent";
    case ErrorCode::MissingScore: return "MissingScore";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::PoolExhausted: return "PoolExhausted";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::DigestMismatch: return "DigestMismatch";
    case ErrorCode::DivergenceAt: return "DivergenceAt";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::AllZeroScores: return "AllZeroScores";
    case ErrorCode::MismatchedAgents: return "MismatchedAgents";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::SetMismatch: return "SetMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace mktsim
