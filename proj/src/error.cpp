#include "recon/error.hpp"

namespace recon {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyDump: return "EmptyDump";
    case ErrorCode::DuplicateFunction: return "DuplicateFunction";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::UnknownFunction: return "UnknownFunction";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::JudgeFormatError: return "JudgeFormatError";
    case ErrorCode::GenFormatError: return "GenFormatError";
    case ErrorCode::ExhaustedAttempts: return "ExhaustedAttempts";
    case ErrorCode::StepRejected: return "StepRejected";
    case ErrorCode::UnknownType: return "UnknownType";
    case ErrorCode::DatasetError: return "DatasetError";
    case ErrorCode::MissingSegment: return "MissingSegment";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace recon
