#include "pairgen/error.hpp"

namespace pairgen {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::io_error: return "IoError";
    case Errc::parse_error: return "ParseError";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::non_empty_required: return "NonEmptyRequired";
    case Errc::insufficient_tests: return "InsufficientTests";
    case Errc::invalid_problem: return "InvalidProblem";
    case Errc::empty_input: return "EmptyInput";
    case Errc::backend_unavailable: return "BackendUnavailable";
    case Errc::fixture_miss: return "FixtureMiss";
    case Errc::fixture_parse_error: return "FixtureParseError";
    case Errc::template_error: return "TemplateError";
    case Errc::no_plans_found: return "NoPlansFound";
    case Errc::empty_candidates: return "EmptyCandidates";
    case Errc::selection_unparsable: return "SelectionUnparsable";
    case Errc::invalid_feedback_kind: return "InvalidFeedbackKind";
    case Errc::empty_strategy: return "EmptyStrategy";
    case Errc::no_code_found: return "NoCodeFound";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::missing_embedding: return "MissingEmbedding";
    case Errc::not_in_pool: return "NotInPool";
    case Errc::sandbox_setup_error: return "SandboxSetupError";
    case Errc::config_error: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace pairgen
