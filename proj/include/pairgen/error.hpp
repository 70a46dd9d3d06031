#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pairgen {

enum class Errc {
  io_error,
  parse_error,
  duplicate_id,
  non_empty_required,
  insufficient_tests,
  invalid_problem,
  empty_input,
  backend_unavailable,
  fixture_miss,
  fixture_parse_error,
  template_error,
  no_plans_found,
  empty_candidates,
  selection_unparsable,
  invalid_feedback_kind,
  empty_strategy,
  no_code_found,
  dimension_mismatch,
  missing_embedding,
  not_in_pool,
  sandbox_setup_error,
  config_error,
};

std::string_view errc_name(Errc code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace pairgen
