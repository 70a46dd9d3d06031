#pragma once

#include <string>
#include <string_view>

namespace pairgen {

struct Feedback;

/// Digest of the code with trailing whitespace and blank lines removed.
std::string fingerprint_code(std::string_view code);

/// Digest over the kind and the per-case (index, status, detail) triples,
/// where detail is the normalized output for wrong answers and the error
/// class for runtime errors. Wall times never contribute.
std::string fingerprint_feedback(const Feedback& feedback);

/// Exception class named by the last traceback-style line of `message`
/// ("ValueError: ..." -> "ValueError"); falls back to the last line with
/// hex addresses and numbers masked.
std::string error_class(std::string_view message);

}  // namespace pairgen
