#include "pairgen/fingerprint.hpp"

#include <algorithm>
#include <regex>
#include <tuple>
#include <vector>

#include "pairgen/digest.hpp"
#include "pairgen/sandbox.hpp"

namespace pairgen {

std::string fingerprint_code(std::string_view code) {
  std::string canonical;
  std::size_t start = 0;
  while (start <= code.size()) {
    std::size_t nl = code.find('\n', start);
    std::string_view line = code.substr(start, nl == std::string_view::npos ? code.size() - start : nl - start);
    std::size_t end = line.find_last_not_of(" \t\r\f\v");
    if (end != std::string_view::npos) {
      canonical.append(line.substr(0, end + 1));
      canonical.push_back('\n');
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return sha256_hex(canonical);
}

std::string error_class(std::string_view message) {
  std::string text = normalize_output(message);
  auto last_nl = text.rfind('\n');
  std::string last = last_nl == std::string::npos ? text : text.substr(last_nl + 1);
  static const std::regex kClass(R"(^\s*([A-Za-z_][A-Za-z0-9_.]*(Error|Exception|Exit|Interrupt|Warning)|[A-Za-z_][A-Za-z0-9_.]*)\s*(:|$))");
  std::smatch m;
  if (std::regex_search(last, m, kClass) && (m[2].matched || m[3].str() == ":")) return m[1].str();
  static const std::regex kHex("0x[0-9a-fA-F]+");
  static const std::regex kNum("[0-9]+");
  last = std::regex_replace(last, kHex, "0x?");
  return std::regex_replace(last, kNum, "#");
}

std::string fingerprint_feedback(const Feedback& feedback) {
  std::vector<std::tuple<std::size_t, std::string, std::string>> items;
  for (const auto& c : feedback.cases) {
    std::string detail;
    switch (c.status) {
      case CaseStatus::wrong_output: detail = normalize_output(c.actual_output); break;
      case CaseStatus::runtime_error: detail = error_class(c.error_message); break;
      default: break;
    }
    items.emplace_back(c.case_index, std::string(to_string(c.status)), std::move(detail));
  }
  std::sort(items.begin(), items.end());
  std::string canonical(to_string(feedback.kind));
  for (const auto& [idx, status, detail] : items) {
    canonical += '\x1e' + std::to_string(idx) + '\x1f' + status + '\x1f' +
                 std::to_string(detail.size()) + ':' + detail;
  }
  return sha256_hex(canonical);
}

}  // namespace pairgen
