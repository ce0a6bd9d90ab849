#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace autofl {

/// A method identity rendered as `ClassName.MethodName(ArgType1, ArgType2)`.
struct MethodSignature {
  std::string class_name;
  std::string method_name;
  std::vector<std::string> arg_types;

  std::string to_string() const;

  friend auto operator<=>(const MethodSignature&, const MethodSignature&) = default;
  friend bool operator==(const MethodSignature&, const MethodSignature&) = default;
};

/// Parses `Class.method(A, B)`. Whitespace inside argument types is normalized,
/// commas nested in `<>`, `[]` or `()` do not split arguments. Returns nullopt
/// when the text has no class segment, no parentheses, or an empty argument.
std::optional<MethodSignature> parse_signature(std::string_view text);

/// Collapses whitespace in a type name: runs become one space, and spaces next
/// to punctuation are dropped (`Map< K , V >` -> `Map<K,V>`).
std::string normalize_type_name(std::string_view type);

/// Drops leading package segments (those starting with a lowercase letter)
/// from a dotted class name, keeping nested class segments.
/// `org.apache.Outer.Inner` -> `Outer.Inner`.
std::string strip_package(std::string_view class_name);

/// True when `full` equals `suffix` or ends with `.` + `suffix`.
bool is_dotted_suffix(std::string_view full, std::string_view suffix);

}  // namespace autofl
