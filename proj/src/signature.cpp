#include "autofl/signature.hpp"

#include <cctype>

namespace autofl {

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '$';
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool has_space(std::string_view s) {
  for (char c : s) {
    if (is_space(c)) return true;
  }
  return false;
}

}  // namespace

std::string MethodSignature::to_string() const {
  std::string out = class_name;
  out += '.';
  out += method_name;
  out += '(';
  for (std::size_t i = 0; i < arg_types.size(); ++i) {
    if (i > 0) out += ", ";
    out += arg_types[i];
  }
  out += ')';
  return out;
}

std::string normalize_type_name(std::string_view type) {
  std::string collapsed;
  bool pending_space = false;
  for (char c : trim(type)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !collapsed.empty() && is_word_char(collapsed.back()) && is_word_char(c)) {
      collapsed += ' ';
    }
    pending_space = false;
    collapsed += c;
  }
  return collapsed;
}

std::optional<MethodSignature> parse_signature(std::string_view text) {
  text = trim(text);
  const auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') return std::nullopt;

  const std::string_view head = trim(text.substr(0, open));
  const auto dot = head.rfind('.');
  if (dot == std::string_view::npos) return std::nullopt;

  MethodSignature sig;
  sig.class_name = std::string(trim(head.substr(0, dot)));
  sig.method_name = std::string(trim(head.substr(dot + 1)));
  if (sig.class_name.empty() || sig.method_name.empty()) return std::nullopt;
  if (has_space(sig.class_name) || has_space(sig.method_name)) return std::nullopt;
  if (sig.class_name.front() == '.' || sig.class_name.back() == '.') return std::nullopt;

  const std::string_view args = text.substr(open + 1, text.size() - open - 2);
  if (trim(args).empty()) return sig;

  int depth = 0;
  std::size_t start = 0;
  auto push_arg = [&](std::size_t end) {
    std::string arg = normalize_type_name(args.substr(start, end - start));
    if (arg.empty()) return false;
    sig.arg_types.push_back(std::move(arg));
    return true;
  };
  for (std::size_t i = 0; i < args.size(); ++i) {
    const char c = args[i];
    if (c == '<' || c == '[' || c == '(') {
      ++depth;
    } else if (c == '>' || c == ']' || c == ')') {
      if (--depth < 0) return std::nullopt;
    } else if (c == ',' && depth == 0) {
      if (!push_arg(i)) return std::nullopt;
      start = i + 1;
    }
  }
  if (depth != 0 || !push_arg(args.size())) return std::nullopt;
  return sig;
}

std::string strip_package(std::string_view class_name) {
  std::size_t pos = 0;
  while (pos < class_name.size()) {
    const auto dot = class_name.find('.', pos);
    if (dot == std::string_view::npos) break;
    if (std::isupper(static_cast<unsigned char>(class_name[pos])) != 0) break;
    pos = dot + 1;
  }
  return std::string(class_name.substr(pos));
}

bool is_dotted_suffix(std::string_view full, std::string_view suffix) {
  if (suffix.empty() || suffix.size() > full.size()) return false;
  if (full == suffix) return true;
  return full.ends_with(suffix) && full[full.size() - suffix.size() - 1] == '.';
}

}  // namespace autofl
