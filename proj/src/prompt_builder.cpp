#include "autofl/prompt_builder.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "autofl/prompt_assets.hpp"

namespace autofl {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '$'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '$'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int indent_of(std::string_view s) {
  int n = 0;
  for (char c : s) {
    if (c == ' ') {
      ++n;
    } else if (c == '\t') {
      n += 4;
    } else {
      break;
    }
  }
  return n;
}

// Per-line lexical summary: code with comments removed and literal contents
// blanked, plus nesting depths at the end of the line.
struct LineScan {
  std::string code;
  int brace_before = 0;
  int brace_after = 0;
  int paren_after = 0;
  int indent = 0;
  bool blank = false;
};

std::vector<LineScan> scan_brace(std::span<const SourceLine> lines) {
  std::vector<LineScan> out;
  int braces = 0;
  int parens = 0;
  bool block_comment = false;
  bool text_block = false;
  for (const auto& line : lines) {
    LineScan s;
    s.brace_before = braces;
    s.indent = indent_of(line.text);
    const std::string_view t = line.text;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const char c = t[i];
      if (block_comment) {
        if (c == '*' && i + 1 < t.size() && t[i + 1] == '/') {
          block_comment = false;
          ++i;
        }
        continue;
      }
      if (text_block) {
        if (t.substr(i, 3) == "\"\"\"") {
          text_block = false;
          s.code += "\"\"";
          i += 2;
        }
        continue;
      }
      if (c == '/' && i + 1 < t.size() && t[i + 1] == '/') break;
      if (c == '/' && i + 1 < t.size() && t[i + 1] == '*') {
        block_comment = true;
        ++i;
        continue;
      }
      if (t.substr(i, 3) == "\"\"\"") {
        text_block = true;
        i += 2;
        continue;
      }
      if (c == '"' || c == '\'') {
        std::size_t j = i + 1;
        while (j < t.size() && t[j] != c) j += (t[j] == '\\') ? 2 : 1;
        s.code += c;
        s.code += c;
        i = std::min(j, t.size());
        continue;
      }
      if (c == '{') ++braces;
      if (c == '}') --braces;
      if (c == '(' || c == '[') ++parens;
      if (c == ')' || c == ']') parens = std::max(0, parens - 1);
      s.code += c;
    }
    s.code = std::string(trim(s.code));
    s.blank = s.code.empty();
    s.brace_after = braces;
    s.paren_after = parens;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<LineScan> scan_indent(std::span<const SourceLine> lines) {
  std::vector<LineScan> out;
  int parens = 0;
  std::string triple;
  for (const auto& line : lines) {
    LineScan s;
    s.indent = indent_of(line.text);
    const std::string_view t = line.text;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const char c = t[i];
      if (!triple.empty()) {
        if (t.substr(i, 3) == triple) {
          triple.clear();
          s.code += "''";
          i += 2;
        }
        continue;
      }
      if (c == '#') break;
      if (t.substr(i, 3) == "\"\"\"" || t.substr(i, 3) == "'''") {
        triple = std::string(t.substr(i, 3));
        i += 2;
        continue;
      }
      if (c == '"' || c == '\'') {
        std::size_t j = i + 1;
        while (j < t.size() && t[j] != c) j += (t[j] == '\\') ? 2 : 1;
        s.code += c;
        s.code += c;
        i = std::min(j, t.size());
        continue;
      }
      if (c == '(' || c == '[' || c == '{') ++parens;
      if (c == ')' || c == ']' || c == '}') parens = std::max(0, parens - 1);
      s.code += c;
    }
    s.code = std::string(trim(s.code));
    s.blank = s.code.empty() && triple.empty();
    s.paren_after = parens;
    out.push_back(std::move(s));
  }
  return out;
}

// Half-open line index range.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct Layout {
  Span header;
  std::vector<Span> statements;
  Span footer;
};

bool starts_with_word(std::string_view code, std::string_view word) {
  return code.starts_with(word) && (code.size() == word.size() || !is_ident_char(code[word.size()]));
}

bool continues_brace_statement(std::string_view opening, std::string_view code) {
  if (starts_with_word(code, "while")) return starts_with_word(opening, "do");
  return starts_with_word(code, "else") || starts_with_word(code, "catch") || starts_with_word(code, "finally");
}

bool continues_indent_statement(std::string_view code) {
  return starts_with_word(code, "elif") || starts_with_word(code, "else") || starts_with_word(code, "except") ||
         starts_with_word(code, "finally");
}

Layout layout_brace(const std::vector<LineScan>& scan) {
  const std::size_t n = scan.size();
  Layout layout;
  int level = 0;
  std::size_t body_begin = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (scan[i].brace_before == 0 && scan[i].brace_after >= 1) {
      layout.header = {0, i + 1};
      body_begin = i + 1;
      level = 1;
      break;
    }
  }
  std::size_t footer_begin = n;
  if (level > 0) {
    for (std::size_t i = body_begin; i < n; ++i) {
      if (scan[i].brace_after < level) {
        footer_begin = i;
        break;
      }
    }
  }
  layout.footer = {footer_begin, n};

  std::size_t i = body_begin;
  while (i < footer_begin) {
    const std::size_t start = i;
    if (scan[i].blank) {
      layout.statements.push_back({start, i + 1});
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < footer_begin) {
      const auto& s = scan[j];
      const bool closed = s.brace_after == level && s.paren_after == 0 &&
                          (s.code.ends_with(';') || s.code.ends_with('}'));
      if (closed) {
        std::size_t next = j + 1;
        while (next < footer_begin && scan[next].blank) ++next;
        if (next < footer_begin && s.code.ends_with('}') && continues_brace_statement(scan[start].code, scan[next].code)) {
          j = next;
          continue;
        }
        break;
      }
      ++j;
    }
    const std::size_t end = std::min(j + 1, footer_begin);
    layout.statements.push_back({start, end});
    i = end;
  }
  return layout;
}

Layout layout_indent(const std::vector<LineScan>& scan) {
  const std::size_t n = scan.size();
  Layout layout;
  std::size_t first = 0;
  while (first < n && scan[first].blank) ++first;
  std::size_t body_begin = 0;
  std::size_t def_line = first;
  while (def_line < n && scan[def_line].code.starts_with('@')) ++def_line;
  if (def_line < n && (starts_with_word(scan[def_line].code, "def") || starts_with_word(scan[def_line].code, "async"))) {
    std::size_t j = def_line;
    while (j < n && !(scan[j].paren_after == 0 && scan[j].code.ends_with(':'))) ++j;
    body_begin = std::min(j + 1, n);
    layout.header = {0, body_begin};
  }
  std::size_t probe = body_begin;
  while (probe < n && scan[probe].blank) ++probe;
  const int body_indent = probe < n ? scan[probe].indent : 0;

  std::size_t footer_begin = n;
  for (std::size_t i = body_begin; i < n; ++i) {
    if (!scan[i].blank && scan[i].indent < body_indent) {
      footer_begin = i;
      break;
    }
  }
  layout.footer = {footer_begin, n};

  std::size_t i = body_begin;
  while (i < footer_begin) {
    const std::size_t start = i;
    if (scan[i].blank) {
      layout.statements.push_back({start, i + 1});
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    int parens = scan[i].paren_after;
    bool backslash = scan[i].code.ends_with('\\');
    while (end < footer_begin) {
      if (parens > 0 || backslash) {
        parens = scan[end].paren_after;
        backslash = scan[end].code.ends_with('\\');
        ++end;
        continue;
      }
      std::size_t next = end;
      while (next < footer_begin && scan[next].blank) ++next;
      if (next >= footer_begin) break;
      const bool deeper = scan[next].indent > body_indent;
      const bool clause = scan[next].indent == body_indent && continues_indent_statement(scan[next].code);
      if (!deeper && !clause) break;
      parens = scan[next].paren_after;
      backslash = scan[next].code.ends_with('\\');
      end = next + 1;
    }
    layout.statements.push_back({start, end});
    i = end;
  }
  return layout;
}

bool is_assertion(std::string_view code, SourceStyle style, const AssertionRules& rules) {
  std::size_t i = 0;
  std::string last;
  std::string chain;
  while (i < code.size()) {
    if (!is_ident_start(code[i])) break;
    std::size_t j = i;
    while (j < code.size() && is_ident_char(code[j])) ++j;
    last = std::string(code.substr(i, j - i));
    chain += last;
    while (j < code.size() && code[j] == ' ') ++j;
    if (j < code.size() && code[j] == '.') {
      chain += '.';
      ++j;
      while (j < code.size() && code[j] == ' ') ++j;
      i = j;
      continue;
    }
    i = j;
    break;
  }
  if (last.empty()) return false;
  if (style == SourceStyle::indent && chain == "assert") return true;
  if (i >= code.size() || code[i] != '(') return false;
  for (const auto& name : rules.names) {
    if (last == name) return true;
  }
  for (const auto& prefix : rules.prefixes) {
    if (last.starts_with(prefix)) return true;
  }
  return false;
}

void mark_line(std::string& text, const std::string& marker) {
  if (std::string_view(text).ends_with(marker)) return;
  text += ' ';
  text += marker;
}

}  // namespace

std::string failure_marker(SourceStyle style) {
  return style == SourceStyle::indent ? "# error occurred here" : "// error occurred here";
}

std::vector<SourceLine> minimize_test_snippet(std::span<const SourceLine> test_source, int failure_line,
                                              SourceStyle style, const AssertionRules& rules) {
  const auto scan = style == SourceStyle::indent ? scan_indent(test_source) : scan_brace(test_source);
  const Layout layout = style == SourceStyle::indent ? layout_indent(scan) : layout_brace(scan);
  const std::string marker = failure_marker(style);

  std::optional<std::size_t> fail_idx;
  for (std::size_t i = 0; i < test_source.size(); ++i) {
    if (test_source[i].number == failure_line) fail_idx = i;
  }
  if (!fail_idx) return {test_source.begin(), test_source.end()};

  std::vector<SourceLine> out;
  auto emit = [&](Span span) {
    for (std::size_t i = span.begin; i < span.end; ++i) {
      out.push_back(test_source[i]);
      if (i == *fail_idx) mark_line(out.back().text, marker);
    }
  };

  if (*fail_idx < layout.header.end) {
    emit({0, *fail_idx + 1});
    return out;
  }
  emit(layout.header);
  for (const auto& stmt : layout.statements) {
    if (stmt.begin > *fail_idx) break;
    const bool failing = *fail_idx < stmt.end;
    if (!failing && !scan[stmt.begin].blank && is_assertion(scan[stmt.begin].code, style, rules)) continue;
    emit(stmt);
    if (failing) break;
  }
  emit(layout.footer);
  return out;
}

std::string condensation_marker(std::size_t count) {
  return "... (repeated " + std::to_string(count) + " times) ...";
}

std::vector<StackFrame> minimize_stack_trace(std::span<const StackFrame> frames) {
  std::vector<StackFrame> kept;
  for (const auto& f : frames) {
    if (f.in_target_repo) kept.push_back(f);
  }

  std::vector<StackFrame> out;
  const std::size_t n = kept.size();
  std::size_t i = 0;
  while (i < n) {
    bool condensed = false;
    // Smallest period first so that `AAAA...` condenses to a single frame.
    for (std::size_t period = 1; i + period * (kCondenseThreshold + 1) <= n; ++period) {
      std::size_t count = 1;
      while (i + period * (count + 1) <= n &&
             std::equal(kept.begin() + static_cast<std::ptrdiff_t>(i),
                        kept.begin() + static_cast<std::ptrdiff_t>(i + period),
                        kept.begin() + static_cast<std::ptrdiff_t>(i + period * count))) {
        ++count;
      }
      if (count > static_cast<std::size_t>(kCondenseThreshold)) {
        out.insert(out.end(), kept.begin() + static_cast<std::ptrdiff_t>(i),
                   kept.begin() + static_cast<std::ptrdiff_t>(i + period));
        out.push_back({condensation_marker(count), true});
        i += period * count;
        condensed = true;
        break;
      }
    }
    if (!condensed) out.push_back(kept[i++]);
  }
  return out;
}

std::string render_numbered(std::span<const SourceLine> lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0) out += '\n';
    out += std::to_string(lines[i].number);
    out += " : ";
    out += lines[i].text;
  }
  return out;
}

std::string render_failure(const TestFailure& failure) {
  std::string out = failure.error_message;
  for (const auto& frame : minimize_stack_trace(failure.stack_frames)) {
    if (!out.empty()) out += '\n';
    out += "  ";
    out += frame.text;
  }
  return out;
}

std::string fill_template(std::string_view templ, std::span<const std::pair<std::string_view, std::string>> values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < templ.size()) {
    const auto open = templ.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = templ.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(templ.substr(pos, open - pos));
    const std::string_view key = templ.substr(open + 2, close - open - 2);
    const auto it = std::find_if(values.begin(), values.end(), [&](const auto& kv) { return kv.first == key; });
    if (it != values.end()) {
      out += it->second;
    } else {
      out.append(templ.substr(open, close + 2 - open));
    }
    pos = close + 2;
  }
  out.append(templ.substr(pos));
  return out;
}

std::string build_system_prompt(int n_budget) {
  const std::pair<std::string_view, std::string> values[] = {
      {"n_budget", std::to_string(n_budget)},
      {"example", std::string(assets::root_cause_example())},
  };
  return fill_template(assets::system_prompt(), values);
}

std::string stage2_prompt() { return std::string(assets::stage2()); }

namespace {

std::string failure_section(const TestFailure& failure, const SnapshotOptions& options) {
  const auto snippet = minimize_test_snippet(failure.test_source, failure.failure_line, options.style,
                                             options.assertions);
  const std::pair<std::string_view, std::string> values[] = {
      {"test_name", failure.test_id},
      {"language", options.language},
      {"snippet", render_numbered(snippet)},
      {"failure", render_failure(failure)},
  };
  return fill_template(assets::user_failure(), values);
}

std::string failure_sections(std::span<const TestFailure* const> failures, const SnapshotOptions& options) {
  std::string out;
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += failure_section(*failures[i], options);
  }
  return out;
}

}  // namespace

PromptBundle build_stage1(std::span<const TestFailure* const> failures, int n_budget,
                          const SnapshotOptions& options) {
  PromptBundle bundle;
  bundle.system_text = build_system_prompt(n_budget);
  bundle.user_text = failure_sections(failures, options);
  bundle.user_text += '\n';
  bundle.user_text += assets::user_directive();
  bundle.stage2_text = stage2_prompt();
  return bundle;
}

PromptBundle build_stage1(const TestFailure& failure, int n_budget, const SnapshotOptions& options) {
  const TestFailure* one[] = {&failure};
  return build_stage1(std::span<const TestFailure* const>(one), n_budget, options);
}

PromptBundle build_baseline(std::span<const TestFailure* const> failures, const SnapshotOptions& options) {
  PromptBundle bundle;
  bundle.system_text = std::string(assets::baseline_system());
  bundle.user_text = failure_sections(failures, options);
  bundle.stage2_text = stage2_prompt();
  return bundle;
}

}  // namespace autofl
