#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "autofl/signature.hpp"

namespace autofl {

inline constexpr int kSnapshotFormatVersion = 1;

struct SourceLine {
  int number = 0;
  std::string text;

  friend bool operator==(const SourceLine&, const SourceLine&) = default;
};

struct StackFrame {
  std::string text;
  bool in_target_repo = true;

  friend bool operator==(const StackFrame&, const StackFrame&) = default;
};

struct MethodRecord {
  MethodSignature signature;
  std::string class_name;
  int start_line = 1;
  int end_line = 1;
  std::string body;
  std::optional<std::string> doc;
  std::set<std::string> covered_by;

  friend bool operator==(const MethodRecord&, const MethodRecord&) = default;
};

struct TestFailure {
  std::string test_id;
  std::vector<SourceLine> test_source;
  int failure_line = 0;
  std::string error_message;
  std::vector<StackFrame> stack_frames;

  friend bool operator==(const TestFailure&, const TestFailure&) = default;
};

/// How statement boundaries are recovered from test source.
enum class SourceStyle { brace, indent };

struct AssertionRules {
  std::vector<std::string> prefixes{"assert"};
  std::vector<std::string> names{"fail", "verify"};

  friend bool operator==(const AssertionRules&, const AssertionRules&) = default;
};

struct SnapshotOptions {
  std::string language = "java";
  SourceStyle style = SourceStyle::brace;
  bool simple_names = false;
  AssertionRules assertions;

  friend bool operator==(const SnapshotOptions&, const SnapshotOptions&) = default;
};

/// Raw contents of a snapshot file, before indexing.
struct SnapshotParts {
  std::string bug_id;
  SnapshotOptions options;
  std::vector<std::string> classes;
  std::vector<MethodRecord> methods;
  std::vector<TestFailure> failures;
  std::optional<std::vector<MethodSignature>> ground_truth;

  friend bool operator==(const SnapshotParts&, const SnapshotParts&) = default;
};

/// Immutable, indexed view of a buggy repository. Safe for concurrent reads.
class RepoSnapshot {
 public:
  explicit RepoSnapshot(SnapshotParts parts);

  const std::string& bug_id() const { return parts_.bug_id; }
  const SnapshotOptions& options() const { return parts_.options; }
  const std::vector<std::string>& classes() const { return parts_.classes; }
  const std::vector<MethodRecord>& methods() const { return parts_.methods; }
  const std::vector<TestFailure>& failures() const { return parts_.failures; }
  const std::optional<std::vector<MethodSignature>>& ground_truth() const {
    return parts_.ground_truth;
  }
  const SnapshotParts& parts() const { return parts_; }

  bool has_class(std::string_view name) const;
  const MethodRecord* find(const MethodSignature& sig) const;
  const TestFailure* find_failure(std::string_view test_id) const;

  /// Indices into methods(), sorted by start line.
  const std::vector<std::size_t>& methods_of(std::string_view class_name) const;

  /// Deterministic global order: class declaration order, then start line.
  std::size_t source_rank(const MethodRecord& method) const;

  friend bool operator==(const RepoSnapshot& a, const RepoSnapshot& b) { return a.parts_ == b.parts_; }

 private:
  SnapshotParts parts_;
  std::map<MethodSignature, std::size_t> by_signature_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> by_class_;
  std::map<MethodSignature, std::size_t> source_rank_;
};

enum class CheckSeverity { error, warning };

struct CheckResult {
  std::string name;
  CheckSeverity severity = CheckSeverity::error;
  bool passed = true;
  std::string detail;
};

/// Evaluates every snapshot invariant. Ground truth naming unknown methods is a
/// warning (omission bugs), everything else is an error.
std::vector<CheckResult> check_snapshot(const RepoSnapshot& snapshot);

/// Throws FormatError naming the offending field.
RepoSnapshot parse_snapshot(const nlohmann::json& doc);
nlohmann::json snapshot_to_json(const RepoSnapshot& snapshot);

/// parse_snapshot + check_snapshot; throws ValidationError on failed error-class checks.
RepoSnapshot load_snapshot(const std::filesystem::path& path);
void save_snapshot(const RepoSnapshot& snapshot, const std::filesystem::path& path);

/// SHA-256 of the canonical serialized form.
std::string snapshot_digest(const RepoSnapshot& snapshot);

/// Classes containing at least one method covered by `test_id`, sorted.
std::vector<std::string> covered_classes(const RepoSnapshot& snapshot, std::string_view test_id);

/// Methods of `class_name` covered by any failing test, in source-line order.
std::vector<MethodSignature> covered_methods(const RepoSnapshot& snapshot,
                                             std::string_view class_name);

struct Resolution {
  enum class Kind { exact, ambiguous, none };
  Kind kind = Kind::none;
  const MethodRecord* match = nullptr;
  std::vector<std::string> candidates;
};

/// Matching cascade over method signatures: full signature, then class and
/// method name, then method name alone. The first level with a hit decides.
/// Class segments match exactly or as a dotted suffix (`EqualsBuilder` matches
/// `org.apache.EqualsBuilder`).
Resolution resolve_signature(const RepoSnapshot& snapshot, std::string_view query);

/// Resolves a class name exactly, or by unique dotted suffix.
std::optional<std::string> resolve_class(const RepoSnapshot& snapshot, std::string_view query);

}  // namespace autofl
