#include <gtest/gtest.h>

#include "autofl/tool_server.hpp"
#include "test_support.hpp"

namespace autofl {
namespace {

using testing::data_path;
using testing::sig;

class ToolServerTest : public ::testing::Test {
 protected:
  RepoSnapshot snapshot = load_snapshot(data_path("lang48_snapshot.json"));
  ToolServer server{snapshot, {snapshot.failures()[0].test_id}, "run-1"};
};

TEST_F(ToolServerTest, ExactlyFourSchemas) {
  const auto& fns = debugging_functions();
  ASSERT_EQ(fns.size(), 4u);
  EXPECT_EQ(fns[0].name, kCoveredClassesFn);
  EXPECT_EQ(fns[1].name, kCoveredMethodsFn);
  EXPECT_EQ(fns[2].name, kCodeSnippetFn);
  EXPECT_EQ(fns[3].name, kCommentsFn);
  EXPECT_TRUE(fns[0].parameters.empty());
  EXPECT_EQ(fns[1].parameters.at(0).name, "class_name");
  EXPECT_EQ(fns[2].parameters.at(0).name, "signature");
}

TEST_F(ToolServerTest, CoveredClassesAndMethods) {
  EXPECT_EQ(server.dispatch(kCoveredClassesFn, "{}").response,
            "The failing test covers methods in the following classes:\nEqualsBuilder");
  const auto& e = server.dispatch(kCoveredMethodsFn, R"j({"class_name": "EqualsBuilder"})j");
  EXPECT_EQ(e.outcome, CallOutcome::ok);
  EXPECT_EQ(e.response,
            "Methods of EqualsBuilder covered by the failing tests:\n"
            "EqualsBuilder.append(Object, Object)\nEqualsBuilder.isEquals()");
  EXPECT_EQ(e.mentioned_signatures, (std::vector<MethodSignature>{sig("EqualsBuilder.append(Object, Object)"),
                                                                  sig("EqualsBuilder.isEquals()")}));
}

TEST_F(ToolServerTest, SnippetIsNumberedBody) {
  const auto& e = server.dispatch(kCodeSnippetFn, R"j({"signature": "EqualsBuilder.append(Object, Object)"})j");
  EXPECT_EQ(e.outcome, CallOutcome::ok);
  EXPECT_TRUE(e.response.starts_with("177 :     public EqualsBuilder append(Object lhs, Object rhs) {\n178 : "));
  EXPECT_TRUE(e.response.ends_with("196 :     }"));
}

TEST_F(ToolServerTest, AmbiguousQueryListsCandidates) {
  const auto& e = server.dispatch(kCodeSnippetFn, R"j({"signature": "append"})j");
  EXPECT_EQ(e.outcome, CallOutcome::guidance);
  EXPECT_TRUE(e.response.starts_with(
      "There are multiple matches to that query. Do you mean any of the following:"));
  EXPECT_NE(e.response.find("EqualsBuilder.append(Object, Object)"), std::string::npos);
  EXPECT_NE(e.response.find("HashCodeBuilder.append(Object)"), std::string::npos);
}

TEST_F(ToolServerTest, CommentsAndMissingDocs) {
  EXPECT_TRUE(server.dispatch(kCommentsFn, R"j({"signature": "EqualsBuilder.isEquals()"})j")
                  .response.starts_with("<p>Returns <code>true</code>"));
  EXPECT_EQ(server.dispatch(kCommentsFn, R"j({"signature": "EqualsBuilder.setEquals(boolean)"})j").response,
            "No documentation available for EqualsBuilder.setEquals(boolean).");
}

TEST_F(ToolServerTest, InvalidCallsGetGuidance) {
  const auto& unknown_class = server.dispatch(kCoveredMethodsFn, R"j({"class_name": "Nope"})j");
  EXPECT_EQ(unknown_class.outcome, CallOutcome::guidance);
  EXPECT_NE(unknown_class.response.find("`EqualsBuilder`"), std::string::npos);

  const auto& missing = server.dispatch(kCodeSnippetFn, R"j({"sig": 3})j");
  EXPECT_EQ(missing.outcome, CallOutcome::guidance);
  EXPECT_NE(missing.response.find("`signature`"), std::string::npos);

  const auto& garbage = server.dispatch(kCodeSnippetFn, "not json");
  EXPECT_EQ(garbage.outcome, CallOutcome::guidance);
  EXPECT_FALSE(garbage.response.empty());

  const auto& unknown_sig = server.dispatch(kCodeSnippetFn, R"j({"signature": "EqualsBuilder.compare(int)"})j");
  EXPECT_EQ(unknown_sig.outcome, CallOutcome::guidance);
  EXPECT_NE(unknown_sig.response.find("EqualsBuilder.isEquals()"), std::string::npos);

  const auto& unknown_fn = server.dispatch("run_tests", "{}");
  EXPECT_EQ(unknown_fn.outcome, CallOutcome::error);
  EXPECT_NE(unknown_fn.response.find("get_code_snippet"), std::string::npos);
}

TEST_F(ToolServerTest, OneLogEntryPerDispatchWithIncreasingSteps) {
  const auto before = snapshot;
  server.dispatch(kCoveredClassesFn, "{}");
  server.dispatch(kCodeSnippetFn, R"j({"signature": "append"})j");
  server.dispatch("bogus", "");
  ASSERT_EQ(server.log().size(), 3u);
  for (std::size_t i = 1; i < server.log().size(); ++i) EXPECT_LT(server.log()[i - 1].step, server.log()[i].step);
  for (const auto& e : server.log()) EXPECT_EQ(e.run_id, "run-1");
  EXPECT_EQ(snapshot, before);
}

TEST_F(ToolServerTest, ReplayingTheLogReproducesResponses) {
  server.dispatch(kCoveredClassesFn, "{}");
  server.dispatch(kCoveredMethodsFn, R"j({"class_name": "EqualsBuilder"})j");
  server.dispatch(kCodeSnippetFn, R"j({"signature": "EqualsBuilder.isEquals"})j");
  server.dispatch(kCommentsFn, R"j({"signature": "append"})j");
  ToolServer other(snapshot, {snapshot.failures()[0].test_id}, "run-1");
  for (const auto& e : server.log()) {
    const auto& again = other.dispatch(e.function, e.raw_arguments);
    EXPECT_EQ(again.response, e.response);
    EXPECT_EQ(again.outcome, e.outcome);
    EXPECT_EQ(again.mentioned_signatures, e.mentioned_signatures);
  }
}

TEST_F(ToolServerTest, MentionsComeFromArgumentsAndResponses) {
  const auto& e = server.dispatch(kCodeSnippetFn, R"j({"signature": "EqualsBuilder.append(Object, Object)"})j");
  EXPECT_EQ(e.mentioned_signatures, (std::vector<MethodSignature>{sig("EqualsBuilder.append(Object, Object)"),
                                                                  sig("EqualsBuilder.setEquals(boolean)")}));
  EXPECT_EQ(extract_mentions(snapshot, "calls isEquals() and then reflectionEquals(a, b)"),
            (std::vector<MethodSignature>{sig("EqualsBuilder.isEquals()"),
                                          sig("EqualsBuilder.reflectionEquals(Object, Object)")}));
  // Ambiguous mentions are not counted.
  EXPECT_TRUE(extract_mentions(snapshot, "x.append(y)").empty());
}

TEST_F(ToolServerTest, ResponsesAreTruncatedAtTheByteLimit) {
  ToolServer small(snapshot, {snapshot.failures()[0].test_id}, "run-1", {64});
  const auto& e = small.dispatch(kCodeSnippetFn, R"j({"signature": "EqualsBuilder.append(Object, Object)"})j");
  EXPECT_LE(e.response.size(), 64u);
  EXPECT_TRUE(e.response.ends_with(kTruncationNotice));
}

TEST(Truncation, RespectsUtf8Boundaries) {
  const std::string text = "ab\xC3\xA9\xC3\xA9\xC3\xA9" + std::string(100, 'x');
  const auto cut = truncate_response(text, kTruncationNotice.size() + 3);
  EXPECT_EQ(cut, "ab" + std::string(kTruncationNotice));
  EXPECT_EQ(truncate_response("short", 100), "short");
  EXPECT_EQ(truncate_response(text, 0), text);
}

}  // namespace
}  // namespace autofl
