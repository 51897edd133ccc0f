#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "vnla/language.hpp"

using namespace vnla;

TEST_CASE("tokenize lower-cases, splits whitespace, isolates commas") {
  CHECK(tokenize("Find a cup") == std::vector<std::string>{"find", "a", "cup"});
  CHECK(tokenize("turn left, stop") == std::vector<std::string>{"turn", "left", ",", "stop"});
  CHECK(tokenize("  ") == std::vector<std::string>{});
}

TEST_CASE("tokenize is stable under re-join") {
  const std::vector<std::string> texts = {
      "find a cup in one of the bathrooms", "turn 60 degrees left, go forward 2 steps",
      "go forward <sep> find a towel in the kitchen"};
  for (const auto& text : texts) {
    const auto tokens = tokenize(text);
    std::string joined;
    for (const auto& t : tokens) joined += (joined.empty() ? "" : " ") + t;
    CHECK(tokenize(joined) == tokens);
  }
}

TEST_CASE("render_subgoal aggregates runs of left/right and forward") {
  using A = NavAction;
  CHECK(render_subgoal({A::left, A::left, A::forward, A::forward}) ==
        "turn 60 degrees left, go forward 2 steps");
  CHECK(render_subgoal({A::forward}) == "go forward");
  CHECK(render_subgoal({A::up, A::down, A::stop}) == "look up, look down, stop");
  CHECK(render_subgoal({A::up, A::up}) == "look up, look up");
  CHECK(render_subgoal({A::stop, A::stop, A::stop, A::stop}) == "stop, stop, stop, stop");
  CHECK(render_subgoal({A::right, A::right, A::right}) == "turn 90 degrees right");
  CHECK_THROWS_AS(render_subgoal({A::start}), std::invalid_argument);
  CHECK_THROWS_AS(render_subgoal({}), std::invalid_argument);
}

TEST_CASE("render emits one clause per maximal run") {
  using A = NavAction;
  const std::vector<NavAction> actions{A::left, A::left, A::forward, A::right, A::forward,
                                       A::forward, A::stop};
  const std::string text = render_subgoal(actions);
  // runs: [left,left] [forward] [right] [forward,forward] [stop]
  CHECK(std::count(text.begin(), text.end(), ',') == 4);
}

TEST_CASE("parse_subgoal inverts render_subgoal") {
  using A = NavAction;
  CHECK(parse_subgoal("turn 60 degrees left, go forward 2 steps") ==
        std::vector<NavAction>{A::left, A::left, A::forward, A::forward});
  CHECK(parse_subgoal("stop") == std::vector<NavAction>{A::stop});
}

TEST_CASE("parse_subgoal rejects malformed clauses") {
  CHECK_THROWS_AS(parse_subgoal("turn 45 degrees left"), ParseError);
  CHECK_THROWS_AS(parse_subgoal("go forward 0 steps"), ParseError);
  CHECK_THROWS_AS(parse_subgoal("turn around"), ParseError);
  CHECK_THROWS_AS(parse_subgoal(""), ParseError);
  CHECK_THROWS_WITH_AS(parse_subgoal("go forward, wiggle"), doctest::Contains("wiggle"),
                       ParseError);
}

TEST_CASE("round trip over every 4-action sequence") {
  const int k = 4;
  int total = 1;
  for (int i = 0; i < k; ++i) total *= kNavActionCount;
  for (int code = 0; code < total; ++code) {
    std::vector<NavAction> actions;
    int rest = code;
    for (int i = 0; i < k; ++i) {
      actions.push_back(static_cast<NavAction>(rest % kNavActionCount));
      rest /= kNavActionCount;
    }
    CAPTURE(code);
    CHECK(parse_subgoal(render_subgoal(actions)) == actions);
  }
}

TEST_CASE("prepend_subgoal keeps the end-goal as suffix with one separator") {
  const std::string composite = prepend_subgoal("go forward", "find a cup in the kitchen");
  CHECK(composite == "go forward <sep> find a cup in the kitchen");
  const auto tokens = tokenize(composite);
  CHECK(std::count(tokens.begin(), tokens.end(), std::string(kSeparatorToken)) == 1);
  CHECK(tokens.size() == tokenize("go forward").size() + 1 +
                             tokenize("find a cup in the kitchen").size());

  // A second request replaces the prefix instead of stacking.
  const std::string again = prepend_subgoal("stop", "find a cup in the kitchen");
  const auto tokens2 = tokenize(again);
  CHECK(std::count(tokens2.begin(), tokens2.end(), std::string(kSeparatorToken)) == 1);
}

TEST_CASE("vocabulary reserves unknown and separator at the head") {
  const Vocabulary vocab = Vocabulary::build({"find a cup", "find a towel"}, 4);
  CHECK(vocab.token(0) == "<unk>");
  CHECK(vocab.token(1) == "<sep>");
  CHECK(vocab.index("cup") > 1);
  CHECK(vocab.index("no-such-token") == 0);
  CHECK(vocab.index(vocab.token(vocab.size() - 1)) == vocab.size() - 1);
}

TEST_CASE("vocabulary covers the subgoal lexicon and round trips through a file") {
  const Vocabulary vocab = Vocabulary::build({"find a cup"}, 4);
  for (const auto& tok : subgoal_lexicon(4)) CHECK(vocab.index(tok) > 0);
  const auto path = std::filesystem::temp_directory_path() / "vnla_vocab.txt";
  vocab.save(path.string());
  const Vocabulary loaded = Vocabulary::load(path.string());
  CHECK(loaded.tokens() == vocab.tokens());
  std::filesystem::remove(path);
}

TEST_CASE("vocabulary construction is order-independent for the tail") {
  const Vocabulary a = Vocabulary::build({"find a cup", "find a towel"}, 4);
  const Vocabulary b = Vocabulary::build({"find a towel", "find a cup"}, 4);
  CHECK(a.tokens() == b.tokens());
}
