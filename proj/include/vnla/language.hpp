#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vnla/env.hpp"

namespace vnla {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Separator token placed between a subgoal and the end-goal.
inline constexpr std::string_view kSeparatorToken = "<sep>";
inline constexpr std::string_view kUnknownToken = "<unk>";

// Lower-cases, splits on whitespace; commas become their own token.
std::vector<std::string> tokenize(std::string_view text);

// Maps k teacher actions to the closed instruction grammar. Maximal runs of
// repeated left/right become "turn <X*30> degrees left/right", runs of
// forward become "go forward <Z> steps"; up/down/stop are never aggregated.
std::string render_subgoal(const std::vector<NavAction>& actions);

// Exact inverse of render_subgoal. Rejects malformed clauses, degree counts
// that are not positive multiples of 30, and zero step counts.
std::vector<NavAction> parse_subgoal(const std::string& text);

// "<subgoal> <sep> <end goal>"; the original end-goal is always the suffix.
std::string prepend_subgoal(const std::string& subgoal_text, const std::string& end_goal);

// Every token the subgoal grammar can emit for subgoals of up to max_k actions.
std::vector<std::string> subgoal_lexicon(int max_k);

// Bijective token <-> index map with <unk> and <sep> reserved at the head.
class Vocabulary {
 public:
  static Vocabulary build(const std::vector<std::string>& texts, int max_k);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int index(const std::string& token) const;  // unknown tokens map to <unk>
  const std::string& token(int index) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<int> encode_text(std::string_view text) const;

  void save(const std::string& path) const;  // one token per line
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
};

}  // namespace vnla
