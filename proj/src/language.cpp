#include "vnla/language.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace vnla {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  };
  for (char raw : text) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == ',') {
      flush();
      tokens.emplace_back(",");
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return tokens;
}

namespace {

const char* phrase_for(NavAction a) {
  switch (a) {
    case NavAction::left: return "turn left";
    case NavAction::right: return "turn right";
    case NavAction::up: return "look up";
    case NavAction::down: return "look down";
    case NavAction::forward: return "go forward";
    case NavAction::stop: return "stop";
    default: return nullptr;
  }
}

bool aggregates(NavAction a) {
  return a == NavAction::left || a == NavAction::right || a == NavAction::forward;
}

}  // namespace

std::string render_subgoal(const std::vector<NavAction>& actions) {
  if (actions.empty()) throw std::invalid_argument("render_subgoal: empty action sequence");
  std::string out;
  std::size_t i = 0;
  while (i < actions.size()) {
    const NavAction a = actions[i];
    if (a == NavAction::start) throw std::invalid_argument("render_subgoal: start token");
    std::size_t run = 1;
    if (aggregates(a)) {
      while (i + run < actions.size() && actions[i + run] == a) ++run;
    }
    if (!out.empty()) out += ", ";
    if (run == 1) {
      out += phrase_for(a);
    } else if (a == NavAction::forward) {
      out += "go forward " + std::to_string(run) + " steps";
    } else {
      out += "turn " + std::to_string(run * 30) + " degrees " +
             (a == NavAction::left ? "left" : "right");
    }
    i += run;
  }
  return out;
}

namespace {

long parse_count(const std::string& word, const std::string& clause) {
  if (word.empty() || !std::all_of(word.begin(), word.end(), [](unsigned char c) {
        return std::isdigit(c);
      })) {
    throw ParseError("bad count in clause '" + clause + "'");
  }
  return std::stol(word);
}

std::vector<NavAction> parse_clause(const std::string& clause) {
  std::istringstream in(clause);
  std::vector<std::string> w;
  std::string word;
  while (in >> word) w.push_back(word);

  if (w.size() == 1 && w[0] == "stop") return {NavAction::stop};
  if (w.size() == 2 && w[0] == "turn" && w[1] == "left") return {NavAction::left};
  if (w.size() == 2 && w[0] == "turn" && w[1] == "right") return {NavAction::right};
  if (w.size() == 2 && w[0] == "look" && w[1] == "up") return {NavAction::up};
  if (w.size() == 2 && w[0] == "look" && w[1] == "down") return {NavAction::down};
  if (w.size() == 2 && w[0] == "go" && w[1] == "forward") return {NavAction::forward};
  if (w.size() == 4 && w[0] == "turn" && w[2] == "degrees" && (w[3] == "left" || w[3] == "right")) {
    const long degrees = parse_count(w[1], clause);
    if (degrees <= 0 || degrees % 30 != 0) {
      throw ParseError("degrees not a positive multiple of 30 in clause '" + clause + "'");
    }
    return std::vector<NavAction>(static_cast<std::size_t>(degrees / 30),
                                  w[3] == "left" ? NavAction::left : NavAction::right);
  }
  if (w.size() == 4 && w[0] == "go" && w[1] == "forward" && w[3] == "steps") {
    const long steps = parse_count(w[2], clause);
    if (steps <= 0) throw ParseError("zero step count in clause '" + clause + "'");
    return std::vector<NavAction>(static_cast<std::size_t>(steps), NavAction::forward);
  }
  throw ParseError("malformed clause '" + clause + "'");
}

}  // namespace

std::vector<NavAction> parse_subgoal(const std::string& text) {
  std::vector<NavAction> actions;
  std::string clause;
  std::istringstream in(text);
  bool any = false;
  while (std::getline(in, clause, ',')) {
    any = true;
    const auto first = clause.find_first_not_of(' ');
    if (first == std::string::npos) throw ParseError("empty clause in subgoal");
    const auto last = clause.find_last_not_of(' ');
    const auto parsed = parse_clause(clause.substr(first, last - first + 1));
    actions.insert(actions.end(), parsed.begin(), parsed.end());
  }
  if (!any) throw ParseError("empty subgoal text");
  return actions;
}

std::string prepend_subgoal(const std::string& subgoal_text, const std::string& end_goal) {
  return subgoal_text + " " + std::string(kSeparatorToken) + " " + end_goal;
}

std::vector<std::string> subgoal_lexicon(int max_k) {
  std::vector<std::string> lex = {"turn", "left", "right", "look", "up", "down",
                                  "go",   "forward", "stop", "degrees", "steps", ","};
  for (int n = 2; n <= max_k; ++n) {
    lex.push_back(std::to_string(n));            // step counts
    lex.push_back(std::to_string(n * 30));       // degree counts
  }
  return lex;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, int max_k) {
  std::vector<std::string> tokens;
  tokens.emplace_back(kUnknownToken);
  tokens.emplace_back(kSeparatorToken);
  auto seen = [&](const std::string& t) {
    return std::find(tokens.begin(), tokens.end(), t) != tokens.end();
  };
  for (const auto& t : subgoal_lexicon(max_k)) {
    if (!seen(t)) tokens.push_back(t);
  }
  std::vector<std::string> rest;
  for (const auto& text : texts) {
    for (auto& t : tokenize(text)) {
      if (!seen(t) && std::find(rest.begin(), rest.end(), t) == rest.end()) {
        rest.push_back(t);
      }
    }
  }
  std::sort(rest.begin(), rest.end());
  tokens.insert(tokens.end(), rest.begin(), rest.end());
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  return v;
}

int Vocabulary::index(const std::string& token) const {
  const auto it = std::find(tokens_.begin(), tokens_.end(), token);
  return it == tokens_.end() ? 0 : static_cast<int>(it - tokens_.begin());
}

const std::string& Vocabulary::token(int index) const {
  return tokens_.at(static_cast<std::size_t>(index));
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index(t));
  return out;
}

std::vector<int> Vocabulary::encode_text(std::string_view text) const {
  return encode(tokenize(text));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
  for (const auto& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

}  // namespace vnla
