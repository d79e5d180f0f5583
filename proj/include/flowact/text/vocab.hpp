#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowact/common.hpp"

namespace flowact {

inline const std::vector<std::string>& registered_views() {
  static const std::vector<std::string> v = {"ego", "wrist_left", "wrist_right"};
  return v;
}

inline bool is_punct_token(const std::string& s) {
  return s == "." || s == "," || s == ":";
}

// Closed word-level vocabulary. Special ids sit below ordinary words; the
// word list itself is produced by the grammar (see grammar.hpp) so every
// generated sentence tokenizes without escapes.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBegin = 1;
  static constexpr int kEnd = 2;

  Vocabulary() = default;

  // words: ordinary vocabulary (deduplicated, sorted by the caller or here).
  Vocabulary(std::vector<std::string> words, bool with_state_tokens) {
    push("<|pad|>");
    push("<|begin|>");
    push("<|end|>");
    for (const auto& v : registered_views()) {
      push("<|" + v + "_start|>");
      push("<|" + v + "_end|>");
    }
    if (with_state_tokens) {
      push("<|state|>");
      for (int b = 0; b < 256; ++b) push("<|s" + std::to_string(b) + "|>");
    }
    first_word_ = static_cast<int>(tokens_.size());
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    for (auto& w : words) push(w);
    if (size() > 512) raise(ErrorKind::config_error, "vocabulary exceeds 512 tokens");
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  int first_word_id() const { return first_word_; }

  bool has(const std::string& tok) const { return ids_.count(tok) > 0; }

  int id(const std::string& tok) const {
    auto it = ids_.find(tok);
    if (it == ids_.end())
      raise(ErrorKind::data_error, "out-of-vocabulary word: '" + tok + "'");
    return it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || id >= size())
      raise(ErrorKind::invalid_argument, "token id out of range: " + std::to_string(id));
    return tokens_[id];
  }

  int view_start(const std::string& view) const { return id("<|" + view + "_start|>"); }
  int view_end(const std::string& view) const { return id("<|" + view + "_end|>"); }

  int state_marker() const { return id("<|state|>"); }
  int state_bin(int b) const {
    if (b < 0 || b > 255) raise(ErrorKind::invalid_argument, "state bin out of range");
    return id("<|s" + std::to_string(b) + "|>");
  }

  // One token per line, line number = id.
  std::string to_text() const {
    std::ostringstream os;
    for (const auto& t : tokens_) os << t << "\n";
    return os.str();
  }

  static Vocabulary from_text(const std::string& text) {
    Vocabulary v;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty()) v.push(line);
    }
    for (int i = 0; i < v.size(); ++i)
      if (v.tokens_[i].rfind("<|", 0) != 0) {
        v.first_word_ = i;
        break;
      }
    return v;
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) raise(ErrorKind::io_error, "cannot write " + path);
    f << to_text();
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) raise(ErrorKind::io_error, "cannot read " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return from_text(os.str());
  }

 private:
  void push(const std::string& tok) {
    ids_[tok] = static_cast<int>(tokens_.size());
    tokens_.push_back(tok);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int first_word_ = 0;
};

// Whitespace split; trailing '.', ',' and ':' peel off as their own tokens.
inline std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string w;
  while (is >> w) {
    std::vector<std::string> tail;
    while (!w.empty() && (w.back() == '.' || w.back() == ',' || w.back() == ':')) {
      tail.insert(tail.begin(), std::string(1, w.back()));
      w.pop_back();
    }
    if (!w.empty()) out.push_back(w);
    for (auto& t : tail) out.push_back(t);
  }
  return out;
}

inline std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.push_back(Vocabulary::kBegin);
  for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
  ids.push_back(Vocabulary::kEnd);
  return ids;
}

// Inverse of tokenize up to canonical whitespace: single spaces between
// words, punctuation attached to the preceding word.
inline std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::string out;
  for (int id : ids) {
    if (id == Vocabulary::kBegin || id == Vocabulary::kEnd || id == Vocabulary::kPad) continue;
    const std::string& tok = vocab.token(id);
    if (!out.empty() && !is_punct_token(tok)) out += ' ';
    out += tok;
  }
  return out;
}

inline std::string canonical_text(const std::string& text) {
  std::string out;
  for (const auto& w : split_words(text)) {
    if (!out.empty() && !is_punct_token(w)) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace flowact
