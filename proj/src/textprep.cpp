#include "tdd/textprep.hpp"

#include <fstream>
#include <sstream>

#include "tdd/errors.hpp"

namespace tdd {

namespace detail {
extern const std::string_view kStopwordsText;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_hex(char c) { return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F'); }

std::string remove_tags(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '<') {
      const std::size_t stop = text.find_first_of("<>", i + 1);
      if (stop != std::string_view::npos && text[stop] == '>') {
        i = stop + 1;
        continue;
      }
    }
    out += text[i++];
  }
  return out;
}

std::string decode_entities(std::string_view text) {
  static constexpr std::pair<std::string_view, char> kEntities[] = {
      {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&#39;", '\''}};
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    if (text[i] == '&') {
      for (const auto& [entity, ch] : kEntities) {
        if (text.substr(i, entity.size()) == entity) {
          out += ch;
          i += entity.size();
          matched = true;
          break;
        }
      }
    }
    if (!matched) out += text[i++];
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool is_url(std::string_view token) {
  if (token.find("://") != std::string_view::npos) return true;
  while (!token.empty() && !is_lower(token.front()) && !is_digit(token.front())) token.remove_prefix(1);
  return token.starts_with("www.");
}

}  // namespace

std::string strip_html(std::string_view text) {
  std::string current(text);
  for (;;) {
    std::string next = decode_entities(remove_tags(current));
    if (next == current) return next;
    current = std::move(next);
  }
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '.' || text[i] == '!' || text[i] == '?' || text[i] == '\n') {
      const std::string_view piece = trim(text.substr(start, i - start));
      if (!piece.empty()) out.emplace_back(piece);
      start = i + 1;
    }
  }
  return out;
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::unordered_set<std::string> parse_stopwords(std::string_view text) {
  std::unordered_set<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(start, end - start));
    if (!line.empty() && line.front() != '#') {
      std::string word(line);
      for (char& c : word) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      }
      out.insert(std::move(word));
    }
    start = end + 1;
  }
  return out;
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read stop-word file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_stopwords(buf.str());
}

const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> words = parse_stopwords(detail::kStopwordsText);
  return words;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  const auto& stop = default_stopwords();
  std::string lowered(text);
  for (char& c : lowered) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }

  std::vector<std::string> out;
  for (std::string_view raw : split_whitespace(lowered)) {
    if (is_url(raw)) continue;
    std::size_t i = 0;
    while (i < raw.size()) {
      // Pieces are runs of letters, digits and apostrophes; everything else
      // (punctuation, symbols, hyphens, non-ASCII) separates.
      while (i < raw.size() && !(is_lower(raw[i]) || is_digit(raw[i]) || raw[i] == '\'')) ++i;
      const std::size_t start = i;
      while (i < raw.size() && (is_lower(raw[i]) || is_digit(raw[i]) || raw[i] == '\'')) ++i;
      std::string_view piece = raw.substr(start, i - start);
      while (!piece.empty() && piece.front() == '\'') piece.remove_prefix(1);
      while (!piece.empty() && piece.back() == '\'') piece.remove_suffix(1);
      if (piece.empty()) continue;
      if (stop.contains(std::string(piece))) continue;

      std::string word;
      bool has_digit = false;
      for (char c : piece) {
        if (c == '\'') continue;
        if (is_digit(c)) has_digit = true;
        word += c;
      }
      if (has_digit || word.empty() || stop.contains(word)) continue;
      out.push_back(std::move(word));
    }
  }
  return out;
}

TokenList tokenize_clean(std::string_view text) {
  TokenList tokens = tokenize_words(text);
  for (std::string& t : tokens) t = porter_stem(t);
  return tokens;
}

std::size_t count_sha1_hashes(std::string_view text) {
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_hex(text[i])) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < text.size() && is_hex(text[i])) ++i;
    if (i - start == 40) ++count;
  }
  return count;
}

}  // namespace tdd
