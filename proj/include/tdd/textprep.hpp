#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace tdd {

/// Lowercase stemmed word tokens. Tokens are non-empty, made of [a-z] only,
/// and were not stop words before stemming.
using TokenList = std::vector<std::string>;

/// Removes <...> tags and decodes &amp; &lt; &gt; &quot; &#39;, repeating
/// until the text is stable (so the function is idempotent). A '<' without
/// a later '>' is kept literally.
std::string strip_html(std::string_view text);

/// Splits on '.', '!', '?' and newline; fragments are trimmed and empty
/// ones dropped.
std::vector<std::string> split_sentences(std::string_view text);

/// Whitespace-delimited words.
std::vector<std::string_view> split_whitespace(std::string_view text);

/// Number of UTF-8 code points.
std::size_t utf8_length(std::string_view text);

/// The stop-word set compiled from data/stopwords_en.txt.
const std::unordered_set<std::string>& default_stopwords();

/// Parses the stop-word file format: one word per line, '#' comments.
std::unordered_set<std::string> parse_stopwords(std::string_view text);
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

/// Lowercase, drop URLs, split off numbers/punctuation/symbols/hyphens,
/// drop stop words. No stemming. Used for concept words.
std::vector<std::string> tokenize_words(std::string_view text);

/// tokenize_words followed by Porter stemming of every token.
TokenList tokenize_clean(std::string_view text);

/// Porter (1980) stemmer, matching the reference C implementation.
/// `word` must be lowercase ASCII letters.
std::string porter_stem(std::string_view word);

/// Maximal runs of exactly 40 hex digits.
std::size_t count_sha1_hashes(std::string_view text);

}  // namespace tdd
