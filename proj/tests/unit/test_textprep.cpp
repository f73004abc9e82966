#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include "tdd/rng.hpp"
#include "tdd/textprep.hpp"

using namespace tdd;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

}  // namespace

TEST_CASE("porter stemmer reproduces the reference vocabulary fixture") {
  const auto voc = read_lines(std::string(TDD_TEST_DATA) + "/porter_voc.txt");
  const auto expected = read_lines(std::string(TDD_TEST_DATA) + "/porter_output.txt");
  REQUIRE(voc.size() == expected.size());
  REQUIRE(voc.size() > 20000);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < voc.size(); ++i) {
    if (porter_stem(voc[i]) != expected[i]) {
      if (++mismatches <= 5) MESSAGE(voc[i] << " -> " << porter_stem(voc[i]) << " (want " << expected[i] << ")");
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("porter stemmer on familiar words") {
  CHECK(porter_stem("caresses") == "caress");
  CHECK(porter_stem("ponies") == "poni");
  CHECK(porter_stem("relational") == "relat");
  CHECK(porter_stem("hopeful") == "hope");
  CHECK(porter_stem("workaround") == "workaround");
  CHECK(porter_stem("refactoring") == "refactor");
  CHECK(porter_stem("a") == "a");
  CHECK(porter_stem("") == "");
}

TEST_CASE("strip_html removes tags and decodes entities") {
  CHECK(strip_html("<b>bold</b> text") == "bold text");
  CHECK(strip_html("a &lt; b &amp;&amp; c") == "a < b && c");
  CHECK(strip_html("x < y") == "x < y");
  CHECK(strip_html("&lt;i&gt;hi&lt;/i&gt;") == "hi");
  CHECK(strip_html("") == "");
}

TEST_CASE("strip_html is idempotent on random markup") {
  Rng rng(3);
  const char alphabet[] = "<>&;abc /lt;gt;amp#39 ";
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const auto len = rng.below(30);
    for (std::uint64_t i = 0; i < len; ++i) s += alphabet[rng.below(sizeof(alphabet) - 1)];
    const std::string once = strip_html(s);
    CHECK(strip_html(once) == once);
  }
}

TEST_CASE("sentence and whitespace splitting") {
  CHECK(split_sentences("One. Two! Three?\nFour") == std::vector<std::string>{"One", "Two", "Three", "Four"});
  CHECK(split_sentences("...").empty());
  const auto words = split_whitespace("  a\tbb \n ccc ");
  REQUIRE(words.size() == 3);
  CHECK(words[2] == "ccc");
  CHECK(utf8_length("h\xC3\xA9llo") == 5);
}

TEST_CASE("tokenize_words lowercases, drops urls, numbers and stop words") {
  const auto t = tokenize_words("The Workaround (see https://crbug.com/123) isn't ideal; x86 re-design 42 www.example.org");
  CHECK(t == std::vector<std::string>{"workaround", "ideal", "design"});
  CHECK(tokenize_words("").empty());
}

TEST_CASE("tokenize_clean yields stemmed lowercase letter tokens only") {
  Rng rng(9);
  const std::vector<std::string> pieces{"Refactoring", "the", "HACK", "-", "42", "<b>", "cleanup", "isn't",
                                        "don't", "http://x.y", "TODO:", "later", "\xC3\xA9t\xC3\xA9"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    for (int i = 0; i < 12; ++i) text += pieces[rng.below(pieces.size())] + " ";
    for (const auto& tok : tokenize_clean(text)) {
      CHECK(!tok.empty());
      for (char c : tok) CHECK((c >= 'a' && c <= 'z'));
    }
    for (const auto& w : tokenize_words(text)) CHECK(!default_stopwords().contains(w));
  }
  CHECK(tokenize_clean("Refactoring hacks") == TokenList{"refactor", "hack"});
}

TEST_CASE("stop-word list") {
  const auto& stop = default_stopwords();
  CHECK(stop.size() == 584);
  CHECK(stop.contains("the"));
  CHECK(stop.contains("isn't"));
  CHECK(!stop.contains("workaround"));
  const auto parsed = parse_stopwords("# comment\nFoo\n\n bar \n");
  CHECK(parsed == std::unordered_set<std::string>{"foo", "bar"});
}

TEST_CASE("sha1 hashes are maximal runs of exactly 40 hex digits") {
  const std::string h40(40, 'a');
  CHECK(count_sha1_hashes("commit " + h40 + " landed") == 1);
  CHECK(count_sha1_hashes(h40 + "b") == 0);
  CHECK(count_sha1_hashes(h40 + " " + std::string(40, '1')) == 2);
  CHECK(count_sha1_hashes(std::string(39, 'f')) == 0);
}
