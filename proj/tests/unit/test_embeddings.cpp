#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tdd/embeddings.hpp"
#include "tdd/errors.hpp"
#include "tdd/rng.hpp"

using namespace tdd;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("tdd_test_emb_" + name); }

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

/// Two topics whose words only co-occur within their topic.
std::vector<TokenList> topic_corpus(std::size_t n_docs, std::uint64_t seed) {
  const std::vector<std::string> a{"crash", "stack", "trace", "segfault", "dump"};
  const std::vector<std::string> b{"refactor", "cleanup", "design", "debt", "rewrite"};
  Rng rng(seed);
  std::vector<TokenList> docs;
  for (std::size_t d = 0; d < n_docs; ++d) {
    const auto& words = (d % 2 == 0) ? a : b;
    TokenList doc;
    for (int i = 0; i < 20; ++i) doc.push_back(words[rng.below(words.size())]);
    docs.push_back(doc);
  }
  return docs;
}

}  // namespace

TEST_CASE("word embedding construction and lookup") {
  const WordEmbedding e(2, {"a", "b"}, {1, 0, 0, 1});
  CHECK(e.size() == 2);
  CHECK(e.index_of("b") == 1);
  CHECK(!e.find("c"));
  CHECK((*e.find("a"))[0] == 1.0);
  CHECK_THROWS_AS(WordEmbedding(2, {"a"}, {1, 2, 3}), DataError);
  CHECK_THROWS_AS(WordEmbedding(2, {"a", "a"}, {1, 2, 3, 4}), DataError);
  CHECK_THROWS_AS(WordEmbedding(1, {"a"}, {NAN}), DataError);
}

TEST_CASE("cosine similarity") {
  const std::vector<double> u{1, 0}, v{0, 2}, w{3, 0}, z{0, 0};
  CHECK(cosine(u, v) == doctest::Approx(0.0));
  CHECK(cosine(u, w) == doctest::Approx(1.0));
  CHECK(cosine(u, z) == 0.0);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(7), b(7);
    for (auto& x : a) x = rng.uniform(-1, 1);
    for (auto& x : b) x = rng.uniform(-1, 1);
    const double c = cosine(a, b);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    CHECK(c == doctest::Approx(cosine(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("load_pretrained parses, restricts and reports bad lines") {
  const fs::path p = temp_path("pre.txt");
  write_file(p, "debt 0.1 0.2 0.3\nhack 1 2 3\ndebt 9 9 9\nother -1 -2 -3\n");
  const WordEmbedding all = load_pretrained(p, 3);
  CHECK(all.size() == 3);
  CHECK((*all.find("debt"))[2] == doctest::Approx(0.3));
  const std::unordered_set<std::string> keep{"hack"};
  CHECK(load_pretrained(p, 3, &keep).vocab() == std::vector<std::string>{"hack"});
  const std::unordered_set<std::string> none{"zzz"};
  CHECK_THROWS_AS(load_pretrained(p, 3, &none), DataError);

  write_file(p, "debt 0.1 0.2 0.3\nhack 1 2\n");
  try {
    load_pretrained(p, 3);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_pretrained(temp_path("absent.txt"), 3), DataError);
  fs::remove(p);
}

TEST_CASE("vocabulary selection orders by count then token") {
  const std::vector<TokenList> docs{{"b", "a", "c"}, {"a", "b", "d"}, {"a"}};
  std::vector<std::uint64_t> counts;
  CHECK(select_vocabulary(docs, 3, &counts) == std::vector<std::string>{"a", "b", "c"});
  CHECK(counts == std::vector<std::uint64_t>{3, 2, 1});
}

TEST_CASE("cbow training is deterministic and learns topic structure") {
  const auto docs = topic_corpus(200, 4);
  CbowConfig cfg;
  cfg.dim = 10;
  cfg.epochs = 5;
  cfg.seed = 17;
  const CbowResult a = train_cbow(docs, cfg);
  const CbowResult b = train_cbow(docs, cfg);
  CHECK(a.embedding == b.embedding);
  CHECK(a.epoch_loss == b.epoch_loss);
  REQUIRE(a.epoch_loss.size() == 5);
  CHECK(a.epoch_loss.back() < a.epoch_loss.front());

  const auto& e = a.embedding;
  const double same = cosine(*e.find("crash"), *e.find("segfault"));
  const double cross = cosine(*e.find("crash"), *e.find("refactor"));
  CHECK(same > cross);

  cfg.seed = 18;
  CHECK(!(train_cbow(docs, cfg).embedding == a.embedding));
  CHECK_THROWS_AS(train_cbow(std::vector<TokenList>{{"only"}}, cfg), DataError);
}

TEST_CASE("word embedding save/load round trip is exact") {
  CbowConfig cfg;
  cfg.epochs = 1;
  const CbowResult r = train_cbow(topic_corpus(20, 1), cfg);
  const fs::path p = temp_path("word.txt");
  save_word_embedding(r.embedding, p);
  CHECK(load_word_embedding(p) == r.embedding);
  fs::remove(p);
}

TEST_CASE("document vectors: trained, empty and inferred") {
  auto docs = topic_corpus(60, 8);
  docs.push_back({});
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < docs.size(); ++i) ids.push_back("d" + std::to_string(i));
  DocVecConfig cfg;
  cfg.dim = 20;
  cfg.seed = 5;
  const DocEmbedding m = train_docvecs(ids, docs, cfg);
  CHECK(m == train_docvecs(ids, docs, cfg));
  CHECK(m.doc_ids().size() == docs.size());
  CHECK(m.empty_docs() == std::vector<std::string>{ids.back()});
  const auto empty_vec = m.find(ids.back());
  REQUIRE(empty_vec);
  for (double v : *empty_vec) CHECK(v == 0.0);

  // Documents from the same topic end up closer than across topics.
  double same = 0, cross = 0;
  for (int i = 0; i < 10; ++i) {
    same += cosine(*m.find(ids[2 * i]), *m.find(ids[2 * i + 2]));
    cross += cosine(*m.find(ids[2 * i]), *m.find(ids[2 * i + 1]));
  }
  CHECK(same > cross);

  bool oov = false;
  const auto v1 = infer_docvec(m, {"crash", "dump", "trace"}, 9, &oov);
  CHECK(!oov);
  CHECK(v1 == infer_docvec(m, {"crash", "dump", "trace"}, 9));
  CHECK(v1.size() == 20);
  const auto v0 = infer_docvec(m, {"unseen"}, 9, &oov);
  CHECK(oov);
  for (double v : v0) CHECK(v == 0.0);

  const fs::path p = temp_path("doc.txt");
  save_doc_embedding(m, p);
  const DocEmbedding back = load_doc_embedding(p);
  CHECK(back == m);
  CHECK(infer_docvec(back, {"crash", "dump", "trace"}, 9) == v1);
  fs::remove(p);
}
