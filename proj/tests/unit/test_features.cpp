#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "tdd/corpus.hpp"
#include "tdd/embeddings.hpp"
#include "tdd/errors.hpp"
#include "tdd/features.hpp"
#include "tdd/rng.hpp"

using namespace tdd;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kExpectedNames = {
    "author_chromium_org", "author_gmail_com", "author_google_com", "author_etouch_net",
    "author_is_project_member", "priority_1", "priority_2", "priority_3",
    "status_WontFix", "status_Fixed", "status_Duplicate", "status_Verified",
    "status_Archived", "status_Assigned", "status_Available", "status_Untriaged",
    "type_starts_bug", "type_starts_bug_dash", "type_not_bug",
    "n_char", "n_char_longest_sentence", "median_chars_per_word_no_html", "n_word_clean", "n_word_no_html",
    "avg_nword_clean_per_sent", "avg_nword_no_html_per_sent", "n_sent", "n_sha1",
    "KEYPHRASE_debt", "KEYPHRASE_hack", "KEYPHRASE_workaround", "KEYPHRASE_cleanup", "KEYPHRASE_clean-up",
    "KEYPHRASE_clean_up", "KEYPHRASE_give_up", "KEYPHRASE_problematic", "KEYPHRASE_not_up_to_date",
    "KEYPHRASE_inconsisten", "KEYPHRASE_short_term", "KEYPHRASE_deviate", "KEYPHRASE_tweak", "KEYPHRASE_mess",
    "KEYPHRASE_buggy", "KEYPHRASE_complex", "KEYPHRASE_doesn't_work", "KEYPHRASE_out_of_date",
    "KEYPHRASE_insufficient", "KEYPHRASE_rework", "KEYPHRASE_remove", "KEYPHRASE_redesign", "KEYPHRASE_refactor",
    "KEYPHRASE_depend", "KEYPHRASE_structure",
    "CONCEPT_deviate", "CONCEPT_outdated", "CONCEPT_redundant", "CONCEPT_redesign", "CONCEPT_decouple",
    "CONCEPT_complicated", "CONCEPT_regret", "CONCEPT_corrupt", "CONCEPT_horrible", "CONCEPT_delay",
    "wordvec_1_percentile_5", "wordvec_2_percentile_5", "wordvec_3_percentile_5", "wordvec_4_percentile_5",
    "wordvec_5_percentile_5", "wordvec_6_percentile_5", "wordvec_7_percentile_5", "wordvec_8_percentile_5",
    "wordvec_9_percentile_5", "wordvec_10_percentile_5",
    "wordvec_1_percentile_95", "wordvec_2_percentile_95", "wordvec_3_percentile_95", "wordvec_4_percentile_95",
    "wordvec_5_percentile_95", "wordvec_6_percentile_95", "wordvec_7_percentile_95", "wordvec_8_percentile_95",
    "wordvec_9_percentile_95", "wordvec_10_percentile_95",
    "wordvec_seqdiff_percentile_5", "wordvec_seqdiff_percentile_95",
    "docvec_1", "docvec_2", "docvec_3", "docvec_4", "docvec_5", "docvec_6", "docvec_7", "docvec_8", "docvec_9",
    "docvec_10", "docvec_11", "docvec_12", "docvec_13", "docvec_14", "docvec_15", "docvec_16", "docvec_17",
    "docvec_18", "docvec_19", "docvec_20"};

/// 3-d fixture: the concept targets plus a few related words.
WordEmbedding fixture_pretrained() {
  std::vector<std::string> vocab;
  std::vector<double> vecs;
  Rng rng(77);
  for (auto t : kConceptTargets) {
    vocab.emplace_back(t);
    for (int d = 0; d < 3; ++d) vecs.push_back(rng.uniform(-1, 1));
  }
  vocab.emplace_back("old");
  vecs.insert(vecs.end(), {0.3, -0.2, 0.9});
  vocab.emplace_back("crash");
  vecs.insert(vecs.end(), {-0.5, 0.1, 0.2});
  return WordEmbedding(3, vocab, vecs);
}

struct Fixture {
  SyntheticCorpus syn = generate_synthetic_corpus({120, 0.2, 11});
  WordEmbedding pretrained = fixture_pretrained();
  WordEmbedding word;
  DocEmbedding doc;
  FeatureContext ctx;

  Fixture() {
    std::vector<std::string> ids;
    std::vector<TokenList> docs;
    for (const auto& [id, t] : syn.corpus.tickets()) {
      ids.push_back(id);
      docs.push_back(tokenize_clean(free_text(t)));
    }
    CbowConfig cc;
    cc.epochs = 2;
    word = train_cbow(docs, cc).embedding;
    DocVecConfig dc;
    dc.epochs = 2;
    doc = train_docvecs(ids, docs, dc);
    ctx.pretrained = &pretrained;
    ctx.word_embedding = &word;
    ctx.doc_embedding = &doc;
  }
};

std::vector<std::string> words(std::initializer_list<const char*> w) { return {w.begin(), w.end()}; }

Ticket ticket_with(std::string text) {
  Ticket t;
  t.id = "t1";
  t.title = std::move(text);
  return t;
}

}  // namespace

TEST_CASE("default registry has exactly the 105 documented names in order") {
  const FeatureRegistry r = FeatureRegistry::default_registry();
  CHECK(r.size() == 105);
  CHECK(r.names() == kExpectedNames);
  CHECK(r.index_of("wordvec_4_percentile_5") == 66);
  CHECK(r.version() == kDefaultRegistryVersion);
  std::map<FeatureFamily, int> per_family;
  for (const auto& f : r.features()) ++per_family[f.family];
  CHECK(per_family[FeatureFamily::metadata] == 19);
  CHECK(per_family[FeatureFamily::count] == 9);
  CHECK(per_family[FeatureFamily::keyphrase] == 25);
  CHECK(per_family[FeatureFamily::concept_word] == 10);
  CHECK(per_family[FeatureFamily::wordvec] == 22);
  CHECK(per_family[FeatureFamily::docvec] == 20);
  CHECK(FeatureRegistry::from_names(r.names()) == r);
  CHECK_THROWS_AS(FeatureRegistry::from_names(words({"n_char", "bogus"})), DataError);
}

TEST_CASE("n-gram registry extension") {
  const FeatureRegistry base = FeatureRegistry::default_registry();
  const std::vector<std::string> grams{"tab_strip", "crash"};
  const FeatureRegistry r = base.with_ngrams(grams);
  CHECK(r.size() == 107);
  CHECK(r.names()[105] == "NGRAM_tab_strip");
  CHECK(r.ngrams() == grams);
  CHECK(r.version() != base.version());
  CHECK(r.version() == base.with_ngrams(words({"tab_strip", "crash"})).version());
  CHECK(FeatureRegistry::from_names(r.names()) == r);
  CHECK(r.version() != base.with_ngrams(words({"crash"})).version());
}

TEST_CASE("percentile uses linear interpolation between order statistics") {
  const std::vector<double> v{4, 1, 3, 2};
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK(percentile(v, 1.0) == 4.0);
  CHECK(percentile(v, 0.5) == doctest::Approx(2.5));
  CHECK(percentile(v, 0.05) == doctest::Approx(1.15));
  CHECK(percentile(std::vector<double>{7}, 0.95) == 7.0);
  CHECK_THROWS_AS(percentile(std::vector<double>{}, 0.5), UsageError);
  CHECK_THROWS_AS(percentile(v, 1.5), UsageError);
}

TEST_CASE("metadata flags") {
  Ticket t;
  t.id = "1";
  t.author_email = "Dev@Chromium.org";
  t.author_is_project_member = true;
  t.priority = 2;
  t.status = "fixed";
  t.issue_type = "Bug-Security";
  auto m = metadata_features(t);
  REQUIRE(m.size() == 19);
  CHECK(m == std::vector<double>{1, 0, 0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 1, 0});

  t.author_email = "someone@mail.google.com";
  t.priority = std::nullopt;
  t.status = "Untriaged";
  t.issue_type = "Feature";
  m = metadata_features(t);
  CHECK(m == std::vector<double>{0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1});

  t.author_email = "x@notgoogle.com";
  t.issue_type = "";
  m = metadata_features(t);
  CHECK(m[2] == 0.0);
  CHECK(m[16] + m[17] + m[18] == 0.0);
}

TEST_CASE("count features on a hand-checked text") {
  const auto c = count_features("Hello <b>big</b> world. Refactoring now!");
  REQUIRE(c.size() == 9);
  CHECK(c[0] == 40);   // characters
  CHECK(c[1] == 22);   // "Hello <b>big</b> world"
  CHECK(c[2] == 5);    // median of {5,3,6,11,4}
  CHECK(c[3] == 3);    // big world refactor ("hello", "now" are stop words)
  CHECK(c[4] == 5);
  CHECK(c[5] == 1.5);
  CHECK(c[6] == 2.5);
  CHECK(c[7] == 2);
  CHECK(c[8] == 0);
  const auto empty = count_features("");
  for (double v : empty) CHECK(v == 0.0);
}

TEST_CASE("key-phrase flags match substrings case-insensitively") {
  const auto f = keyphrase_features("This is technical DEBT; the Inconsistency remains");
  const auto r = FeatureRegistry::default_registry();
  CHECK(f[0] == 1.0);
  CHECK(f[*r.index_of("KEYPHRASE_inconsisten") - 28] == 1.0);
  CHECK(std::accumulate(f.begin(), f.end(), 0.0) == 2.0);
  CHECK(keyphrase_features("inconsistent naming")[9] == 1.0);
}

TEST_CASE("key-phrase spans agree with an independent substring scan") {
  Rng rng(21);
  const std::vector<std::string> pieces{"a workaround", " Hack", "debt", "messy", "clean up", "REFACTORing",
                                        " plain", "depends", "x", "\n", "structure", "out of date"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    const auto n = rng.below(10);
    for (std::uint64_t i = 0; i < n; ++i) text += pieces[rng.below(pieces.size())];
    std::string lowered = text;
    for (char& ch : lowered) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    std::vector<PhraseSpan> oracle;
    for (std::size_t p = 0; p < kKeyPhrases.size(); ++p) {
      const std::string phrase(kKeyPhrases[p]);
      for (std::size_t b = 0; b + phrase.size() <= lowered.size(); ++b) {
        if (lowered.compare(b, phrase.size(), phrase) == 0) oracle.push_back({p, b, b + phrase.size()});
      }
    }
    std::sort(oracle.begin(), oracle.end(),
              [](const PhraseSpan& x, const PhraseSpan& y) { return std::tie(x.begin, x.phrase) < std::tie(y.begin, y.phrase); });
    CHECK(keyphrase_spans(text) == oracle);
  }
  const auto one = keyphrase_spans("use a workaround here");
  REQUIRE(one.size() == 1);
  CHECK(one[0].begin == 6);
  CHECK(one[0].end == 16);
  CHECK(keyphrase_spans("nothing to see").empty());
}

TEST_CASE("concept features are max cosine to each target") {
  const WordEmbedding pre = fixture_pretrained();
  auto f = concept_features(words({"outdated", "crash"}), pre);
  CHECK(f[1] == doctest::Approx(1.0));
  f = concept_features(words({"old"}), pre);
  CHECK(f[1] == doctest::Approx(cosine(*pre.find("old"), *pre.find("outdated"))).epsilon(1e-15));
  for (double v : concept_features(words({"unknown"}), pre)) CHECK(v == 0.0);
  const WordEmbedding missing(1, {"old"}, {1.0});
  CHECK_THROWS_AS(require_concept_targets(missing), DataError);
}

TEST_CASE("word-vector features: per-dimension percentiles and sequential distances") {
  std::vector<std::string> vocab;
  std::vector<double> vecs;
  for (int w = 0; w < 3; ++w) {
    vocab.push_back(std::string(1, static_cast<char>('a' + w)));
    for (int d = 0; d < 10; ++d) vecs.push_back(w * 10 + d);
  }
  const WordEmbedding e(10, vocab, vecs);
  const auto f = wordvec_features(TokenList{"a", "zzz", "c", "b"}, e);
  REQUIRE(f.size() == 22);
  // dimension 1 values in token order: 0, 20, 10
  CHECK(f[0] == doctest::Approx(percentile(std::vector<double>{0, 20, 10}, 0.05)));
  CHECK(f[10] == doctest::Approx(percentile(std::vector<double>{0, 20, 10}, 0.95)));
  const double d1 = std::sqrt(10 * 400.0), d2 = std::sqrt(10 * 100.0);
  CHECK(f[20] == doctest::Approx(percentile(std::vector<double>{d1, d2}, 0.05)));
  CHECK(f[21] == doctest::Approx(percentile(std::vector<double>{d1, d2}, 0.95)));
  for (double v : wordvec_features(TokenList{"zzz"}, e)) CHECK(v == 0.0);
  const auto single = wordvec_features(TokenList{"b"}, e);
  CHECK(single[0] == 10.0);
  CHECK(single[20] == 0.0);
}

TEST_CASE("n-gram enumeration and rarity filter") {
  CHECK(enumerate_ngrams(TokenList{"a", "b", "a"}, 3) ==
        std::vector<std::string>{"a", "a_b", "a_b_a", "b", "b_a"});
  std::vector<TokenList> docs;
  for (int i = 0; i < 10; ++i) docs.push_back(i < 4 ? TokenList{"rare", "x"} : TokenList{"x"});
  docs.push_back({"once"});
  const auto kept = select_ngrams(docs, 3, 3);
  CHECK(kept == std::vector<std::string>{"rare", "rare_x"});  // "x" is absent from only one document
}

TEST_CASE("featurization is deterministic, finite and ordered") {
  Fixture fx;
  const FeatureMatrix a = featurize_corpus(fx.syn.corpus, fx.ctx);
  const FeatureMatrix b = featurize_corpus(fx.syn.corpus, fx.ctx);
  CHECK(a == b);
  CHECK(a.values == b.values);
  CHECK(a.rows() == 120);
  CHECK(a.cols() == 105);
  const auto r = FeatureRegistry::default_registry();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto row = a.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) {
      CHECK(std::isfinite(row[c]));
      const auto fam = r.features()[c].family;
      if (fam == FeatureFamily::metadata || fam == FeatureFamily::keyphrase) CHECK((row[c] == 0.0 || row[c] == 1.0));
      if (fam == FeatureFamily::concept_word) CHECK((row[c] >= -1.0 - 1e-12 && row[c] <= 1.0 + 1e-12));
    }
    const Ticket& t = *fx.syn.corpus.find(a.ids[i]);
    const FeatureVector fv = featurize(t, fx.ctx);
    CHECK(std::equal(fv.values.begin(), fv.values.end(), row.begin(), row.end()));
  }

  Ticket fresh = ticket_with("A brand new ticket about technical debt and a hack");
  fresh.id = "not-in-training";
  const FeatureVector fv = featurize(fresh, fx.ctx);
  CHECK(fv.docvec_source == DocVecSource::inferred);
  CHECK(fv.values[28] == 1.0);
  CHECK(featurize(fresh, fx.ctx).values == fv.values);
}

TEST_CASE("feature CSV round trip is exact") {
  Fixture fx;
  const FeatureMatrix a = featurize_corpus(fx.syn.corpus, fx.ctx);
  const fs::path p = fs::temp_directory_path() / "tdd_test_features.csv";
  write_feature_csv(a, p);
  const FeatureMatrix back = read_feature_csv(p);
  CHECK(back.ids == a.ids);
  CHECK(back.values == a.values);
  CHECK(back.registry == a.registry);
  fs::remove(p);
}

TEST_CASE("featurize rejects embeddings of the wrong width") {
  Fixture fx;
  const WordEmbedding narrow(2, {"a"}, {1, 2});
  FeatureContext ctx = fx.ctx;
  ctx.word_embedding = &narrow;
  CHECK_THROWS_AS(featurize(ticket_with("x"), ctx), DataError);
  ctx.word_embedding = nullptr;
  CHECK_THROWS_AS(featurize(ticket_with("x"), ctx), UsageError);
}
