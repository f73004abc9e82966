#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "tdd/corpus.hpp"
#include "tdd/errors.hpp"
#include "tdd/features.hpp"
#include "tdd/rng.hpp"
#include "tdd/timestamp.hpp"

using namespace tdd;
namespace fs = std::filesystem;

namespace {

Ticket sample_ticket(std::string id) {
  Ticket t;
  t.id = std::move(id);
  t.title = "Crash in \"tab\" strip";
  t.description = "Steps:\n1. open\n2. close \xC3\xA9";
  t.comments = {{"a@chromium.org", Timestamp{1000}, "first"}, {"b@gmail.com", Timestamp{2000}, "second"}};
  t.author_email = "x@google.com";
  t.author_is_project_member = true;
  t.priority = 2;
  t.status = "Fixed";
  t.issue_type = "Bug-Regression";
  t.opened_at = Timestamp{500};
  return t;
}

fs::path temp_path(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tdd_test_corpus_" + name);
  fs::remove(p);
  return p;
}

LabelRecord label(std::string id, double y, std::string rater, std::int64_t at) {
  LabelRecord r;
  r.ticket_id = std::move(id);
  r.label = y;
  r.rater = std::move(rater);
  r.labeled_at = Timestamp{at};
  return r;
}

}  // namespace

TEST_CASE("rfc3339 round trip and offsets") {
  CHECK(format_rfc3339(Timestamp{0}) == "1970-01-01T00:00:00Z");
  const auto t = parse_rfc3339("2017-04-14T09:30:00Z");
  REQUIRE(t);
  CHECK(format_rfc3339(*t) == "2017-04-14T09:30:00Z");
  CHECK(parse_rfc3339("2017-04-14T11:30:00+02:00") == t);
  CHECK(parse_rfc3339("2017-04-14T09:30:00.75Z") == t);
  CHECK(!parse_rfc3339("yesterday"));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Timestamp ts{static_cast<std::int64_t>(rng.below(4'000'000'000ULL))};
    CHECK(parse_rfc3339(format_rfc3339(ts)) == ts);
  }
}

TEST_CASE("free text joins title, description and comments with newlines") {
  const Ticket t = sample_ticket("1");
  CHECK(free_text(t) == t.title + "\n" + t.description + "\nfirst\nsecond");
}

TEST_CASE("ticket JSONL round trip preserves every field") {
  Corpus c;
  c.add_ticket(sample_ticket("7"));
  Ticket bare;
  bare.id = "3";
  c.add_ticket(bare);
  std::stringstream ss;
  write_tickets_jsonl(c, ss);
  const IngestResult back = ingest_jsonl_stream(ss);
  CHECK(back.skipped == 0);
  CHECK(back.corpus == c);
  CHECK(back.corpus.find("7")->comments[1].text == "second");
}

TEST_CASE("ingest skips malformed lines and rejects duplicates") {
  std::stringstream ss;
  ss << ticket_to_json_line(sample_ticket("1")) << "\n"
     << "{not json\n"
     << "{\"title\": \"no id\"}\n"
     << "{\"id\": \"2\", \"priority\": -1}\n"
     << "\n"
     << "{\"id\": \"3\"}\n";
  const IngestResult r = ingest_jsonl_stream(ss);
  CHECK(r.corpus.size() == 2);
  CHECK(r.skipped == 3);
  REQUIRE(r.warnings.size() == 3);
  CHECK(r.warnings[0].rfind("line 2:", 0) == 0);

  std::stringstream dup;
  dup << "{\"id\": \"1\"}\n{\"id\": \"1\"}\n";
  CHECK_THROWS_AS(ingest_jsonl_stream(dup), DataError);
  CHECK_THROWS_AS(ingest_jsonl("/nonexistent/tickets.jsonl"), DataError);
}

TEST_CASE("labels: validation, last write wins, aggregation") {
  Corpus c;
  c.add_ticket(sample_ticket("1"));
  c.add_ticket(sample_ticket("2"));
  CHECK_THROWS_AS(c.validate_label(label("9", 0.5, "r", 1)), DataError);
  CHECK_THROWS_AS(c.validate_label(label("1", 1.5, "r", 1)), DataError);
  CHECK_THROWS_AS(c.validate_label(label("1", -0.1, "r", 1)), DataError);

  c.upsert_label(label("1", 0.2, "alice", 10));
  c.upsert_label(label("1", 0.9, "alice", 20));
  CHECK(c.label_count() == 1);
  CHECK(c.label_records()[0].label == 0.9);

  c.upsert_label(label("1", 0.4, "bob", 15));
  c.upsert_label(label("2", 1.0, "bob", 5));
  CHECK(c.label_count() == 3);
  const auto agg = c.aggregated_labels();
  CHECK(agg.at("1").label == 0.9);
  CHECK(agg.at("1").rater == "alice");
  CHECK(agg.at("2").label == 1.0);
}

TEST_CASE("label journal replay reproduces the active label set") {
  const fs::path path = temp_path("journal.jsonl");
  Corpus c;
  c.add_ticket(sample_ticket("1"));
  c.add_ticket(sample_ticket("2"));
  Corpus fresh = c;
  {
    LabelJournal journal(path);
    LabelRecord r = label("1", 0.2, "alice", 10);
    r.rubric_path.artifact_evidence = true;
    r.rubric_path.design_limitation = false;
    r.notes = "mild hints";
    upsert_label(c, r, &journal);
    upsert_label(c, label("2", 0.7, "alice", 11), &journal);
    upsert_label(c, label("1", 0.3, "alice", 12), &journal);
    CHECK_THROWS_AS(upsert_label(c, label("1", 2.0, "alice", 13), &journal), DataError);
    CHECK_THROWS_AS(upsert_label(c, label("nope", 0.5, "alice", 13), &journal), DataError);
  }
  LabelJournal reread(path);
  CHECK(reread.read_all().size() == 3);
  CHECK(reread.replay_into(fresh) == 3);
  CHECK(fresh.label_records() == c.label_records());
  CHECK(LabelJournal(temp_path("missing.jsonl")).read_all().empty());
  fs::remove(path);
}

TEST_CASE("label JSON round trip") {
  LabelRecord r = label("42", 0.8, "carol", 1483228800);
  r.rubric_path.improvement_or_defect = true;
  r.notes = "see comment 3";
  CHECK(label_from_json_line(label_to_json_line(r)) == r);
  CHECK_THROWS_AS(label_from_json_line("{\"ticket_id\": \"1\"}"), DataError);
  CHECK_THROWS_AS(label_from_json_line("[1,2]"), DataError);
}

TEST_CASE("synthetic corpus is deterministic with the exact TD count") {
  SyntheticConfig cfg;
  cfg.n_tickets = 400;
  cfg.td_rate = 0.16;
  cfg.seed = 3;
  const SyntheticCorpus a = generate_synthetic_corpus(cfg);
  const SyntheticCorpus b = generate_synthetic_corpus(cfg);
  CHECK(a.corpus == b.corpus);
  CHECK(a.truth == b.truth);
  CHECK(a.corpus.size() == 400);
  std::size_t td = 0;
  for (const auto& [id, v] : a.truth) td += static_cast<std::size_t>(v);
  CHECK(td == 64);
  cfg.seed = 4;
  CHECK(!(generate_synthetic_corpus(cfg).corpus == a.corpus));
}

TEST_CASE("synthetic TD tickets use key phrases more often than the rest") {
  const SyntheticCorpus s = generate_synthetic_corpus({2000, 0.16, 5});
  double td_hits = 0, td_n = 0, other_hits = 0, other_n = 0;
  for (const auto& [id, t] : s.corpus.tickets()) {
    const bool hit = !keyphrase_spans(free_text(t)).empty();
    if (s.truth.at(id)) {
      td_hits += hit;
      ++td_n;
    } else {
      other_hits += hit;
      ++other_n;
    }
  }
  CHECK(td_hits / td_n > other_hits / other_n + 0.2);
  CHECK(td_hits / td_n < 0.95);
}
