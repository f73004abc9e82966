#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tdd/timestamp.hpp"

namespace tdd {

struct Comment {
  std::string author;
  Timestamp posted_at;
  std::string text;

  bool operator==(const Comment&) const = default;
};

/// One tracker issue.
struct Ticket {
  std::string id;
  std::string title;
  std::string description;
  std::vector<Comment> comments;  // submission order
  std::string author_email;
  bool author_is_project_member = false;
  std::optional<int> priority;
  std::string status;
  std::string issue_type;
  Timestamp opened_at;

  bool operator==(const Ticket&) const = default;
};

/// Answers to the four rubric decision points; unset means skipped/unsure.
struct RubricPath {
  std::optional<bool> artifact_evidence;
  std::optional<bool> improvement_or_defect;
  std::optional<bool> design_limitation;
  std::optional<bool> side_effects_or_extra_work;

  bool operator==(const RubricPath&) const = default;
};

/// A probabilistic expert label: 0 = definitely not TD, 1 = definitely TD.
struct LabelRecord {
  std::string ticket_id;
  double label = 0.0;
  std::string rater;
  Timestamp labeled_at;
  RubricPath rubric_path;
  std::optional<std::string> notes;

  bool operator==(const LabelRecord&) const = default;
};

/// Title, description and every comment joined by '\n'.
std::string free_text(const Ticket& ticket);

/// Tickets keyed (and iterated) by id, plus the active label set.
class Corpus {
 public:
  using TicketMap = std::map<std::string, Ticket, std::less<>>;

  /// Throws DataError on an empty or duplicate id or a negative priority.
  void add_ticket(Ticket ticket);

  const Ticket* find(std::string_view id) const;
  const TicketMap& tickets() const { return tickets_; }
  std::size_t size() const { return tickets_.size(); }

  /// Validates `record` against this corpus; throws DataError
  /// ("unknown ticket ...", "label out of range ...") when invalid.
  void validate_label(const LabelRecord& record) const;

  /// Last write wins per (ticket_id, rater).
  void upsert_label(const LabelRecord& record);

  /// Active records, one per (ticket_id, rater), ordered by (ticket_id, rater).
  std::vector<LabelRecord> label_records() const;

  /// The most recent active record per ticket (by labeled_at, then by upsert
  /// order), keyed by ticket id.
  std::map<std::string, LabelRecord> aggregated_labels() const;

  std::size_t label_count() const { return labels_.size(); }

  bool operator==(const Corpus& other) const;

 private:
  struct Stored {
    LabelRecord record;
    std::uint64_t sequence = 0;
  };
  TicketMap tickets_;
  std::map<std::pair<std::string, std::string>, Stored> labels_;
  std::uint64_t next_sequence_ = 0;
};

struct IngestResult {
  Corpus corpus;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;  // "line N: reason"
};

/// Reads the ticket JSONL format. Malformed lines are skipped and reported;
/// an unreadable file or a duplicate id throws DataError.
IngestResult ingest_jsonl(const std::filesystem::path& path);
IngestResult ingest_jsonl_stream(std::istream& in);

/// Writes tickets in id order, one JSON object per line.
void write_tickets_jsonl(const Corpus& corpus, std::ostream& out);
void write_tickets_jsonl(const Corpus& corpus, const std::filesystem::path& path);

std::string ticket_to_json_line(const Ticket& ticket);
std::string label_to_json_line(const LabelRecord& record);
/// Throws DataError on malformed input.
LabelRecord label_from_json_line(std::string_view line);

/// Append-only label journal. Replaying it reproduces the active label set.
class LabelJournal {
 public:
  explicit LabelJournal(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }

  /// Appends one record and flushes it to disk.
  void append(const LabelRecord& record);

  /// Reads every journal entry in file order. A missing file yields nothing;
  /// an unparsable final line without a newline (a torn write) is skipped.
  std::vector<LabelRecord> read_all() const;

  /// Upserts every entry into `corpus`; returns the number applied.
  std::size_t replay_into(Corpus& corpus) const;

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

/// Validates, journals, then applies the record. Unknown ticket or label
/// out of range throws DataError and leaves both untouched.
void upsert_label(Corpus& corpus, const LabelRecord& record, LabelJournal* journal);

struct SyntheticConfig {
  std::size_t n_tickets = 5000;
  double td_rate = 0.16;
  std::uint64_t seed = 7;
};

struct SyntheticCorpus {
  Corpus corpus;
  std::map<std::string, int> truth;  // id -> 1 when the ticket discusses TD
};

/// Deterministic synthetic tracker. Exactly round(td_rate * n) tickets are TD.
/// TD tickets are longer multi-comment design discussions; some use the
/// key-phrase vocabulary and others only paraphrase it. Non-TD tickets are
/// routine bug reports that occasionally contain a key phrase in passing.
SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& config);

/// Words used by the generator (unstemmed, lowercase).
std::vector<std::string> synthetic_vocabulary();

/// Writes a GloVe-style text embedding covering the generator vocabulary and
/// the concept target words; related words sit close to their concept.
void write_synthetic_pretrained(const std::filesystem::path& path, std::size_t dim, std::uint64_t seed);

}  // namespace tdd
