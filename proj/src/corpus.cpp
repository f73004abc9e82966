#include "tdd/corpus.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "tdd/errors.hpp"

namespace tdd {

using nlohmann::json;

std::string free_text(const Ticket& ticket) {
  std::string out = ticket.title;
  out += '\n';
  out += ticket.description;
  for (const Comment& c : ticket.comments) {
    out += '\n';
    out += c.text;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus

void Corpus::add_ticket(Ticket ticket) {
  if (ticket.id.empty()) throw DataError("ticket id is empty");
  if (ticket.priority && *ticket.priority < 0) {
    throw DataError("ticket " + ticket.id + ": negative priority");
  }
  if (tickets_.contains(ticket.id)) throw DataError("duplicate ticket id: " + ticket.id);
  std::string key = ticket.id;
  tickets_.emplace(std::move(key), std::move(ticket));
}

const Ticket* Corpus::find(std::string_view id) const {
  auto it = tickets_.find(id);
  return it == tickets_.end() ? nullptr : &it->second;
}

void Corpus::validate_label(const LabelRecord& record) const {
  if (!find(record.ticket_id)) throw DataError("unknown ticket: " + record.ticket_id);
  if (!(record.label >= 0.0 && record.label <= 1.0)) {
    throw DataError("label out of range [0,1]: " + std::to_string(record.label));
  }
}

void Corpus::upsert_label(const LabelRecord& record) {
  validate_label(record);
  labels_[{record.ticket_id, record.rater}] = Stored{record, next_sequence_++};
}

std::vector<LabelRecord> Corpus::label_records() const {
  std::vector<LabelRecord> out;
  out.reserve(labels_.size());
  for (const auto& [key, stored] : labels_) out.push_back(stored.record);
  return out;
}

std::map<std::string, LabelRecord> Corpus::aggregated_labels() const {
  std::map<std::string, const Stored*> best;
  for (const auto& [key, stored] : labels_) {
    const Stored*& slot = best[key.first];
    if (!slot || std::tie(stored.record.labeled_at, stored.sequence) >
                     std::tie(slot->record.labeled_at, slot->sequence)) {
      slot = &stored;
    }
  }
  std::map<std::string, LabelRecord> out;
  for (const auto& [id, stored] : best) out.emplace(id, stored->record);
  return out;
}

bool Corpus::operator==(const Corpus& other) const {
  return tickets_ == other.tickets_ && label_records() == other.label_records();
}

// ---------------------------------------------------------------------------
// JSON mapping

namespace {

json optional_bool(const std::optional<bool>& v) { return v ? json(*v) : json(nullptr); }

json ticket_to_json(const Ticket& t) {
  json comments = json::array();
  for (const Comment& c : t.comments) {
    comments.push_back({{"author", c.author}, {"posted_at", format_rfc3339(c.posted_at)}, {"text", c.text}});
  }
  json j;
  j["id"] = t.id;
  j["title"] = t.title;
  j["description"] = t.description;
  j["comments"] = std::move(comments);
  j["author_email"] = t.author_email;
  j["author_is_project_member"] = t.author_is_project_member;
  j["priority"] = t.priority ? json(*t.priority) : json(nullptr);
  j["status"] = t.status;
  j["issue_type"] = t.issue_type;
  j["opened_at"] = format_rfc3339(t.opened_at);
  return j;
}

std::string get_string(const json& j, const char* key, bool required) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw DataError(std::string("missing field '") + key + "'");
    return {};
  }
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

Timestamp get_timestamp(const json& j, const char* key, bool required) {
  const std::string text = get_string(j, key, required);
  if (text.empty() && !required) return {};
  auto ts = parse_rfc3339(text);
  if (!ts) throw DataError(std::string("field '") + key + "' is not an RFC 3339 timestamp");
  return *ts;
}

Ticket ticket_from_json(const json& j) {
  if (!j.is_object()) throw DataError("line is not a JSON object");
  Ticket t;
  t.id = get_string(j, "id", true);
  if (t.id.empty()) throw DataError("empty id");
  t.title = get_string(j, "title", false);
  t.description = get_string(j, "description", false);
  if (auto it = j.find("comments"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw DataError("field 'comments' is not an array");
    for (const json& c : *it) {
      if (!c.is_object()) throw DataError("comment is not an object");
      t.comments.push_back(
          Comment{get_string(c, "author", false), get_timestamp(c, "posted_at", false), get_string(c, "text", false)});
    }
  }
  t.author_email = get_string(j, "author_email", false);
  if (auto it = j.find("author_is_project_member"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw DataError("field 'author_is_project_member' is not a boolean");
    t.author_is_project_member = it->get<bool>();
  }
  if (auto it = j.find("priority"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw DataError("field 'priority' is not an integer");
    const auto p = it->get<long long>();
    if (p < 0) throw DataError("field 'priority' is negative");
    t.priority = static_cast<int>(p);
  }
  t.status = get_string(j, "status", false);
  t.issue_type = get_string(j, "issue_type", false);
  t.opened_at = get_timestamp(j, "opened_at", false);
  return t;
}

std::optional<bool> read_optional_bool(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_boolean()) throw DataError(std::string("rubric field '") + key + "' is not a boolean");
  return it->get<bool>();
}

}  // namespace

std::string ticket_to_json_line(const Ticket& ticket) { return ticket_to_json(ticket).dump(); }

std::string label_to_json_line(const LabelRecord& r) {
  json j;
  j["ticket_id"] = r.ticket_id;
  j["label"] = r.label;
  j["rater"] = r.rater;
  j["labeled_at"] = format_rfc3339(r.labeled_at);
  j["rubric_path"] = {{"artifact_evidence", optional_bool(r.rubric_path.artifact_evidence)},
                      {"improvement_or_defect", optional_bool(r.rubric_path.improvement_or_defect)},
                      {"design_limitation", optional_bool(r.rubric_path.design_limitation)},
                      {"side_effects_or_extra_work", optional_bool(r.rubric_path.side_effects_or_extra_work)}};
  j["notes"] = r.notes ? json(*r.notes) : json(nullptr);
  return j.dump();
}

LabelRecord label_from_json_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed label JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("label line is not a JSON object");
  LabelRecord r;
  r.ticket_id = get_string(j, "ticket_id", true);
  auto label = j.find("label");
  if (label == j.end() || !label->is_number()) throw DataError("label is missing or not a number");
  r.label = label->get<double>();
  r.rater = get_string(j, "rater", false);
  r.labeled_at = get_timestamp(j, "labeled_at", false);
  if (auto it = j.find("rubric_path"); it != j.end() && it->is_object()) {
    r.rubric_path.artifact_evidence = read_optional_bool(*it, "artifact_evidence");
    r.rubric_path.improvement_or_defect = read_optional_bool(*it, "improvement_or_defect");
    r.rubric_path.design_limitation = read_optional_bool(*it, "design_limitation");
    r.rubric_path.side_effects_or_extra_work = read_optional_bool(*it, "side_effects_or_extra_work");
  }
  if (auto it = j.find("notes"); it != j.end() && it->is_string()) r.notes = it->get<std::string>();
  return r;
}

// ---------------------------------------------------------------------------
// Ingestion

IngestResult ingest_jsonl_stream(std::istream& in) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Ticket ticket;
    try {
      ticket = ticket_from_json(json::parse(line));
    } catch (const json::exception& e) {
      ++result.skipped;
      result.warnings.push_back("line " + std::to_string(line_no) + ": " + e.what());
      continue;
    } catch (const DataError& e) {
      ++result.skipped;
      result.warnings.push_back("line " + std::to_string(line_no) + ": " + e.what());
      continue;
    }
    if (result.corpus.find(ticket.id)) {
      throw DataError("duplicate ticket id '" + ticket.id + "' at line " + std::to_string(line_no));
    }
    result.corpus.add_ticket(std::move(ticket));
  }
  return result;
}

IngestResult ingest_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read ticket file: " + path.string());
  return ingest_jsonl_stream(in);
}

void write_tickets_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& [id, ticket] : corpus.tickets()) out << ticket_to_json_line(ticket) << '\n';
}

void write_tickets_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write ticket file: " + path.string());
  write_tickets_jsonl(corpus, out);
}

// ---------------------------------------------------------------------------
// Label journal

LabelJournal::LabelJournal(std::filesystem::path path) : path_(std::move(path)) {}

void LabelJournal::append(const LabelRecord& record) {
  const std::string line = label_to_json_line(record) + '\n';
  std::lock_guard lock(mutex_);
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw DataError("cannot append to label journal: " + path_.string() + ": " + std::strerror(errno));
  std::size_t done = 0;
  bool ok = true;
  while (ok && done < line.size()) {
    const ssize_t n = ::write(fd, line.data() + done, line.size() - done);
    if (n < 0 && errno == EINTR) continue;
    ok = n > 0;
    if (ok) done += static_cast<std::size_t>(n);
  }
  ok = ok && ::fsync(fd) == 0;
  ::close(fd);
  if (!ok) throw DataError("failed writing label journal: " + path_.string());
}

std::vector<LabelRecord> LabelJournal::read_all() const {
  std::vector<LabelRecord> out;
  std::ifstream in(path_);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(label_from_json_line(line));
    } catch (const DataError& e) {
      // A torn final line (no newline) is a write that was never acknowledged.
      if (in.eof()) break;
      throw DataError(path_.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::size_t LabelJournal::replay_into(Corpus& corpus) const {
  const auto records = read_all();
  for (const LabelRecord& r : records) corpus.upsert_label(r);
  return records.size();
}

void upsert_label(Corpus& corpus, const LabelRecord& record, LabelJournal* journal) {
  corpus.validate_label(record);
  if (journal) journal->append(record);
  corpus.upsert_label(record);
}

}  // namespace tdd
