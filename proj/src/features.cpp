#include "tdd/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "tdd/errors.hpp"
#include "tdd/rng.hpp"
#include "tdd/simd/kernels.hpp"

namespace tdd {
namespace {

constexpr std::array<std::string_view, 4> kAuthorDomains = {"chromium.org", "gmail.com", "google.com",
                                                            "etouch.net"};
constexpr std::array<std::string_view, 8> kStatuses = {"WontFix",  "Fixed",    "Duplicate", "Verified",
                                                       "Archived", "Assigned", "Available", "Untriaged"};
constexpr std::array<std::string_view, 9> kCountNames = {"n_char",
                                                         "n_char_longest_sentence",
                                                         "median_chars_per_word_no_html",
                                                         "n_word_clean",
                                                         "n_word_no_html",
                                                         "avg_nword_clean_per_sent",
                                                         "avg_nword_no_html_per_sent",
                                                         "n_sent",
                                                         "n_sha1"};
constexpr std::string_view kNgramPrefix = "NGRAM_";

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string phrase_feature_name(std::string_view phrase) {
  std::string name = "KEYPHRASE_";
  for (char c : phrase) name += c == ' ' ? '_' : c;
  return name;
}

std::string domain_feature_name(std::string_view domain) {
  std::string name = "author_";
  for (char c : domain) name += c == '.' ? '_' : c;
  return name;
}

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

std::string_view to_string(FeatureFamily family) {
  switch (family) {
    case FeatureFamily::metadata: return "metadata";
    case FeatureFamily::count: return "count";
    case FeatureFamily::keyphrase: return "keyphrase";
    case FeatureFamily::ngram: return "ngram";
    case FeatureFamily::concept_word: return "concept";
    case FeatureFamily::wordvec: return "wordvec";
    case FeatureFamily::docvec: return "docvec";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Registry

void FeatureRegistry::add(std::string name, FeatureFamily family) {
  if (!index_.emplace(name, features_.size()).second) throw DataError("duplicate feature name: " + name);
  features_.push_back({std::move(name), family});
}

FeatureRegistry FeatureRegistry::default_registry() {
  FeatureRegistry r;
  r.version_ = std::string(kDefaultRegistryVersion);
  for (auto d : kAuthorDomains) r.add(domain_feature_name(d), FeatureFamily::metadata);
  r.add("author_is_project_member", FeatureFamily::metadata);
  for (int p = 1; p <= 3; ++p) r.add("priority_" + std::to_string(p), FeatureFamily::metadata);
  for (auto s : kStatuses) r.add("status_" + std::string(s), FeatureFamily::metadata);
  r.add("type_starts_bug", FeatureFamily::metadata);
  r.add("type_starts_bug_dash", FeatureFamily::metadata);
  r.add("type_not_bug", FeatureFamily::metadata);
  for (auto n : kCountNames) r.add(std::string(n), FeatureFamily::count);
  for (auto p : kKeyPhrases) r.add(phrase_feature_name(p), FeatureFamily::keyphrase);
  for (auto t : kConceptTargets) r.add("CONCEPT_" + std::string(t), FeatureFamily::concept_word);
  for (std::size_t d = 1; d <= kWordVecDim; ++d) {
    r.add("wordvec_" + std::to_string(d) + "_percentile_5", FeatureFamily::wordvec);
  }
  for (std::size_t d = 1; d <= kWordVecDim; ++d) {
    r.add("wordvec_" + std::to_string(d) + "_percentile_95", FeatureFamily::wordvec);
  }
  r.add("wordvec_seqdiff_percentile_5", FeatureFamily::wordvec);
  r.add("wordvec_seqdiff_percentile_95", FeatureFamily::wordvec);
  for (std::size_t d = 1; d <= kDocVecDim; ++d) r.add("docvec_" + std::to_string(d), FeatureFamily::docvec);
  return r;
}

FeatureRegistry FeatureRegistry::with_ngrams(std::span<const std::string> grams) const {
  FeatureRegistry r = *this;
  for (const std::string& g : grams) r.add(std::string(kNgramPrefix) + g, FeatureFamily::ngram);
  const auto all = r.ngrams();
  std::string joined;
  for (const auto& g : all) joined += g + '\n';
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(stable_hash(joined)));
  r.version_ = std::string(kDefaultRegistryVersion) + "+ngrams-" + std::to_string(all.size()) + "-" + hash;
  return r;
}

FeatureRegistry FeatureRegistry::from_names(std::span<const std::string> names) {
  const FeatureRegistry base = default_registry();
  std::vector<std::string> grams;
  std::size_t n_base = 0;
  for (const std::string& name : names) {
    if (name.starts_with(kNgramPrefix)) {
      grams.push_back(name.substr(kNgramPrefix.size()));
    } else {
      if (!grams.empty()) throw DataError("n-gram features must follow the default features");
      if (n_base >= base.size() || base.features_[n_base].name != name) {
        throw DataError("unknown or out-of-order feature name: " + name);
      }
      ++n_base;
    }
  }
  if (n_base != base.size()) throw DataError("feature list is missing default features");
  return grams.empty() ? base : base.with_ngrams(grams);
}

std::vector<std::string> FeatureRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

std::optional<std::size_t> FeatureRegistry::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> FeatureRegistry::ngrams() const {
  std::vector<std::string> out;
  for (const auto& f : features_) {
    if (f.family == FeatureFamily::ngram) out.push_back(f.name.substr(kNgramPrefix.size()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Families

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw UsageError("percentile of an empty list");
  if (!(q >= 0.0 && q <= 1.0)) throw UsageError("percentile q must be in [0,1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> metadata_features(const Ticket& ticket) {
  std::vector<double> out;
  out.reserve(19);
  const auto at = ticket.author_email.rfind('@');
  const std::string domain = at == std::string::npos ? std::string() : lower(ticket.author_email.substr(at + 1));
  for (auto d : kAuthorDomains) {
    const bool match = !domain.empty() && (domain == d || (domain.size() > d.size() && domain.ends_with(d) &&
                                                           domain[domain.size() - d.size() - 1] == '.'));
    out.push_back(match ? 1.0 : 0.0);
  }
  out.push_back(ticket.author_is_project_member ? 1.0 : 0.0);
  for (int p = 1; p <= 3; ++p) out.push_back(ticket.priority == p ? 1.0 : 0.0);
  const std::string status = lower(ticket.status);
  for (auto s : kStatuses) out.push_back(status == lower(s) ? 1.0 : 0.0);
  const std::string type = lower(ticket.issue_type);
  const bool has_type = !type.empty();
  out.push_back(type.starts_with("bug") ? 1.0 : 0.0);
  out.push_back(type.starts_with("bug-") ? 1.0 : 0.0);
  out.push_back(has_type && !type.starts_with("bug") ? 1.0 : 0.0);
  return out;
}

std::vector<double> count_features(std::string_view text) {
  const std::vector<std::string> sentences = split_sentences(text);
  std::size_t longest = 0;
  for (const auto& s : sentences) longest = std::max(longest, utf8_length(s));

  const std::string stripped = strip_html(text);
  const auto words_no_html = split_whitespace(stripped);
  std::vector<double> word_lengths;
  word_lengths.reserve(words_no_html.size());
  for (auto w : words_no_html) word_lengths.push_back(static_cast<double>(utf8_length(w)));
  const double median = word_lengths.empty() ? 0.0 : percentile(word_lengths, 0.5);

  const double n_word_clean = static_cast<double>(tokenize_clean(text).size());
  const double n_word_no_html = static_cast<double>(words_no_html.size());
  const double n_sent = static_cast<double>(sentences.size());
  const double n_sent_no_html = static_cast<double>(split_sentences(stripped).size());

  return {static_cast<double>(utf8_length(text)),
          static_cast<double>(longest),
          median,
          n_word_clean,
          n_word_no_html,
          ratio(n_word_clean, n_sent),
          ratio(n_word_no_html, n_sent_no_html),
          n_sent,
          static_cast<double>(count_sha1_hashes(text))};
}

std::vector<double> keyphrase_features(std::string_view text) {
  const std::string lowered = lower(text);
  std::vector<double> out;
  out.reserve(kKeyPhrases.size());
  for (auto p : kKeyPhrases) out.push_back(lowered.find(p) != std::string::npos ? 1.0 : 0.0);
  return out;
}

std::vector<PhraseSpan> keyphrase_spans(std::string_view text) {
  const std::string lowered = lower(text);
  std::vector<PhraseSpan> out;
  for (std::size_t i = 0; i < kKeyPhrases.size(); ++i) {
    const auto phrase = kKeyPhrases[i];
    for (auto pos = lowered.find(phrase); pos != std::string::npos; pos = lowered.find(phrase, pos + 1)) {
      out.push_back({i, pos, pos + phrase.size()});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const PhraseSpan& a, const PhraseSpan& b) { return std::tie(a.begin, a.phrase) < std::tie(b.begin, b.phrase); });
  return out;
}

void require_concept_targets(const WordEmbedding& pretrained) {
  for (auto t : kConceptTargets) {
    if (!pretrained.index_of(t)) throw DataError("pretrained embedding lacks concept target word: " + std::string(t));
  }
}

std::vector<double> concept_features(std::span<const std::string> words, const WordEmbedding& pretrained) {
  std::vector<std::span<const double>> targets;
  targets.reserve(kConceptTargets.size());
  for (auto t : kConceptTargets) {
    auto v = pretrained.find(t);
    if (!v) throw DataError("pretrained embedding lacks concept target word: " + std::string(t));
    targets.push_back(*v);
  }
  std::vector<std::size_t> rows;
  std::set<std::string_view> distinct(words.begin(), words.end());
  for (auto w : distinct) {
    if (auto i = pretrained.index_of(w)) rows.push_back(*i);
  }
  std::vector<double> out(kConceptTargets.size(), 0.0);
  if (rows.empty()) return out;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    double best = -2.0;
    for (std::size_t r : rows) best = std::max(best, cosine(pretrained.row(r), targets[t]));
    out[t] = best;
  }
  return out;
}

std::vector<double> wordvec_features(const TokenList& tokens, const WordEmbedding& embedding) {
  const std::size_t dim = embedding.dim();
  std::vector<std::span<const double>> rows;
  for (const std::string& tok : tokens) {
    if (auto v = embedding.find(tok)) rows.push_back(*v);
  }
  std::vector<double> out(2 * dim + 2, 0.0);
  if (rows.empty()) return out;

  std::vector<double> column(rows.size());
  for (std::size_t d = 0; d < dim; ++d) {
    for (std::size_t r = 0; r < rows.size(); ++r) column[r] = rows[r][d];
    out[d] = percentile(column, 0.05);
    out[dim + d] = percentile(column, 0.95);
  }
  if (rows.size() >= 2) {
    std::vector<double> dist(rows.size() - 1);
    for (std::size_t r = 0; r + 1 < rows.size(); ++r) {
      dist[r] = std::sqrt(simd::squared_distance(rows[r], rows[r + 1]));
    }
    out[2 * dim] = percentile(dist, 0.05);
    out[2 * dim + 1] = percentile(dist, 0.95);
  }
  return out;
}

DocVecResult docvec_features(const std::string& ticket_id, const TokenList& tokens, const DocEmbedding& model) {
  if (auto v = model.find(ticket_id)) {
    const bool empty = std::find(model.empty_docs().begin(), model.empty_docs().end(), ticket_id) !=
                       model.empty_docs().end();
    return {std::vector<double>(v->begin(), v->end()), empty ? DocVecSource::empty : DocVecSource::trained};
  }
  bool all_oov = false;
  auto values = infer_docvec(model, tokens, mix_seed(model.config().seed, stable_hash(ticket_id)), &all_oov);
  return {std::move(values), all_oov ? DocVecSource::empty : DocVecSource::inferred};
}

std::vector<std::string> enumerate_ngrams(const TokenList& tokens, std::size_t n_max) {
  std::set<std::string> grams;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string gram;
    for (std::size_t n = 1; n <= n_max && i + n <= tokens.size(); ++n) {
      if (n > 1) gram += '_';
      gram += tokens[i + n - 1];
      grams.insert(gram);
    }
  }
  return {grams.begin(), grams.end()};
}

std::vector<std::string> select_ngrams(std::span<const TokenList> labeled_docs, std::size_t n_max,
                                       std::size_t min_docs) {
  std::map<std::string, std::size_t> df;
  for (const TokenList& doc : labeled_docs) {
    for (auto& g : enumerate_ngrams(doc, n_max)) ++df[g];
  }
  std::vector<std::string> out;
  for (const auto& [gram, count] : df) {
    if (count >= min_docs && labeled_docs.size() - count >= min_docs) out.push_back(gram);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assembly

FeatureVector featurize(const Ticket& ticket, const FeatureContext& context) {
  if (!context.pretrained || !context.word_embedding || !context.doc_embedding) {
    throw UsageError("feature context is missing an embedding");
  }
  if (context.word_embedding->dim() != kWordVecDim) throw DataError("word embedding must be 10-dimensional");
  if (context.doc_embedding->dim() != kDocVecDim) throw DataError("document embedding must be 20-dimensional");

  const std::string text = free_text(ticket);
  const TokenList tokens = tokenize_clean(text);

  FeatureVector fv;
  fv.ticket_id = ticket.id;
  fv.values.reserve(context.registry.size());
  auto append = [&](const std::vector<double>& part) { fv.values.insert(fv.values.end(), part.begin(), part.end()); };
  append(metadata_features(ticket));
  append(count_features(text));
  append(keyphrase_features(text));
  append(concept_features(tokenize_words(text), *context.pretrained));
  append(wordvec_features(tokens, *context.word_embedding));
  DocVecResult doc = docvec_features(ticket.id, tokens, *context.doc_embedding);
  fv.docvec_source = doc.source;
  append(doc.values);

  const auto grams = context.registry.ngrams();
  if (!grams.empty()) {
    const auto present = enumerate_ngrams(tokens, 3);
    for (const auto& g : grams) fv.values.push_back(std::binary_search(present.begin(), present.end(), g) ? 1.0 : 0.0);
  }
  if (fv.values.size() != context.registry.size()) throw std::logic_error("feature vector length mismatch");
  for (double v : fv.values) {
    if (!std::isfinite(v)) throw DataError("non-finite feature value for ticket " + ticket.id);
  }
  return fv;
}

std::optional<std::size_t> FeatureMatrix::row_of(std::string_view id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> rows_wanted) const {
  FeatureMatrix out;
  out.registry = registry;
  out.values.reserve(rows_wanted.size() * cols());
  for (std::size_t r : rows_wanted) {
    out.ids.push_back(ids.at(r));
    const auto src = row(r);
    out.values.insert(out.values.end(), src.begin(), src.end());
    if (!docvec_sources.empty()) out.docvec_sources.push_back(docvec_sources[r]);
  }
  return out;
}

FeatureMatrix featurize_corpus(const Corpus& corpus, const FeatureContext& context) {
  if (context.pretrained) require_concept_targets(*context.pretrained);
  FeatureMatrix m;
  m.registry = context.registry;
  m.ids.reserve(corpus.size());
  m.values.reserve(corpus.size() * context.registry.size());
  for (const auto& [id, ticket] : corpus.tickets()) {
    FeatureVector fv = featurize(ticket, context);
    m.ids.push_back(id);
    m.values.insert(m.values.end(), fv.values.begin(), fv.values.end());
    m.docvec_sources.push_back(fv.docvec_source);
  }
  return m;
}

void write_feature_csv(const FeatureMatrix& matrix, std::ostream& out) {
  out << "ticket_id";
  for (const auto& f : matrix.registry.features()) out << ',' << f.name;
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    if (matrix.ids[i].find_first_of(",\"\n") != std::string::npos) {
      throw DataError("ticket id not representable in CSV: " + matrix.ids[i]);
    }
    out << matrix.ids[i];
    for (double v : matrix.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

void write_feature_csv(const FeatureMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature matrix: " + path.string());
  write_feature_csv(matrix, out);
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read feature matrix: " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      cols.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return cols;
  };
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty feature file");
  auto header = split(line);
  if (header.empty() || header[0] != "ticket_id") throw DataError(path.string() + ": missing ticket_id column");
  header.erase(header.begin());
  FeatureMatrix m;
  m.registry = FeatureRegistry::from_names(header);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split(line);
    if (cols.size() != header.size() + 1) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": wrong column count");
    }
    m.ids.push_back(cols[0]);
    for (std::size_t c = 1; c < cols.size(); ++c) {
      double v;
      const auto res = std::from_chars(cols[c].data(), cols[c].data() + cols[c].size(), v);
      if (res.ec != std::errc() || res.ptr != cols[c].data() + cols[c].size()) {
        throw DataError(path.string() + ": line " + std::to_string(line_no) + ": bad number");
      }
      m.values.push_back(v);
    }
    m.docvec_sources.push_back(DocVecSource::trained);
  }
  return m;
}

}  // namespace tdd
