#include "tdd/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tdd/errors.hpp"
#include "tdd/rng.hpp"
#include "tdd/simd/kernels.hpp"

namespace tdd {

// ---------------------------------------------------------------------------
// WordEmbedding

WordEmbedding::WordEmbedding(std::size_t dim, std::vector<std::string> vocab, std::vector<double> vectors)
    : dim_(dim), vocab_(std::move(vocab)), vectors_(std::move(vectors)) {
  if (vectors_.size() != vocab_.size() * dim_) throw DataError("embedding matrix shape mismatch");
  index_.reserve(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], i).second) throw DataError("duplicate vocabulary entry: " + vocab_[i]);
  }
  for (double v : vectors_) {
    if (!std::isfinite(v)) throw DataError("non-finite value in embedding");
  }
}

std::optional<std::size_t> WordEmbedding::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::span<const double>> WordEmbedding::find(std::string_view word) const {
  if (auto i = index_of(word)) return row(*i);
  return std::nullopt;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  const double uu = simd::squared_norm(u);
  const double vv = simd::squared_norm(v);
  if (uu == 0.0 || vv == 0.0) return 0.0;
  const double c = simd::dot(u, v) / std::sqrt(uu * vv);
  return std::clamp(c, -1.0, 1.0);
}

namespace {

bool parse_double(std::string_view s, double& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// -log(sigmoid(x)) without overflow.
double softplus_neg(double x) { return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

/// Negative-sampling distribution proportional to count^0.75.
class NegativeSampler {
 public:
  explicit NegativeSampler(std::span<const std::uint64_t> counts) : cumulative_(counts.size()) {
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      total += std::pow(static_cast<double>(counts[i]), 0.75);
      cumulative_[i] = total;
    }
    for (double& c : cumulative_) c /= total;
  }

  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

std::vector<std::vector<std::uint32_t>> encode_docs(std::span<const TokenList> docs,
                                                    const std::unordered_map<std::string, std::size_t>& index) {
  std::vector<std::vector<std::uint32_t>> out(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const std::string& tok : docs[d]) {
      if (auto it = index.find(tok); it != index.end()) out[d].push_back(static_cast<std::uint32_t>(it->second));
    }
  }
  return out;
}

void init_uniform(std::vector<double>& v, std::size_t dim, Rng& rng) {
  const double half = 0.5 / static_cast<double>(dim);
  for (double& x : v) x = rng.uniform(-half, half);
}

/// One positive/negative-sampling update of `hidden` against output rows.
/// Accumulates the hidden-layer gradient into `grad`, updates `output` when
/// `train_output` is set, and returns the loss contribution.
double negative_sampling_step(std::span<const double> hidden, std::uint32_t target, std::size_t negatives,
                              const NegativeSampler& sampler, Rng& rng, std::vector<double>& output,
                              std::size_t dim, double lr, std::span<double> grad, bool train_output) {
  double loss = 0.0;
  for (std::size_t n = 0; n <= negatives; ++n) {
    std::uint32_t word;
    double label;
    if (n == 0) {
      word = target;
      label = 1.0;
    } else {
      word = static_cast<std::uint32_t>(sampler.draw(rng));
      if (word == target) continue;
      label = 0.0;
    }
    std::span<double> out_row(output.data() + static_cast<std::size_t>(word) * dim, dim);
    const double f = simd::dot(hidden, out_row);
    const double p = sigmoid(f);
    loss += label > 0.5 ? softplus_neg(f) : softplus_neg(-f);
    const double g = (label - p) * lr;
    simd::axpy(g, out_row, grad);
    if (train_output) simd::axpy(g, hidden, out_row);
  }
  return loss;
}

}  // namespace

WordEmbedding load_pretrained(const std::filesystem::path& path, std::size_t expected_dim,
                              const std::unordered_set<std::string>* restrict_vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read embedding file: " + path.string());
  std::vector<std::string> vocab;
  std::vector<double> vectors;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cols = split_spaces(line);
    if (cols.empty()) continue;
    if (cols.size() - 1 != expected_dim) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                      std::to_string(expected_dim) + " values, found " + std::to_string(cols.size() - 1));
    }
    std::string word(cols[0]);
    if (restrict_vocab && !restrict_vocab->contains(word)) continue;
    if (!seen.insert(word).second) continue;
    for (std::size_t c = 1; c < cols.size(); ++c) {
      double v;
      if (!parse_double(cols[c], v) || !std::isfinite(v)) {
        throw DataError(path.string() + ": line " + std::to_string(line_no) + ": bad number '" +
                        std::string(cols[c]) + "'");
      }
      vectors.push_back(v);
    }
    vocab.push_back(std::move(word));
  }
  if (vocab.empty()) throw DataError("embedding is empty after vocabulary restriction: " + path.string());
  return WordEmbedding(expected_dim, std::move(vocab), std::move(vectors));
}

std::vector<std::string> select_vocabulary(std::span<const TokenList> docs, std::size_t vocab_size,
                                           std::vector<std::uint64_t>* counts) {
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const TokenList& doc : docs) {
    for (const std::string& tok : doc) ++freq[tok];
  }
  std::vector<std::pair<std::string, std::uint64_t>> items(freq.begin(), freq.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (items.size() > vocab_size) items.resize(vocab_size);
  std::vector<std::string> vocab;
  vocab.reserve(items.size());
  if (counts) counts->clear();
  for (auto& [word, count] : items) {
    vocab.push_back(word);
    if (counts) counts->push_back(count);
  }
  return vocab;
}

CbowResult train_cbow(std::span<const TokenList> docs, const CbowConfig& config) {
  if (docs.empty()) throw DataError("cannot train word embedding on an empty corpus");
  if (config.dim == 0 || config.window == 0) throw UsageError("CBOW dim and window must be positive");
  std::vector<std::uint64_t> counts;
  std::vector<std::string> vocab = select_vocabulary(docs, config.vocab_size, &counts);
  if (vocab.size() < 2) throw DataError("word embedding needs at least two distinct tokens");

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], i);
  const auto encoded = encode_docs(docs, index);
  const NegativeSampler sampler(counts);
  const std::size_t dim = config.dim;

  Rng rng(config.seed);
  std::vector<double> input(vocab.size() * dim);
  init_uniform(input, dim, rng);
  std::vector<double> output(vocab.size() * dim, 0.0);

  std::uint64_t words_per_epoch = 0;
  for (const auto& d : encoded) words_per_epoch += d.size();
  const double total_words = static_cast<double>(words_per_epoch * config.epochs);

  CbowResult result;
  std::vector<double> hidden(dim);
  std::vector<double> grad(dim);
  std::uint64_t processed = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = 0.0;
    std::uint64_t updates = 0;
    for (const auto& doc : encoded) {
      for (std::size_t pos = 0; pos < doc.size(); ++pos, ++processed) {
        const double lr = std::max(config.min_learning_rate,
                                   config.learning_rate * (1.0 - static_cast<double>(processed) / total_words));
        const std::size_t reduced = config.window - static_cast<std::size_t>(rng.below(config.window));
        const std::size_t lo = pos >= reduced ? pos - reduced : 0;
        const std::size_t hi = std::min(doc.size() - 1, pos + reduced);

        std::fill(hidden.begin(), hidden.end(), 0.0);
        std::size_t n_ctx = 0;
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          simd::axpy(1.0, std::span<const double>(input.data() + doc[c] * dim, dim), hidden);
          ++n_ctx;
        }
        if (n_ctx == 0) continue;
        for (double& h : hidden) h /= static_cast<double>(n_ctx);

        std::fill(grad.begin(), grad.end(), 0.0);
        loss += negative_sampling_step(hidden, doc[pos], config.negative, sampler, rng, output, dim, lr, grad, true);
        ++updates;
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          simd::axpy(1.0, grad, std::span<double>(input.data() + doc[c] * dim, dim));
        }
      }
    }
    result.epoch_loss.push_back(updates ? loss / static_cast<double>(updates) : 0.0);
  }

  result.embedding = WordEmbedding(dim, std::move(vocab), std::move(input));
  auto& meta = result.embedding.metadata;
  meta["algorithm"] = "cbow-negative-sampling";
  meta["dim"] = std::to_string(config.dim);
  meta["vocab_size"] = std::to_string(config.vocab_size);
  meta["window"] = std::to_string(config.window);
  meta["negative"] = std::to_string(config.negative);
  meta["epochs"] = std::to_string(config.epochs);
  meta["learning_rate"] = fmt17(config.learning_rate);
  meta["min_learning_rate"] = fmt17(config.min_learning_rate);
  meta["seed"] = std::to_string(config.seed);
  return result;
}

// ---------------------------------------------------------------------------
// Document vectors

std::string_view to_string(DocVecSource source) {
  switch (source) {
    case DocVecSource::trained: return "trained";
    case DocVecSource::inferred: return "inferred";
    case DocVecSource::empty: return "empty";
  }
  return "unknown";
}

void DocEmbedding::rebuild_indexes() {
  doc_index_.clear();
  word_index_.clear();
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    if (!doc_index_.emplace(doc_ids_[i], i).second) throw DataError("duplicate document id: " + doc_ids_[i]);
  }
  for (std::size_t i = 0; i < vocab_.size(); ++i) word_index_.emplace(vocab_[i], i);
}

std::optional<std::span<const double>> DocEmbedding::find(std::string_view doc_id) const {
  auto it = doc_index_.find(std::string(doc_id));
  if (it == doc_index_.end()) return std::nullopt;
  return doc_vector(it->second);
}

std::optional<std::size_t> DocEmbedding::word_index(std::string_view word) const {
  auto it = word_index_.find(std::string(word));
  if (it == word_index_.end()) return std::nullopt;
  return it->second;
}

bool DocEmbedding::operator==(const DocEmbedding& o) const {
  return config_.dim == o.config_.dim && doc_ids_ == o.doc_ids_ && doc_vectors_ == o.doc_vectors_ &&
         vocab_ == o.vocab_ && counts_ == o.counts_ && output_weights_ == o.output_weights_ &&
         empty_docs_ == o.empty_docs_;
}

DocEmbedding train_docvecs(std::span<const std::string> ids, std::span<const TokenList> docs,
                           const DocVecConfig& config) {
  if (docs.empty()) throw DataError("cannot train document embedding on an empty corpus");
  if (ids.size() != docs.size()) throw UsageError("document ids and token lists differ in length");
  if (config.dim == 0) throw UsageError("document embedding dim must be positive");

  DocEmbedding model;
  model.config_ = config;
  model.doc_ids_.assign(ids.begin(), ids.end());
  model.vocab_ = select_vocabulary(docs, config.vocab_size, &model.counts_);
  if (model.vocab_.empty()) throw DataError("document embedding corpus has no tokens");
  model.rebuild_indexes();

  std::unordered_map<std::string, std::size_t> index(model.word_index_.begin(), model.word_index_.end());
  const auto encoded = encode_docs(docs, index);
  const NegativeSampler sampler(model.counts_);
  const std::size_t dim = config.dim;

  Rng rng(config.seed);
  model.doc_vectors_.resize(docs.size() * dim);
  init_uniform(model.doc_vectors_, dim, rng);
  model.output_weights_.assign(model.vocab_.size() * dim, 0.0);

  std::uint64_t words_per_epoch = 0;
  for (const auto& d : encoded) words_per_epoch += d.size();
  const double total_words = static_cast<double>(std::max<std::uint64_t>(1, words_per_epoch * config.epochs));

  std::vector<double> grad(dim);
  std::uint64_t processed = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t d = 0; d < encoded.size(); ++d) {
      std::span<double> dv(model.doc_vectors_.data() + d * dim, dim);
      for (std::uint32_t word : encoded[d]) {
        const double lr = std::max(config.min_learning_rate,
                                   config.learning_rate * (1.0 - static_cast<double>(processed++) / total_words));
        std::fill(grad.begin(), grad.end(), 0.0);
        negative_sampling_step(dv, word, config.negative, sampler, rng, model.output_weights_, dim, lr, grad, true);
        simd::axpy(1.0, grad, dv);
      }
    }
  }

  for (std::size_t d = 0; d < encoded.size(); ++d) {
    if (encoded[d].empty()) {
      std::fill_n(model.doc_vectors_.begin() + static_cast<std::ptrdiff_t>(d * dim), dim, 0.0);
      model.empty_docs_.push_back(model.doc_ids_[d]);
    }
  }
  return model;
}

std::vector<double> infer_docvec(const DocEmbedding& model, const TokenList& tokens, std::uint64_t seed,
                                 bool* all_oov) {
  const std::size_t dim = model.dim();
  std::vector<std::uint32_t> words;
  for (const std::string& tok : tokens) {
    if (auto i = model.word_index(tok)) words.push_back(static_cast<std::uint32_t>(*i));
  }
  if (all_oov) *all_oov = words.empty();
  std::vector<double> vec(dim, 0.0);
  if (words.empty()) return vec;

  Rng rng(seed);
  init_uniform(vec, dim, rng);
  const NegativeSampler sampler(model.counts_);
  // Output layer is frozen; train_output=false below means it is only read.
  std::vector<double>& frozen = const_cast<std::vector<double>&>(model.output_weights_);
  std::vector<double> grad(dim);
  const std::size_t steps = model.config_.infer_steps;
  for (std::size_t step = 0; step < steps; ++step) {
    const double lr =
        model.config_.learning_rate -
        (model.config_.learning_rate - model.config_.min_learning_rate) * static_cast<double>(step) /
            static_cast<double>(std::max<std::size_t>(1, steps));
    for (std::uint32_t word : words) {
      std::fill(grad.begin(), grad.end(), 0.0);
      negative_sampling_step(vec, word, model.config_.negative, sampler, rng, frozen, dim, lr, grad, false);
      simd::axpy(1.0, grad, vec);
    }
  }
  return vec;
}

// ---------------------------------------------------------------------------
// Persistence

void save_word_embedding(const WordEmbedding& embedding, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embedding: " + path.string());
  out << "#tdd-word-embedding 1\n";
  for (const auto& [key, value] : embedding.metadata) out << "#meta " << key << '=' << value << '\n';
  out << embedding.size() << ' ' << embedding.dim() << '\n';
  for (std::size_t i = 0; i < embedding.size(); ++i) {
    out << embedding.vocab()[i];
    for (double v : embedding.row(i)) out << ' ' << fmt17(v);
    out << '\n';
  }
}

WordEmbedding load_word_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read embedding: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "#tdd-word-embedding 1") {
    throw DataError(path.string() + ": not a word-embedding file (version 1)");
  }
  std::map<std::string, std::string> meta;
  std::size_t n = 0, dim = 0;
  while (std::getline(in, line)) {
    if (line.starts_with("#meta ")) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw DataError(path.string() + ": bad metadata line");
      meta[line.substr(6, eq - 6)] = line.substr(eq + 1);
      continue;
    }
    std::istringstream header(line);
    if (!(header >> n >> dim)) throw DataError(path.string() + ": bad header");
    break;
  }
  std::vector<std::string> vocab;
  std::vector<double> vectors;
  vocab.reserve(n);
  vectors.reserve(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw DataError(path.string() + ": truncated");
    const auto cols = split_spaces(line);
    if (cols.size() != dim + 1) throw DataError(path.string() + ": bad row " + std::to_string(i));
    vocab.emplace_back(cols[0]);
    for (std::size_t c = 1; c <= dim; ++c) {
      double v;
      if (!parse_double(cols[c], v)) throw DataError(path.string() + ": bad number");
      vectors.push_back(v);
    }
  }
  WordEmbedding e(dim, std::move(vocab), std::move(vectors));
  e.metadata = std::move(meta);
  return e;
}

void save_doc_embedding(const DocEmbedding& e, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write document embedding: " + path.string());
  const DocVecConfig& c = e.config_;
  out << "#tdd-doc-embedding 1\n";
  out << "config " << c.dim << ' ' << c.vocab_size << ' ' << c.negative << ' ' << c.epochs << ' '
      << fmt17(c.learning_rate) << ' ' << fmt17(c.min_learning_rate) << ' ' << c.infer_steps << ' ' << c.seed
      << '\n';
  out << "vocab " << e.vocab_.size() << '\n';
  for (std::size_t i = 0; i < e.vocab_.size(); ++i) {
    out << e.vocab_[i] << ' ' << e.counts_[i];
    for (std::size_t d = 0; d < c.dim; ++d) out << ' ' << fmt17(e.output_weights_[i * c.dim + d]);
    out << '\n';
  }
  out << "docs " << e.doc_ids_.size() << '\n';
  for (std::size_t i = 0; i < e.doc_ids_.size(); ++i) {
    if (e.doc_ids_[i].find_first_of(" \t\n") != std::string::npos) {
      throw DataError("document id contains whitespace: " + e.doc_ids_[i]);
    }
    out << e.doc_ids_[i];
    for (double v : e.doc_vector(i)) out << ' ' << fmt17(v);
    out << '\n';
  }
  out << "empty " << e.empty_docs_.size() << '\n';
  for (const std::string& id : e.empty_docs_) out << id << '\n';
}

DocEmbedding load_doc_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read document embedding: " + path.string());
  auto fail = [&](const std::string& what) { return DataError(path.string() + ": " + what); };
  std::string line;
  if (!std::getline(in, line) || line != "#tdd-doc-embedding 1") throw fail("not a document-embedding file");

  DocEmbedding e;
  DocVecConfig& c = e.config_;
  {
    std::getline(in, line);
    std::istringstream s(line);
    std::string tag, lr, min_lr;
    if (!(s >> tag >> c.dim >> c.vocab_size >> c.negative >> c.epochs >> lr >> min_lr >> c.infer_steps >> c.seed) ||
        tag != "config" || !parse_double(lr, c.learning_rate) || !parse_double(min_lr, c.min_learning_rate)) {
      throw fail("bad config line");
    }
  }
  auto read_count = [&](std::string_view tag) {
    std::getline(in, line);
    std::istringstream s(line);
    std::string t;
    std::size_t n;
    if (!(s >> t >> n) || t != tag) throw fail("expected section '" + std::string(tag) + "'");
    return n;
  };
  const std::size_t n_vocab = read_count("vocab");
  for (std::size_t i = 0; i < n_vocab; ++i) {
    if (!std::getline(in, line)) throw fail("truncated vocabulary");
    const auto cols = split_spaces(line);
    if (cols.size() != c.dim + 2) throw fail("bad vocabulary row");
    e.vocab_.emplace_back(cols[0]);
    std::uint64_t count = 0;
    std::from_chars(cols[1].data(), cols[1].data() + cols[1].size(), count);
    e.counts_.push_back(count);
    for (std::size_t d = 0; d < c.dim; ++d) {
      double v;
      if (!parse_double(cols[d + 2], v)) throw fail("bad number");
      e.output_weights_.push_back(v);
    }
  }
  const std::size_t n_docs = read_count("docs");
  for (std::size_t i = 0; i < n_docs; ++i) {
    if (!std::getline(in, line)) throw fail("truncated documents");
    const auto cols = split_spaces(line);
    if (cols.size() != c.dim + 1) throw fail("bad document row");
    e.doc_ids_.emplace_back(cols[0]);
    for (std::size_t d = 0; d < c.dim; ++d) {
      double v;
      if (!parse_double(cols[d + 1], v)) throw fail("bad number");
      e.doc_vectors_.push_back(v);
    }
  }
  const std::size_t n_empty = read_count("empty");
  for (std::size_t i = 0; i < n_empty; ++i) {
    if (!std::getline(in, line)) throw fail("truncated empty list");
    e.empty_docs_.push_back(line);
  }
  e.rebuild_indexes();
  return e;
}

}  // namespace tdd
