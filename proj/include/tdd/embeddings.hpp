#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tdd/textprep.hpp"

namespace tdd {

/// Row-major |vocab| x dim matrix of word vectors with exact-match lookup.
class WordEmbedding {
 public:
  WordEmbedding() = default;
  WordEmbedding(std::size_t dim, std::vector<std::string> vocab, std::vector<double> vectors);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vocab_.size(); }
  const std::vector<std::string>& vocab() const { return vocab_; }
  const std::vector<double>& data() const { return vectors_; }

  std::span<const double> row(std::size_t i) const { return {vectors_.data() + i * dim_, dim_}; }
  std::optional<std::size_t> index_of(std::string_view word) const;
  std::optional<std::span<const double>> find(std::string_view word) const;

  bool operator==(const WordEmbedding& other) const {
    return dim_ == other.dim_ && vocab_ == other.vocab_ && vectors_ == other.vectors_;
  }

  /// Free-form provenance lines written into the saved file (config, seed).
  std::map<std::string, std::string> metadata;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> vocab_;
  std::vector<double> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// GloVe-style text: "word v1 ... v_dim" per line. Lines with the wrong
/// column count throw DataError naming the line. When `restrict_vocab` is
/// given only those words are kept; an empty result throws.
WordEmbedding load_pretrained(const std::filesystem::path& path, std::size_t expected_dim = 100,
                              const std::unordered_set<std::string>* restrict_vocab = nullptr);

/// dot(u,v) / (|u| |v|); 0 when either vector is zero.
double cosine(std::span<const double> u, std::span<const double> v);

struct CbowConfig {
  std::size_t dim = 10;
  std::size_t vocab_size = 5000;
  std::size_t window = 5;
  std::size_t negative = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  double min_learning_rate = 0.0001;
  std::uint64_t seed = 1;
};

struct CbowResult {
  WordEmbedding embedding;
  std::vector<double> epoch_loss;  // mean negative-sampling loss per epoch
};

/// Top-`vocab_size` tokens by frequency, ties broken lexicographically.
std::vector<std::string> select_vocabulary(std::span<const TokenList> docs, std::size_t vocab_size,
                                           std::vector<std::uint64_t>* counts = nullptr);

/// Word2vec CBOW (mean of context vectors) with negative sampling.
/// Deterministic for a given seed. Throws DataError on fewer than two
/// distinct tokens.
CbowResult train_cbow(std::span<const TokenList> docs, const CbowConfig& config);

struct DocVecConfig {
  std::size_t dim = 20;
  std::size_t vocab_size = 5000;
  std::size_t negative = 5;
  std::size_t epochs = 10;
  double learning_rate = 0.025;
  double min_learning_rate = 0.0001;
  std::size_t infer_steps = 50;
  std::uint64_t seed = 1;
};

enum class DocVecSource { trained, inferred, empty };

std::string_view to_string(DocVecSource source);

/// PV-DBOW document model: per-document vectors plus the frozen output
/// layer needed to infer vectors for unseen documents.
class DocEmbedding {
 public:
  DocEmbedding() = default;

  std::size_t dim() const { return config_.dim; }
  const DocVecConfig& config() const { return config_; }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  std::span<const double> doc_vector(std::size_t i) const { return {doc_vectors_.data() + i * dim(), dim()}; }
  std::optional<std::span<const double>> find(std::string_view doc_id) const;
  std::optional<std::size_t> word_index(std::string_view word) const;

  /// Training documents with no in-vocabulary tokens (assigned zero).
  const std::vector<std::string>& empty_docs() const { return empty_docs_; }

  bool operator==(const DocEmbedding& other) const;

 private:
  friend DocEmbedding train_docvecs(std::span<const std::string>, std::span<const TokenList>, const DocVecConfig&);
  friend std::vector<double> infer_docvec(const DocEmbedding&, const TokenList&, std::uint64_t, bool*);
  friend void save_doc_embedding(const DocEmbedding&, const std::filesystem::path&);
  friend DocEmbedding load_doc_embedding(const std::filesystem::path&);

  void rebuild_indexes();

  DocVecConfig config_;
  std::vector<std::string> doc_ids_;
  std::vector<double> doc_vectors_;
  std::vector<std::string> vocab_;
  std::vector<std::uint64_t> counts_;
  std::vector<double> output_weights_;
  std::vector<std::string> empty_docs_;
  std::unordered_map<std::string, std::size_t> doc_index_;
  std::unordered_map<std::string, std::size_t> word_index_;
};

/// Trains document vectors; `ids` and `docs` are parallel.
DocEmbedding train_docvecs(std::span<const std::string> ids, std::span<const TokenList> docs,
                           const DocVecConfig& config);

/// Fits a fresh vector for `tokens` against the frozen output layer. Returns
/// the zero vector (and sets *all_oov) when no token is in the vocabulary.
std::vector<double> infer_docvec(const DocEmbedding& model, const TokenList& tokens, std::uint64_t seed,
                                 bool* all_oov = nullptr);

void save_word_embedding(const WordEmbedding& embedding, const std::filesystem::path& path);
WordEmbedding load_word_embedding(const std::filesystem::path& path);
void save_doc_embedding(const DocEmbedding& embedding, const std::filesystem::path& path);
DocEmbedding load_doc_embedding(const std::filesystem::path& path);

}  // namespace tdd
