#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tdd/corpus.hpp"
#include "tdd/embeddings.hpp"
#include "tdd/textprep.hpp"

namespace tdd {

enum class FeatureFamily { metadata, count, keyphrase, ngram, concept_word, wordvec, docvec };

std::string_view to_string(FeatureFamily family);

struct FeatureSpec {
  std::string name;
  FeatureFamily family;

  bool operator==(const FeatureSpec&) const = default;
};

inline constexpr std::string_view kDefaultRegistryVersion = "tdd-features-v1";

inline constexpr std::array<std::string_view, 25> kKeyPhrases = {
    "debt",      "hack",         "workaround",  "cleanup",      "clean-up", "clean up", "give up",
    "problematic", "not up to date", "inconsisten", "short term", "deviate", "tweak",    "mess",
    "buggy",     "complex",      "doesn't work", "out of date", "insufficient", "rework", "remove",
    "redesign",  "refactor",     "depend",      "structure"};

inline constexpr std::array<std::string_view, 10> kConceptTargets = {
    "deviate", "outdated", "redundant", "redesign", "decouple",
    "complicated", "regret", "corrupt", "horrible", "delay"};

inline constexpr std::size_t kWordVecDim = 10;
inline constexpr std::size_t kDocVecDim = 20;

/// Ordered, named feature list. The default registry holds 105 features;
/// n-gram flags, when enabled, are appended after them.
class FeatureRegistry {
 public:
  static FeatureRegistry default_registry();

  /// Rebuilds a registry from column names (CSV headers, model files).
  /// Throws DataError on an unknown name.
  static FeatureRegistry from_names(std::span<const std::string> names);

  /// Copy of this registry with NGRAM_<gram> flags appended.
  FeatureRegistry with_ngrams(std::span<const std::string> grams) const;

  const std::vector<FeatureSpec>& features() const { return features_; }
  std::vector<std::string> names() const;
  std::size_t size() const { return features_.size(); }
  const std::string& version() const { return version_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  /// The n-grams (without prefix) carried by this registry, in order.
  std::vector<std::string> ngrams() const;

  bool operator==(const FeatureRegistry& other) const {
    return version_ == other.version_ && features_ == other.features_;
  }

 private:
  void add(std::string name, FeatureFamily family);

  std::string version_;
  std::vector<FeatureSpec> features_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Linear interpolation between order statistics at h = q (n - 1).
/// Throws UsageError on an empty list or q outside [0, 1].
double percentile(std::span<const double> values, double q);

std::vector<double> metadata_features(const Ticket& ticket);

/// The nine count features of a ticket's free text.
std::vector<double> count_features(std::string_view text);

/// Case-insensitive substring flags for the 25 key phrases.
std::vector<double> keyphrase_features(std::string_view text);

struct PhraseSpan {
  std::size_t phrase;  // index into kKeyPhrases
  std::size_t begin;   // byte offsets into the text, [begin, end)
  std::size_t end;

  bool operator==(const PhraseSpan&) const = default;
};

/// Every occurrence of every key phrase, ordered by (begin, phrase).
std::vector<PhraseSpan> keyphrase_spans(std::string_view text);

/// Throws DataError naming the first concept target absent from `pretrained`.
void require_concept_targets(const WordEmbedding& pretrained);

/// Max cosine between each concept target and the distinct `words` found
/// in the embedding; 0 for a target when no word is in the vocabulary.
std::vector<double> concept_features(std::span<const std::string> words, const WordEmbedding& pretrained);

/// Per-dimension 5th/95th percentiles of the in-vocabulary token vectors
/// followed by the 5th/95th percentiles of successive-row distances.
std::vector<double> wordvec_features(const TokenList& tokens, const WordEmbedding& embedding);

struct DocVecResult {
  std::vector<double> values;
  DocVecSource source;
};

/// Stored vector for a trained ticket, otherwise an inferred one seeded by
/// the ticket id.
DocVecResult docvec_features(const std::string& ticket_id, const TokenList& tokens, const DocEmbedding& model);

/// Every 1..n_max gram of `tokens`, joined with '_'.
std::vector<std::string> enumerate_ngrams(const TokenList& tokens, std::size_t n_max = 3);

/// Grams present in at least `min_docs` documents and absent from at least
/// `min_docs`, sorted.
std::vector<std::string> select_ngrams(std::span<const TokenList> labeled_docs, std::size_t n_max = 3,
                                       std::size_t min_docs = 3);

struct FeatureContext {
  const WordEmbedding* pretrained = nullptr;
  const WordEmbedding* word_embedding = nullptr;
  const DocEmbedding* doc_embedding = nullptr;
  FeatureRegistry registry = FeatureRegistry::default_registry();
};

struct FeatureVector {
  std::string ticket_id;
  std::vector<double> values;
  DocVecSource docvec_source = DocVecSource::trained;
};

/// All families concatenated in registry order.
FeatureVector featurize(const Ticket& ticket, const FeatureContext& context);

/// Row-major matrix; rows sorted by ticket id.
struct FeatureMatrix {
  FeatureRegistry registry;
  std::vector<std::string> ids;
  std::vector<double> values;
  std::vector<DocVecSource> docvec_sources;

  std::size_t rows() const { return ids.size(); }
  std::size_t cols() const { return registry.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols(), cols()}; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
  std::optional<std::size_t> row_of(std::string_view id) const;

  /// Matrix restricted to `rows` (indices into this matrix), in that order.
  FeatureMatrix subset(std::span<const std::size_t> rows) const;

  bool operator==(const FeatureMatrix&) const = default;
};

FeatureMatrix featurize_corpus(const Corpus& corpus, const FeatureContext& context);

/// Header "ticket_id,<names>", values with 17 significant digits.
void write_feature_csv(const FeatureMatrix& matrix, std::ostream& out);
void write_feature_csv(const FeatureMatrix& matrix, const std::filesystem::path& path);
FeatureMatrix read_feature_csv(const std::filesystem::path& path);

}  // namespace tdd
