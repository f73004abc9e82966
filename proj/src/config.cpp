#include "tdd/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "tdd/errors.hpp"

namespace tdd {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string unquote(std::string_view v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\''))) {
    v = v.substr(1, v.size() - 2);
  }
  return std::string(v);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw UsageError("config key '" + std::string(key) + "': not a number: '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("config key '" + std::string(key) + "': not a boolean: '" + std::string(v) + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Key {
  std::string name;
  std::function<void(PipelineConfig&, std::string_view, const std::filesystem::path&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Key number_key(std::string name, T PipelineConfig::*field) {
  return {name,
          [name, field](PipelineConfig& c, std::string_view v, const auto&) { c.*field = parse_number<T>(name, v); },
          [field](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*field);
            else return std::to_string(c.*field);
          }};
}

template <typename S, typename T>
Key nested_key(std::string name, S PipelineConfig::*section, T S::*field) {
  return {name,
          [name, section, field](PipelineConfig& c, std::string_view v, const auto&) {
            (c.*section).*field = parse_number<T>(name, v);
          },
          [section, field](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt((c.*section).*field);
            else return std::to_string((c.*section).*field);
          }};
}

Key bool_key(std::string name, bool PipelineConfig::*field) {
  return {name, [name, field](PipelineConfig& c, std::string_view v, const auto&) { c.*field = parse_bool(name, v); },
          [field](const PipelineConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

Key path_key(std::string name, std::filesystem::path PipelineConfig::*field) {
  return {name,
          [field](PipelineConfig& c, std::string_view v, const std::filesystem::path& base) {
            std::filesystem::path p{std::string(v)};
            c.*field = (p.is_relative() && !base.empty() && !p.empty()) ? base / p : p;
          },
          [field](const PipelineConfig& c) { return (c.*field).string(); }};
}

template <typename S>
void add_gbm_keys(std::vector<Key>& keys, const std::string& prefix, S PipelineConfig::*section) {
  keys.push_back(nested_key(prefix + ".num_trees", section, &TrainConfig::num_trees));
  keys.push_back(nested_key(prefix + ".max_leaves", section, &TrainConfig::max_leaves));
  keys.push_back(nested_key(prefix + ".min_data_in_leaf", section, &TrainConfig::min_data_in_leaf));
  keys.push_back(nested_key(prefix + ".learning_rate", section, &TrainConfig::learning_rate));
  keys.push_back(nested_key(prefix + ".l2_reg", section, &TrainConfig::l2_reg));
  keys.push_back(nested_key(prefix + ".min_split_gain", section, &TrainConfig::min_split_gain));
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(path_key("corpus", &PipelineConfig::corpus));
    k.push_back(path_key("labels", &PipelineConfig::labels));
    k.push_back(path_key("pretrained", &PipelineConfig::pretrained));
    k.push_back(path_key("out_dir", &PipelineConfig::out_dir));
    k.push_back(number_key("pretrained_dim", &PipelineConfig::pretrained_dim));
    k.push_back(number_key("seed", &PipelineConfig::seed));
    k.push_back(bool_key("ngrams", &PipelineConfig::ngrams));
    k.push_back(number_key("holdout_fraction", &PipelineConfig::holdout_fraction));
    k.push_back(number_key("keyphrase_k", &PipelineConfig::keyphrase_k));
    add_gbm_keys(k, "gbm", &PipelineConfig::gbm);
    add_gbm_keys(k, "sampling", &PipelineConfig::sampling_gbm);
    k.push_back(nested_key("cbow.dim", &PipelineConfig::cbow, &CbowConfig::dim));
    k.push_back(nested_key("cbow.vocab_size", &PipelineConfig::cbow, &CbowConfig::vocab_size));
    k.push_back(nested_key("cbow.window", &PipelineConfig::cbow, &CbowConfig::window));
    k.push_back(nested_key("cbow.negative", &PipelineConfig::cbow, &CbowConfig::negative));
    k.push_back(nested_key("cbow.epochs", &PipelineConfig::cbow, &CbowConfig::epochs));
    k.push_back(nested_key("cbow.learning_rate", &PipelineConfig::cbow, &CbowConfig::learning_rate));
    k.push_back(nested_key("cbow.min_learning_rate", &PipelineConfig::cbow, &CbowConfig::min_learning_rate));
    k.push_back(nested_key("docvec.dim", &PipelineConfig::docvec, &DocVecConfig::dim));
    k.push_back(nested_key("docvec.vocab_size", &PipelineConfig::docvec, &DocVecConfig::vocab_size));
    k.push_back(nested_key("docvec.negative", &PipelineConfig::docvec, &DocVecConfig::negative));
    k.push_back(nested_key("docvec.epochs", &PipelineConfig::docvec, &DocVecConfig::epochs));
    k.push_back(nested_key("docvec.learning_rate", &PipelineConfig::docvec, &DocVecConfig::learning_rate));
    k.push_back(nested_key("docvec.min_learning_rate", &PipelineConfig::docvec, &DocVecConfig::min_learning_rate));
    k.push_back(nested_key("docvec.infer_steps", &PipelineConfig::docvec, &DocVecConfig::infer_steps));
    k.push_back(number_key("active_learning.floor", &PipelineConfig::al_floor));
    k.push_back(number_key("active_learning.batch_size", &PipelineConfig::al_batch_size));
    k.push_back(number_key("eval.bootstrap_replicates", &PipelineConfig::bootstrap_replicates));
    k.push_back(number_key("eval.cv_folds", &PipelineConfig::cv_folds));
    k.push_back(bool_key("prevalence.refit", &PipelineConfig::prevalence_refit));
    k.push_back(number_key("prevalence.replicates", &PipelineConfig::prevalence_replicates));
    k.push_back(bool_key("output.features", &PipelineConfig::write_features));
    return k;
  }();
  return table;
}

}  // namespace

void PipelineConfig::validate() const {
  gbm.validate();
  sampling_gbm.validate();
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw UsageError("holdout_fraction must be in (0,1)");
  if (keyphrase_k > 25) throw UsageError("keyphrase_k must be in 0..25");
  if (!(al_floor > 0.0 && al_floor <= 1.0)) throw UsageError("active_learning.floor must be in (0,1]");
  if (al_batch_size == 0) throw UsageError("active_learning.batch_size must be positive");
  if (bootstrap_replicates == 0 || prevalence_replicates == 0) throw UsageError("replicate counts must be positive");
  if (cv_folds < 2) throw UsageError("eval.cv_folds must be at least 2");
  if (cbow.dim != kWordVecDim) throw UsageError("cbow.dim must be 10 for the default feature registry");
  if (docvec.dim != kDocVecDim) throw UsageError("docvec.dim must be 20 for the default feature registry");
}

void apply_config_entry(PipelineConfig& config, std::string_view key, std::string_view value,
                        const std::filesystem::path& base_dir) {
  for (const Key& k : keys()) {
    if (k.name == key) {
      k.set(config, unquote(trim(value)), base_dir);
      return;
    }
  }
  throw UsageError("unknown config key: " + std::string(key));
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base, const std::filesystem::path& base_dir) {
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError("config line " + std::to_string(line_no) + ": bad section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key(trim(line.substr(0, eq)));
    if (!section.empty()) key = section + "." + key;
    std::string_view value = trim(line.substr(eq + 1));
    if (const auto hash = value.find(" #"); hash != std::string_view::npos) value = trim(value.substr(0, hash));
    try {
      apply_config_entry(base, key, value, base_dir);
    } catch (const UsageError& e) {
      throw UsageError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base), path.parent_path());
}

std::string config_to_text(const PipelineConfig& config) {
  std::string out;
  for (const Key& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

}  // namespace tdd
