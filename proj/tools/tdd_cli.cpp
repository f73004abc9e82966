// tdd: command-line front end for the technical-debt detection pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tdd/config.hpp"
#include "tdd/corpus.hpp"
#include "tdd/errors.hpp"
#include "tdd/evaluation.hpp"
#include "tdd/features.hpp"
#include "tdd/gbm.hpp"
#include "tdd/label_service.hpp"
#include "tdd/pipeline.hpp"
#include "tdd/rng.hpp"

namespace fs = std::filesystem;
using namespace tdd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string corpus;
  std::string labels;
  std::string pretrained;
};

PipelineConfig resolve_config(const Globals& g) {
  PipelineConfig c;
  if (!g.config_path.empty()) c = load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.out_dir = g.out;
  if (!g.corpus.empty()) c.corpus = g.corpus;
  if (!g.labels.empty()) c.labels = g.labels;
  if (!g.pretrained.empty()) c.pretrained = g.pretrained;
  c.validate();
  return c;
}

fs::path out_dir(const PipelineConfig& c) {
  fs::create_directories(c.out_dir);
  return c.out_dir;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Corpus load_corpus(const PipelineConfig& c) {
  if (c.corpus.empty()) throw UsageError("no corpus given (--corpus or config key 'corpus')");
  IngestResult ing = ingest_jsonl(c.corpus);
  for (const auto& w : ing.warnings) std::cerr << "warning: " << w << '\n';
  if (!c.labels.empty()) {
    if (!fs::exists(c.labels)) throw DataError("label journal not found: " + c.labels.string());
    LabelJournal(c.labels).replay_into(ing.corpus);
  }
  return std::move(ing.corpus);
}

/// Features from a CSV when given, else computed from scratch.
FeatureMatrix obtain_features(const PipelineConfig& c, const std::string& features_csv) {
  if (!features_csv.empty()) return read_feature_csv(features_csv);
  LoadedInputs in = load_inputs(c);
  const PipelineConfig seeded = with_derived_seeds(c);
  const EmbeddingArtifacts emb = train_embeddings(in.corpus, seeded.cbow, seeded.docvec);
  return build_feature_matrix(in.corpus, in.pretrained, emb);
}

struct LabeledRows {
  std::vector<std::size_t> rows;
  std::vector<double> labels;
};

LabeledRows labeled_rows(const FeatureMatrix& x, const Corpus& corpus) {
  LabeledRows out;
  const auto agg = corpus.aggregated_labels();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (auto it = agg.find(x.ids[i]); it != agg.end()) {
      out.rows.push_back(i);
      out.labels.push_back(it->second.label);
    }
  }
  if (out.rows.empty()) throw DataError("no labeled tickets");
  return out;
}

Corpus labels_only(const PipelineConfig& c) {
  if (c.labels.empty()) throw UsageError("no label journal given (--labels or config key 'labels')");
  if (!fs::exists(c.labels)) throw DataError("label journal not found: " + c.labels.string());
  return load_corpus(c);
}

std::map<std::string, double> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read predictions: " + path.string());
  std::map<std::string, double> out;
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, p;
    std::getline(ss, id, ',');
    std::getline(ss, p, ',');
    try {
      out[id] = std::stod(p);
    } catch (const std::exception&) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": bad probability");
    }
  }
  return out;
}

void write_predictions(const FeatureMatrix& x, std::span<const double> probs, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "ticket_id,probability\n";
  for (std::size_t i = 0; i < x.rows(); ++i) out << x.ids[i] << ',' << fmt17(probs[i]) << '\n';
}

struct Scored {
  std::vector<std::string> ids;
  std::vector<double> scores;
  std::vector<double> labels;
};

Scored join_predictions(const std::map<std::string, double>& preds, const Corpus& corpus) {
  Scored s;
  for (const auto& [id, rec] : corpus.aggregated_labels()) {
    auto it = preds.find(id);
    if (it == preds.end()) continue;
    s.ids.push_back(id);
    s.scores.push_back(it->second);
    s.labels.push_back(rec.label);
  }
  if (s.ids.empty()) throw DataError("no predictions for labeled tickets");
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Technical-debt ticket detection"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "INI-style config file");
  app.add_option("--seed", g.seed, "global seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--corpus", g.corpus, "ticket JSONL");
  app.add_option("--labels", g.labels, "label journal JSONL");
  app.add_option("--pretrained", g.pretrained, "pretrained word embedding (text)");

  std::function<int()> action;

  auto* ingest = app.add_subcommand("ingest", "validate a corpus and write it normalized");
  ingest->callback([&] {
    action = [&] {
      const PipelineConfig c = resolve_config(g);
      if (c.corpus.empty()) throw UsageError("no corpus given");
      IngestResult ing = ingest_jsonl(c.corpus);
      for (const auto& w : ing.warnings) std::cerr << "warning: " << w << '\n';
      std::size_t replayed = 0;
      if (!c.labels.empty()) replayed = LabelJournal(c.labels).replay_into(ing.corpus);
      write_tickets_jsonl(ing.corpus, out_dir(c) / "corpus.jsonl");
      std::cout << "tickets " << ing.corpus.size() << "\nskipped " << ing.skipped << "\nlabels " << replayed << '\n';
      return kExitOk;
    };
  });

  std::size_t syn_n = 5000, syn_labels = 0;
  double syn_rate = 0.16;
  std::uint64_t syn_seed = 7;
  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic corpus, truth, embedding and labels");
  gen->add_option("--n", syn_n, "number of tickets")->check(CLI::PositiveNumber);
  gen->add_option("--td-rate", syn_rate, "fraction of TD tickets")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--corpus-seed", syn_seed, "generator seed");
  gen->add_option("--simulate-labels", syn_labels, "label this many tickets by simulated active learning");
  gen->callback([&] {
    action = [&] {
      PipelineConfig c = resolve_config(g);
      const fs::path dir = out_dir(c);
      SyntheticCorpus syn = generate_synthetic_corpus({syn_n, syn_rate, syn_seed});
      write_tickets_jsonl(syn.corpus, dir / "corpus.jsonl");
      {
        std::ofstream truth(dir / "truth.csv", std::ios::binary);
        truth << "ticket_id,td\n";
        for (const auto& [id, td] : syn.truth) truth << id << ',' << td << '\n';
      }
      write_synthetic_pretrained(dir / "pretrained.txt", c.pretrained_dim, syn_seed);
      c.corpus = dir / "corpus.jsonl";
      c.pretrained = dir / "pretrained.txt";
      if (syn_labels > 0) {
        const fs::path journal_path = dir / "labels.jsonl";
        fs::remove(journal_path);
        const FeatureMatrix x = obtain_features(c, "");
        ActiveLearningConfig al;
        al.n_labels = syn_labels;
        al.first_batch = std::min<std::size_t>(100, syn_labels);
        al.batch_size = c.al_batch_size;
        al.floor = c.al_floor;
        al.seed = mix_seed(c.seed, 10);
        al.gbm = c.gbm;
        LabelJournal journal(journal_path);
        for (const auto& rec : simulate_active_learning(x, syn.truth, al)) journal.append(rec);
        c.labels = journal_path;
      }
      std::ofstream cfg(dir / "config.ini", std::ios::binary);
      cfg << "corpus = corpus.jsonl\npretrained = pretrained.txt\n";
      if (syn_labels > 0) cfg << "labels = labels.jsonl\n";
      std::cout << "wrote " << syn.corpus.size() << " tickets to " << dir.string() << '\n';
      return kExitOk;
    };
  });

  auto* emb = app.add_subcommand("train-embeddings", "train word and document embeddings on the corpus");
  emb->callback([&] {
    action = [&] {
      const PipelineConfig c = with_derived_seeds(resolve_config(g));
      const Corpus corpus = load_corpus(c);
      const EmbeddingArtifacts a = train_embeddings(corpus, c.cbow, c.docvec);
      const fs::path dir = out_dir(c);
      save_word_embedding(a.word, dir / "word_embedding.txt");
      save_doc_embedding(a.doc, dir / "doc_embedding.txt");
      for (std::size_t e = 0; e < a.cbow_loss.size(); ++e) std::cout << "epoch " << e + 1 << " loss " << a.cbow_loss[e] << '\n';
      return kExitOk;
    };
  });

  std::string word_path, doc_path;
  auto* feat = app.add_subcommand("featurize", "compute the feature matrix");
  feat->add_option("--word-embedding", word_path, "reuse a trained word embedding");
  feat->add_option("--doc-embedding", doc_path, "reuse a trained document embedding");
  feat->callback([&] {
    action = [&] {
      const PipelineConfig c = with_derived_seeds(resolve_config(g));
      LoadedInputs in = load_inputs(c);
      EmbeddingArtifacts a;
      if (!word_path.empty() && !doc_path.empty()) {
        a.word = load_word_embedding(word_path);
        a.doc = load_doc_embedding(doc_path);
      } else if (word_path.empty() && doc_path.empty()) {
        a = train_embeddings(in.corpus, c.cbow, c.docvec);
      } else {
        throw UsageError("--word-embedding and --doc-embedding go together");
      }
      const FeatureMatrix x = build_feature_matrix(in.corpus, in.pretrained, a);
      write_feature_csv(x, out_dir(c) / "features.csv");
      std::cout << x.rows() << " rows x " << x.cols() << " features\n";
      return kExitOk;
    };
  });

  std::string features_csv, model_path, predictions_path;
  auto* train = app.add_subcommand("train", "train the classifier on every labeled ticket");
  train->add_option("--features", features_csv, "feature CSV (computed when omitted)");
  train->callback([&] {
    action = [&] {
      const PipelineConfig c = with_derived_seeds(resolve_config(g));
      const Corpus corpus = labels_only(c);
      const FeatureMatrix x = obtain_features(c, features_csv);
      const LabeledRows lr = labeled_rows(x, corpus);
      const GbmModel m = train_gbm(x.subset(lr.rows), lr.labels, c.gbm);
      save_model(m, out_dir(c) / "model.json");
      std::cout << "trained " << m.trees.size() << " trees on " << lr.rows.size() << " labels\n";
      return kExitOk;
    };
  });

  auto* predict = app.add_subcommand("predict", "score every ticket");
  predict->add_option("--model", model_path, "model.json")->required();
  predict->add_option("--features", features_csv, "feature CSV (computed when omitted)");
  predict->callback([&] {
    action = [&] {
      const PipelineConfig c = resolve_config(g);
      const GbmModel m = load_model(model_path);
      const FeatureMatrix x = obtain_features(c, features_csv);
      write_predictions(x, m.predict_proba(x), out_dir(c) / "predictions.csv");
      return kExitOk;
    };
  });

  auto* evaluate = app.add_subcommand("evaluate", "metrics of predictions against the labels");
  evaluate->add_option("--predictions", predictions_path, "predictions CSV")->required();
  evaluate->callback([&] {
    action = [&] {
      const PipelineConfig c = resolve_config(g);
      const Scored s = join_predictions(read_predictions(predictions_path), labels_only(c));
      std::vector<double> w2;
      for (double y : s.labels) w2.push_back(label_uncertainty_weight(y));
      ReportOptions opts;
      opts.replicates = c.bootstrap_replicates;
      opts.seed = mix_seed(c.seed, 7);
      const std::string body = "{\"label_weighted\": " + metric_report_json(evaluate_metrics(s.scores, s.labels, w2, opts)) +
                               ", \"unweighted\": " + metric_report_json(evaluate_metrics(s.scores, s.labels, {}, opts)) +
                               "}\n";
      std::ofstream(out_dir(c) / "evaluation.json", std::ios::binary) << body;
      std::cout << body;
      return kExitOk;
    };
  });

  auto* prev = app.add_subcommand("prevalence", "estimate the corpus-wide TD rate");
  prev->add_option("--features", features_csv, "feature CSV (computed when omitted)");
  prev->callback([&] {
    action = [&] {
      const PipelineConfig c = with_derived_seeds(resolve_config(g));
      const Corpus corpus = labels_only(c);
      const FeatureMatrix x = obtain_features(c, features_csv);
      const LabeledRows lr = labeled_rows(x, corpus);
      const std::uint64_t seed = mix_seed(c.seed, 9);
      PrevalenceEstimate est;
      if (c.prevalence_refit) {
        est = estimate_prevalence_refit(x, lr.rows, lr.labels, c.sampling_gbm, c.prevalence_replicates, seed);
      } else {
        std::vector<bool> included(x.rows(), false);
        for (std::size_t r : lr.rows) included[r] = true;
        const SamplingWeights sw = estimate_sampling_weights(x, included, c.sampling_gbm);
        std::vector<double> probs;
        for (double w : sw.w1) probs.push_back(1.0 / w);
        est = estimate_prevalence(lr.labels, probs, x.rows(), c.prevalence_replicates, seed);
      }
      const std::string body = prevalence_json(est);
      std::ofstream(out_dir(c) / "prevalence.json", std::ios::binary) << body;
      std::cout << body;
      return kExitOk;
    };
  });

  std::size_t batch_n = 50;
  auto* next = app.add_subcommand("sample-next", "draw the next batch of tickets to label");
  next->add_option("--n", batch_n, "batch size")->check(CLI::PositiveNumber);
  next->add_option("--model", model_path, "model.json (uniform when omitted)");
  next->add_option("--features", features_csv, "feature CSV (computed when omitted)");
  next->callback([&] {
    action = [&] {
      const PipelineConfig c = resolve_config(g);
      const Corpus corpus = load_corpus(c);
      const auto labeled = corpus.aggregated_labels();
      std::vector<std::string> pool;
      std::vector<double> probs;
      if (model_path.empty()) {
        for (const auto& [id, t] : corpus.tickets()) {
          if (labeled.contains(id)) continue;
          pool.push_back(id);
          probs.push_back(1.0);
        }
      } else {
        const GbmModel m = load_model(model_path);
        const FeatureMatrix x = obtain_features(c, features_csv);
        const auto p = m.predict_proba(x);
        for (std::size_t i = 0; i < x.rows(); ++i) {
          if (labeled.contains(x.ids[i])) continue;
          pool.push_back(x.ids[i]);
          probs.push_back(p[i]);
        }
      }
      for (const auto& id : sample_next_batch(pool, probs, std::min(batch_n, pool.size()), c.al_floor,
                                              mix_seed(c.seed, 8))) {
        std::cout << id << '\n';
      }
      return kExitOk;
    };
  });

  auto* dump = app.add_subcommand("dump-trees", "print a model's trees");
  dump->add_option("--model", model_path, "model.json")->required();
  dump->callback([&] {
    action = [&] {
      std::cout << dump_trees_text(load_model(model_path));
      return kExitOk;
    };
  });

  auto* curves = app.add_subcommand("curves", "cumulative TD-found curves for predictions");
  curves->add_option("--predictions", predictions_path, "predictions CSV")->required();
  curves->callback([&] {
    action = [&] {
      const PipelineConfig c = resolve_config(g);
      const Scored s = join_predictions(read_predictions(predictions_path), labels_only(c));
      write_curves_csv(cumulative_recall_curves(s.ids, s.scores, s.labels), out_dir(c) / "curves.csv");
      return kExitOk;
    };
  });

  auto* run_all = app.add_subcommand("run-all", "run the full pipeline and write every artifact");
  run_all->callback([&] {
    action = [&] {
      const PipelineConfig c = resolve_config(g);
      LoadedInputs in = load_inputs(c);
      const PipelineConfig seeded = with_derived_seeds(c);
      const EmbeddingArtifacts a = train_embeddings(in.corpus, seeded.cbow, seeded.docvec);
      const RunResult r = run_end_to_end(in.corpus, in.pretrained, c, &a);
      const fs::path dir = out_dir(c);
      write_run_artifacts(r, c, dir);
      save_word_embedding(a.word, dir / "word_embedding.txt");
      save_doc_embedding(a.doc, dir / "doc_embedding.txt");
      auto show = [](const MetricValue& v) { return v.value ? fmt17(*v.value) : std::string("NA"); };
      std::cout << "holdout weighted AUROC main " << show(r.main.weighted.auroc) << " keyphrase(k="
                << r.tuning.k << ") " << show(r.keyphrase.weighted.auroc) << "\nprevalence corrected "
                << r.prevalence.corrected_rate << " [" << r.prevalence.ci_lo << ", " << r.prevalence.ci_hi << "]\n";
      return kExitOk;
    };
  });

  std::string listen = "127.0.0.1:8080", static_dir;
  auto* serve = app.add_subcommand("serve", "start the labeling service");
  serve->add_option("--listen", listen, "host:port")->envname("TDD_LISTEN");
  serve->add_option("--static", static_dir, "directory of UI assets");
  serve->add_option("--features", features_csv, "feature CSV (computed when omitted)");
  serve->callback([&] {
    action = [&] {
      const PipelineConfig c = resolve_config(g);
      const auto [host, port] = parse_listen_address(listen);
      IngestResult ing = ingest_jsonl(c.corpus);
      const FeatureMatrix x = obtain_features(c, features_csv);
      ServiceOptions opts;
      opts.journal = c.labels.empty() ? out_dir(c) / "labels.jsonl" : c.labels;
      opts.gbm = c.gbm;
      opts.floor = c.al_floor;
      opts.seed = c.seed;
      opts.static_dir = static_dir;
      LabelService service(std::move(ing.corpus), x, opts);
      std::cerr << "listening on " << host << ':' << port << '\n';
      serve_forever(service, host, port);
      return kExitOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}
