#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "tdd/corpus.hpp"
#include "tdd/features.hpp"
#include "tdd/gbm.hpp"

namespace httplib {
class Server;
}

namespace tdd {

struct ServiceOptions {
  std::filesystem::path journal;  // label journal, replayed on start
  TrainConfig gbm;
  double floor = 0.05;
  std::uint64_t seed = 42;
  std::size_t default_queue_limit = 10;
  std::filesystem::path static_dir;  // optional UI assets served at "/"
  std::function<Timestamp()> clock;  // defaults to the system clock
};

/// Status code plus JSON body. Errors carry {"code", "message"}.
struct ServiceReply {
  int status = 200;
  std::string body;
};

/// Labeling backend. Reads run concurrently; label writes and model swaps
/// take the writer lock; retraining runs on a background thread.
class LabelService {
 public:
  /// `features` must have one row per corpus ticket, in id order.
  LabelService(Corpus corpus, FeatureMatrix features, ServiceOptions options);
  ~LabelService();

  LabelService(const LabelService&) = delete;
  LabelService& operator=(const LabelService&) = delete;

  ServiceReply queue(std::optional<std::string_view> limit);
  ServiceReply ticket(std::string_view id) const;
  ServiceReply post_label(std::string_view body);
  ServiceReply start_retrain();
  ServiceReply retrain_status() const;
  ServiceReply stats() const;

  /// Blocks until no retrain is running.
  void wait_for_retrain();
  std::uint64_t model_version() const;
  std::size_t label_count() const;

  /// Registers every /api route (and the static mount) on `server`.
  void mount(httplib::Server& server);

 private:
  struct ModelState {
    std::uint64_t version = 0;
    GbmModel model;
    std::vector<double> scores;  // per feature row
  };

  void run_retrain(std::vector<std::size_t> rows, std::vector<double> labels);
  std::shared_ptr<const ModelState> current_model() const;

  Corpus corpus_;
  FeatureMatrix features_;
  ServiceOptions options_;
  LabelJournal journal_;

  mutable std::shared_mutex data_mutex_;

  mutable std::mutex model_mutex_;
  std::shared_ptr<const ModelState> model_;

  mutable std::mutex job_mutex_;
  std::condition_variable job_done_;
  bool job_running_ = false;
  std::uint64_t jobs_started_ = 0;
  std::string last_error_;
  std::thread worker_;
};

/// "host:port" -> (host, port). Throws UsageError when malformed.
std::pair<std::string, int> parse_listen_address(std::string_view text);

/// Binds and serves until the process is stopped. Throws UsageError when
/// the address cannot be bound.
void serve_forever(LabelService& service, const std::string& host, int port);

}  // namespace tdd
