#include "tdd/label_service.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>

#include <httplib.h>
#include <json.hpp>

#include "tdd/errors.hpp"
#include "tdd/pipeline.hpp"
#include "tdd/rng.hpp"

namespace tdd {

using json = nlohmann::ordered_json;

namespace {

ServiceReply ok(const json& body, int status = 200) { return {status, body.dump()}; }

ServiceReply error_reply(int status, const std::string& message) {
  return {status, json{{"code", status}, {"message", message}}.dump()};
}

Timestamp system_now() {
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  return Timestamp{std::chrono::duration_cast<std::chrono::seconds>(now).count()};
}

// Bin k holds [k/10, (k+1)/10); the last bin also takes 1.0.
std::size_t histogram_bin(double label) {
  std::size_t bin = 0;
  for (int k = 1; k <= 9; ++k) {
    if (label >= k / 10.0) bin = static_cast<std::size_t>(k);
  }
  return bin;
}

}  // namespace

LabelService::LabelService(Corpus corpus, FeatureMatrix features, ServiceOptions options)
    : corpus_(std::move(corpus)), features_(std::move(features)), options_(std::move(options)),
      journal_(options_.journal) {
  if (features_.rows() != corpus_.size()) throw DataError("feature matrix does not cover the corpus");
  std::size_t i = 0;
  for (const auto& [id, ticket] : corpus_.tickets()) {
    if (features_.ids[i++] != id) throw DataError("feature rows are not in corpus id order");
  }
  if (!(options_.floor > 0.0)) throw UsageError("sampling floor must be positive");
  options_.gbm.validate();
  if (!options_.clock) options_.clock = system_now;
  journal_.replay_into(corpus_);
}

LabelService::~LabelService() {
  if (worker_.joinable()) worker_.join();
}

std::shared_ptr<const LabelService::ModelState> LabelService::current_model() const {
  std::lock_guard lock(model_mutex_);
  return model_;
}

std::uint64_t LabelService::model_version() const {
  const auto m = current_model();
  return m ? m->version : 0;
}

std::size_t LabelService::label_count() const {
  std::shared_lock lock(data_mutex_);
  return corpus_.label_count();
}

ServiceReply LabelService::queue(std::optional<std::string_view> limit_text) {
  std::size_t limit = options_.default_queue_limit;
  if (limit_text) {
    long long v = 0;
    const auto res = std::from_chars(limit_text->data(), limit_text->data() + limit_text->size(), v);
    if (res.ec != std::errc() || res.ptr != limit_text->data() + limit_text->size()) {
      return error_reply(400, "limit must be an integer");
    }
    if (v <= 0) return error_reply(400, "limit must be positive");
    limit = static_cast<std::size_t>(v);
  }

  const auto model = current_model();
  std::vector<std::string> pool;
  std::vector<double> probs;
  {
    std::shared_lock lock(data_mutex_);
    const auto labeled = corpus_.aggregated_labels();
    for (std::size_t i = 0; i < features_.rows(); ++i) {
      if (labeled.contains(features_.ids[i])) continue;
      pool.push_back(features_.ids[i]);
      probs.push_back(model ? model->scores[i] : 1.0);
    }
  }

  json entries = json::array();
  if (!pool.empty()) {
    const std::uint64_t version = model ? model->version : 0;
    const auto batch = sample_next_batch(pool, probs, std::min(limit, pool.size()), options_.floor,
                                         mix_seed(options_.seed, version));
    const std::string sampled_at = format_rfc3339(options_.clock());
    for (const auto& id : batch) {
      const auto row = *features_.row_of(id);
      entries.push_back(json{{"ticket_id", id},
                             {"probability", model ? json(model->scores[row]) : json(nullptr)},
                             {"sampled_at", sampled_at}});
    }
  }
  return ok(json{{"model_version", model ? model->version : 0},
                 {"fallback", model ? json(nullptr) : json("uniform")},
                 {"entries", std::move(entries)}});
}

ServiceReply LabelService::ticket(std::string_view id) const {
  const auto model = current_model();
  std::shared_lock lock(data_mutex_);
  const Ticket* t = corpus_.find(id);
  if (!t) return error_reply(404, "unknown ticket: " + std::string(id));
  const std::string text = free_text(*t);
  json spans = json::array();
  for (const auto& s : keyphrase_spans(text)) {
    spans.push_back(json{{"phrase", s.phrase}, {"begin", s.begin}, {"end", s.end}});
  }
  json labels = json::array();
  for (const auto& r : corpus_.label_records()) {
    if (r.ticket_id == id) labels.push_back(json::parse(label_to_json_line(r)));
  }
  json probability = nullptr;
  if (model) probability = model->scores[*features_.row_of(id)];
  return ok(json{{"ticket", json::parse(ticket_to_json_line(*t))},
                 {"free_text", text},
                 {"spans", std::move(spans)},
                 {"labels", std::move(labels)},
                 {"probability", probability}});
}

ServiceReply LabelService::post_label(std::string_view body) {
  LabelRecord rec;
  try {
    rec = label_from_json_line(body);
  } catch (const DataError& e) {
    return error_reply(400, e.what());
  }
  if (!(rec.label >= 0.0 && rec.label <= 1.0)) return error_reply(400, "label must be in [0, 1]");
  if (rec.rater.empty()) rec.rater = "anonymous";
  rec.labeled_at = options_.clock();

  std::unique_lock lock(data_mutex_);
  if (!corpus_.find(rec.ticket_id)) return error_reply(404, "unknown ticket: " + rec.ticket_id);
  try {
    upsert_label(corpus_, rec, &journal_);
  } catch (const DataError& e) {
    return error_reply(400, e.what());
  }
  return ok(json::parse(label_to_json_line(rec)), 201);
}

ServiceReply LabelService::start_retrain() {
  std::lock_guard job_lock(job_mutex_);
  if (job_running_) return error_reply(409, "a retrain is already running");

  std::vector<std::size_t> rows;
  std::vector<double> labels;
  {
    std::shared_lock lock(data_mutex_);
    const auto aggregated = corpus_.aggregated_labels();
    for (std::size_t i = 0; i < features_.rows(); ++i) {
      auto it = aggregated.find(features_.ids[i]);
      if (it == aggregated.end()) continue;
      rows.push_back(i);
      labels.push_back(it->second.label);
    }
  }
  const std::size_t needed = 2 * options_.gbm.min_data_in_leaf;
  if (rows.size() < needed) {
    return error_reply(409, "retraining needs at least " + std::to_string(needed) + " labeled tickets, have " +
                                std::to_string(rows.size()));
  }
  if (worker_.joinable()) worker_.join();
  const std::size_t n_labels = rows.size();
  job_running_ = true;
  last_error_.clear();
  ++jobs_started_;
  worker_ = std::thread([this, rows = std::move(rows), labels = std::move(labels)]() mutable {
    run_retrain(std::move(rows), std::move(labels));
  });
  return ok(json{{"status", "running"}, {"job", jobs_started_}, {"model_version", model_version()},
                 {"n_labels", n_labels}},
            202);
}

void LabelService::run_retrain(std::vector<std::size_t> rows, std::vector<double> labels) {
  std::string error;
  try {
    auto state = std::make_shared<ModelState>();
    state->model = train_gbm(features_.subset(rows), labels, options_.gbm);
    state->scores = state->model.predict_proba(features_);
    std::unique_lock data_lock(data_mutex_);
    std::lock_guard lock(model_mutex_);
    state->version = (model_ ? model_->version : 0) + 1;
    model_ = std::move(state);
  } catch (const std::exception& e) {
    error = e.what();
  }
  std::lock_guard job_lock(job_mutex_);
  last_error_ = error;
  job_running_ = false;
  job_done_.notify_all();
}

ServiceReply LabelService::retrain_status() const {
  std::lock_guard job_lock(job_mutex_);
  return ok(json{{"status", job_running_ ? "running" : "idle"},
                 {"job", jobs_started_},
                 {"model_version", model_version()},
                 {"last_error", last_error_.empty() ? json(nullptr) : json(last_error_)}});
}

void LabelService::wait_for_retrain() {
  std::unique_lock job_lock(job_mutex_);
  job_done_.wait(job_lock, [this] { return !job_running_; });
}

ServiceReply LabelService::stats() const {
  std::vector<LabelRecord> records;
  {
    std::shared_lock lock(data_mutex_);
    for (const auto& [id, rec] : corpus_.aggregated_labels()) records.push_back(rec);
  }
  std::vector<std::size_t> counts(10, 0);
  for (const auto& r : records) ++counts[histogram_bin(r.label)];
  json histogram = json::array();
  for (std::size_t k = 0; k < 10; ++k) {
    histogram.push_back(json{{"lo", static_cast<double>(k) / 10.0},
                             {"hi", static_cast<double>(k + 1) / 10.0},
                             {"count", counts[k]}});
  }
  json cumulative = json::array();
  for (const auto& p : label_progress_curve(records).points) {
    cumulative.push_back(json{{"n", static_cast<std::size_t>(p.x)}, {"sum", p.y}});
  }
  return ok(json{{"n_labels", records.size()},
                 {"model_version", model_version()},
                 {"histogram", std::move(histogram)},
                 {"cumulative", std::move(cumulative)}});
}

void LabelService::mount(httplib::Server& server) {
  auto send = [](httplib::Response& res, const ServiceReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  };
  server.Get("/api/queue", [this, send](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> limit;
    if (req.has_param("limit")) limit = req.get_param_value("limit");
    send(res, queue(limit ? std::optional<std::string_view>(*limit) : std::nullopt));
  });
  server.Get(R"(/api/tickets/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, ticket(req.matches[1].str()));
  });
  server.Post("/api/labels", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, post_label(req.body));
  });
  server.Post("/api/retrain", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, start_retrain());
  });
  server.Get("/api/retrain", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, retrain_status());
  });
  server.Get("/api/stats", [this, send](const httplib::Request&, httplib::Response& res) { send(res, stats()); });
  server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    send(res, error_reply(500, message));
  });
  server.set_error_handler([send](const httplib::Request& req, httplib::Response& res) {
    if (req.path.rfind("/api/", 0) == 0 && res.body.empty()) {
      send(res, error_reply(res.status, res.status == 404 ? "no such endpoint" : "request failed"));
    }
  });
  if (!options_.static_dir.empty() && !server.set_mount_point("/", options_.static_dir.string())) {
    throw UsageError("static directory not found: " + options_.static_dir.string());
  }
}

std::pair<std::string, int> parse_listen_address(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw UsageError("listen address must be host:port");
  int port = 0;
  const auto digits = text.substr(colon + 1);
  const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (res.ec != std::errc() || res.ptr != digits.data() + digits.size() || port < 0 || port > 65535) {
    throw UsageError("bad port in listen address: " + std::string(text));
  }
  return {std::string(text.substr(0, colon)), port};
}

void serve_forever(LabelService& service, const std::string& host, int port) {
  httplib::Server server;
  service.mount(server);
  if (!server.listen(host, port)) throw UsageError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace tdd
