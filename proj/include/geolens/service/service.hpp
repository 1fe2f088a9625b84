#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "geolens/common/error.hpp"
#include "geolens/context/context.hpp"
#include "geolens/dataset/weights.hpp"
#include "geolens/regression/model.hpp"
#include "geolens/state/state.hpp"

namespace httplib {
class Server;
}

namespace geolens::service {

enum class JobStatus { queued, running, converged, failed, cancelled };
std::string_view to_string(JobStatus s);

struct ServiceConfig {
  context::FetchConfig fetch;
  std::function<std::string()> clock;
};

/// One analysis session. At most one training job runs at a time; later jobs
/// wait in the queue.
class Session {
 public:
  explicit Session(const ServiceConfig& config);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Runs `fn` with exclusive access to the state.
  template <class F>
  auto with_state(F&& fn) {
    std::lock_guard lock(mutex_);
    return fn(state_);
  }

  void replace_state(state::AnalyticalState s);
  std::shared_ptr<const dataset::SpatialWeights> weights();

  /// Validates synchronously, then queues.
  nlohmann::json submit(const regression::ModelSpec& spec);
  nlohmann::json job(const std::string& id) const;
  nlohmann::json jobs() const;
  nlohmann::json cancel(const std::string& id);
  /// Blocks until the job leaves queued/running or the timeout passes.
  nlohmann::json wait(const std::string& id, std::chrono::milliseconds timeout);

  void set_corpus(context::ContextCorpus corpus);
  std::optional<context::ContextCorpus> corpus() const;

 private:
  struct Job;
  void run();
  void transition(Job& job, JobStatus status);
  nlohmann::json describe(const Job& job) const;

  const ServiceConfig& config_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  state::AnalyticalState state_;
  std::shared_ptr<const dataset::SpatialWeights> weights_;
  std::optional<context::ContextCorpus> corpus_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::uint64_t next_job_ = 1;
  std::uint64_t sequence_ = 0;
  bool stop_ = false;
  std::thread worker_;
};

class Service {
 public:
  explicit Service(ServiceConfig config = {});
  ~Service();

  Session& session(const std::string& id);
  void register_routes(httplib::Server& server);
  std::string now() const;

 private:
  ServiceConfig config_;
  std::mutex mutex_;
  std::map<std::string, std::unique_ptr<Session>> sessions_;
};

/// HTTP status for an error category.
int http_status(ErrorCode code);

}  // namespace geolens::service
