#include <cmath>

#include "geolens/common/error.hpp"
#include "geolens/regression/calibrate.hpp"
#include "geolens/service/pipeline.hpp"
#include "geolens/service/service.hpp"

namespace geolens::service {

using nlohmann::json;

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::converged: return "converged";
    case JobStatus::failed: return "failed";
    case JobStatus::cancelled: return "cancelled";
  }
  return "queued";
}

struct Session::Job {
  std::string id;
  regression::ModelSpec spec;
  JobStatus status = JobStatus::queued;
  std::atomic<bool> cancel{false};
  json progress = {{"stage", "queued"}, {"iteration", 0}, {"aicc", nullptr}, {"soc", nullptr}};
  json error;
  json result;
  json timeline = json::array();
};

Session::Session(const ServiceConfig& config) : config_(config), worker_([this] { run(); }) {}

Session::~Session() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
    for (auto& [id, job] : jobs_) job->cancel = true;
  }
  cv_.notify_all();
  worker_.join();
}

void Session::replace_state(state::AnalyticalState s) {
  std::lock_guard lock(mutex_);
  const bool same_data = state_.dataset_fingerprint == s.dataset_fingerprint && weights_;
  state_ = std::move(s);
  if (!same_data) weights_.reset();
}

std::shared_ptr<const dataset::SpatialWeights> Session::weights() {
  std::lock_guard lock(mutex_);
  if (!weights_) weights_ = std::make_shared<const dataset::SpatialWeights>(dataset::queen_adjacency(require_dataset(state_)));
  return weights_;
}

void Session::set_corpus(context::ContextCorpus corpus) {
  std::lock_guard lock(mutex_);
  corpus_ = std::move(corpus);
  state_.corpus_cache_keys.clear();
  for (const auto& d : corpus_->documents) {
    if (!d.missing) state_.corpus_cache_keys.push_back(d.title + "@" + std::to_string(d.revision_id));
  }
}

std::optional<context::ContextCorpus> Session::corpus() const {
  std::lock_guard lock(mutex_);
  return corpus_;
}

void Session::transition(Job& job, JobStatus status) {
  job.status = status;
  job.timeline.push_back({{"status", to_string(status)}, {"sequence", ++sequence_}});
  cv_.notify_all();
}

json Session::describe(const Job& job) const {
  json j = {{"job_id", job.id},
            {"status", to_string(job.status)},
            {"spec", regression::to_json(job.spec)},
            {"progress", job.progress},
            {"timeline", job.timeline}};
  if (job.status == JobStatus::converged) j["result"] = job.result;
  if (job.status == JobStatus::failed) j["error"] = job.error;
  return j;
}

json Session::submit(const regression::ModelSpec& spec) {
  std::lock_guard lock(mutex_);
  spec.validate(&require_dataset(state_));
  auto job = std::make_shared<Job>();
  job->id = "job-" + std::to_string(next_job_++);
  job->spec = spec;
  transition(*job, JobStatus::queued);
  jobs_[job->id] = job;
  queue_.push_back(job);
  cv_.notify_all();
  return describe(*job);
}

json Session::job(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error(ErrorCode::not_found, "unknown job '" + id + "'", {{"job_id", id}});
  return describe(*it->second);
}

json Session::jobs() const {
  std::lock_guard lock(mutex_);
  json out = json::array();
  for (const auto& [id, job] : jobs_) out.push_back(describe(*job));
  return out;
}

json Session::cancel(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error(ErrorCode::not_found, "unknown job '" + id + "'", {{"job_id", id}});
  it->second->cancel = true;
  return describe(*it->second);
}

json Session::wait(const std::string& id, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error(ErrorCode::not_found, "unknown job '" + id + "'", {{"job_id", id}});
  const auto job = it->second;
  cv_.wait_for(lock, timeout, [&] { return job->status != JobStatus::queued && job->status != JobStatus::running; });
  return describe(*job);
}

void Session::run() {
  std::unique_lock lock(mutex_);
  while (true) {
    cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
    if (stop_) return;
    auto job = queue_.front();
    queue_.pop_front();
    transition(*job, JobStatus::running);
    job->progress["stage"] = "running";
    if (job->cancel) {
      transition(*job, JobStatus::cancelled);
      continue;
    }
    std::optional<dataset::GeoFeatureTable> table = state_.dataset;
    const auto fingerprint = state_.dataset_fingerprint;
    lock.unlock();

    std::optional<regression::CalibratedModel> model;
    json error;
    bool cancelled = false;
    try {
      if (!table) throw Error(ErrorCode::not_found, "no dataset loaded", {{"missing", "dataset"}});
      model = regression::calibrate(*table, job->spec, [&](const regression::Progress& p) {
        std::lock_guard guard(mutex_);
        job->progress = {{"stage", p.stage},
                         {"iteration", p.iteration},
                         {"aicc", std::isfinite(p.aicc) ? json(p.aicc) : json(nullptr)},
                         {"soc", std::isfinite(p.soc) ? json(p.soc) : json(nullptr)}};
        return !job->cancel.load();
      });
    } catch (const Error& e) {
      cancelled = e.code() == ErrorCode::cancelled;
      error = e.to_json();
    } catch (const std::exception& e) {
      error = {{"error", "internal"}, {"message", e.what()}};
    }

    lock.lock();
    if (cancelled || (job->cancel && !model)) {
      transition(*job, JobStatus::cancelled);
    } else if (!model) {
      job->error = error;
      transition(*job, JobStatus::failed);
    } else if (job->cancel) {
      transition(*job, JobStatus::cancelled);
    } else if (state_.dataset_fingerprint != fingerprint) {
      job->error = Error(ErrorCode::integrity, "dataset changed while training").to_json();
      transition(*job, JobStatus::failed);
    } else {
      store_calibration(state_, job->spec, std::move(*model));
      job->result = {{"model", "calibration"}, {"analysis_hash", state::analysis_hash(state_)}};
      job->progress["stage"] = "done";
      transition(*job, JobStatus::converged);
    }
  }
}

}  // namespace geolens::service
