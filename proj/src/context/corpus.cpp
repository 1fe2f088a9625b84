#include <algorithm>
#include <atomic>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "geolens/common/digest.hpp"
#include "geolens/common/error.hpp"
#include "geolens/common/json_util.hpp"
#include "geolens/context/context.hpp"

#include <httplib.h>

namespace geolens::context {

using nlohmann::json;
namespace fs = std::filesystem;

const RegionDocument* ContextCorpus::find(const std::string& region_id) const {
  for (const auto& d : documents) {
    if (d.region_id == region_id) return &d;
  }
  return nullptr;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string utc_now() {
  const auto t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_or_throw(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, what + ": " + e.what());
  }
}

enum class Outcome { fetched, cached, missing, rate_limited, failed };

// Parses a query response; returns false when the page does not exist.
bool document_from_api(const json& body, RegionDocument& doc) {
  const auto& pages = jsonio::require(jsonio::require(body, "query"), "pages");
  if (!pages.is_array() || pages.empty()) return false;
  const auto& page = pages.front();
  if (page.value("missing", false) || page.value("invalid", false)) return false;
  doc.title = page.value("title", doc.title);
  if (page.contains("revisions") && !page["revisions"].empty()) {
    doc.revision_id = page["revisions"].front().value("revid", std::int64_t{0});
  }
  doc.sections = split_sections(page.value("extract", std::string{}));
  return true;
}

class Fetcher {
 public:
  explicit Fetcher(const FetchConfig& c) : config_(c) {}

  Outcome fetch(const FetchRequest& req, RegionDocument& doc) {
    doc.region_id = req.region_id;
    doc.title = req.title;
    if (auto cached = from_cache(req.title, doc)) return *cached;
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_follow_location(true);
    const httplib::Params params = {{"action", "query"},     {"format", "json"},     {"formatversion", "2"},
                                    {"prop", "extracts|revisions"}, {"explaintext", "1"}, {"rvprop", "ids"},
                                    {"redirects", "1"},      {"titles", req.title}};
    const httplib::Headers headers = {{"User-Agent", "geolens/1.0 (regional context lookup)"}};
    auto backoff = config_.initial_backoff;
    bool limited = false;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      throttle();
      ++requests_;
      auto res = client.Get(config_.api_path, params, headers);
      if (!res) {
        limited = false;
        continue;
      }
      if (res->status == 429 || res->status == 503) {
        limited = true;
        continue;
      }
      if (res->status == 404) return Outcome::missing;
      if (res->status != 200) {
        limited = false;
        continue;
      }
      json body;
      try {
        body = json::parse(res->body);
        if (!document_from_api(body, doc)) return Outcome::missing;
      } catch (const std::exception&) {
        return Outcome::failed;
      }
      doc.fetched_at = now();
      store(req.title, doc.revision_id, res->body);
      return Outcome::fetched;
    }
    return limited ? Outcome::rate_limited : Outcome::failed;
  }

  int requests() const { return requests_.load(); }

 private:
  std::string now() const { return config_.clock ? config_.clock() : utc_now(); }

  void throttle() {
    std::unique_lock lock(mutex_);
    const auto t = std::chrono::steady_clock::now();
    if (t < next_slot_) {
      const auto wait = next_slot_ - t;
      next_slot_ += config_.min_interval;
      lock.unlock();
      std::this_thread::sleep_for(wait);
      return;
    }
    next_slot_ = t + config_.min_interval;
  }

  std::string key(const std::string& title) const { return sha256_hex(title).substr(0, 32); }

  std::optional<Outcome> from_cache(const std::string& title, RegionDocument& doc) {
    if (!config_.use_cache || config_.cache_dir.empty() || !fs::exists(config_.cache_dir)) return std::nullopt;
    const auto prefix = key(title) + "-";
    std::int64_t best = -1;
    fs::path best_path;
    for (const auto& e : fs::directory_iterator(config_.cache_dir)) {
      const auto name = e.path().filename().string();
      if (name.rfind(prefix, 0) != 0 || e.path().extension() != ".json") continue;
      try {
        const auto rev = std::stoll(name.substr(prefix.size()));
        if (rev > best) {
          best = rev;
          best_path = e.path();
        }
      } catch (const std::exception&) {
      }
    }
    if (best < 0) return std::nullopt;
    try {
      const auto body = json::parse(read_file(best_path));
      if (!document_from_api(body, doc)) return Outcome::missing;
      doc.fetched_at = now();
      return Outcome::cached;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

  void store(const std::string& title, std::int64_t revision, const std::string& raw) {
    if (config_.cache_dir.empty()) return;
    std::error_code ec;
    fs::create_directories(config_.cache_dir, ec);
    const auto path = fs::path(config_.cache_dir) / (key(title) + "-" + std::to_string(revision) + ".json");
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << raw;
    }
    fs::rename(tmp, path, ec);
  }

  const FetchConfig& config_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
  std::atomic<int> requests_{0};
};

}  // namespace

std::vector<Section> split_sections(const std::string& text) {
  std::vector<Section> out;
  Section current{"Introduction", {}};
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.size() >= 4 && t.rfind("==", 0) == 0 && t.compare(t.size() - 2, 2, "==") == 0) {
      const auto level = t.find_first_not_of('=');
      const auto name = trim(std::string_view(t).substr(level, t.size() - 2 * level));
      if (level == 2 && !name.empty()) {
        if (!current.paragraphs.empty()) out.push_back(std::move(current));
        current = Section{name, {}};
      }
      continue;
    }
    current.paragraphs.push_back(t);
  }
  if (!current.paragraphs.empty()) out.push_back(std::move(current));
  return out;
}

FetchResult fetch_region_documents(const std::vector<FetchRequest>& requests, const std::string& resolution,
                                   const FetchConfig& config) {
  FetchResult result;
  result.corpus.resolution = resolution;
  auto& corpus = result.corpus;
  auto& report = result.report;
  corpus.documents.resize(requests.size());
  std::vector<Outcome> outcomes(requests.size(), Outcome::missing);

  if (config.offline) {
    for (std::size_t i = 0; i < requests.size(); ++i) {
      auto& doc = corpus.documents[i];
      doc.region_id = requests[i].region_id;
      doc.title = requests[i].title;
      const auto& id = requests[i].region_id;
      if (id.empty() || id.find_first_of("/\\") != std::string::npos || id == "." || id == "..") {
        throw Error(ErrorCode::invalid_argument, "region id '" + id + "' cannot name a fixture file", {{"region_id", id}});
      }
      const auto path = fs::path(config.fixture_dir) / (id + ".json");
      if (config.fixture_dir.empty() || !fs::exists(path)) continue;
      auto loaded = region_document_from_json(parse_or_throw(read_file(path), "fixture " + path.string()));
      if (loaded.region_id != requests[i].region_id) {
        throw Error(ErrorCode::integrity, "fixture " + path.string() + " belongs to region '" + loaded.region_id + "'",
                    {{"path", path.string()}, {"region_id", requests[i].region_id}});
      }
      if (!loaded.missing) {
        doc = std::move(loaded);
        outcomes[i] = Outcome::cached;
      }
    }
  } else {
    Fetcher fetcher(config);
    std::atomic<std::size_t> next{0};
    const auto workers = std::max<std::size_t>(1, std::min<std::size_t>(config.parallelism, requests.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < requests.size(); i = next++) {
          outcomes[i] = fetcher.fetch(requests[i], corpus.documents[i]);
        }
      });
    }
    for (auto& t : pool) t.join();
    report.network_requests = fetcher.requests();
  }

  for (std::size_t i = 0; i < requests.size(); ++i) {
    auto& doc = corpus.documents[i];
    const auto& id = requests[i].region_id;
    const auto label = "region '" + id + "' (" + requests[i].title + ")";
    switch (outcomes[i]) {
      case Outcome::fetched:
        report.fetched.push_back(id);
        break;
      case Outcome::cached:
        report.from_cache.push_back(id);
        break;
      case Outcome::missing:
        report.missing.push_back(id);
        corpus.warnings.push_back("no page found for " + label);
        break;
      case Outcome::rate_limited:
        report.rate_limited.push_back(id);
        corpus.warnings.push_back("rate limited while fetching " + label);
        break;
      case Outcome::failed:
        report.failed.push_back(id);
        corpus.warnings.push_back("fetch failed for " + label);
        break;
    }
    if (outcomes[i] != Outcome::fetched && outcomes[i] != Outcome::cached) {
      doc.sections.clear();
      doc.missing = true;
    }
  }
  return result;
}

json to_json(const RegionDocument& d) {
  json sections = json::array();
  for (const auto& s : d.sections) sections.push_back({{"topic", s.topic}, {"paragraphs", s.paragraphs}});
  return {{"region_id", d.region_id}, {"title", d.title},   {"revision_id", d.revision_id},
          {"fetched_at", d.fetched_at}, {"missing", d.missing}, {"sections", sections}};
}

RegionDocument region_document_from_json(const json& j) {
  using jsonio::require;
  try {
    RegionDocument d;
    d.region_id = require(j, "region_id").get<std::string>();
    d.title = j.value("title", std::string{});
    d.revision_id = j.value("revision_id", std::int64_t{0});
    d.fetched_at = j.value("fetched_at", std::string{});
    d.missing = j.value("missing", false);
    for (const auto& s : j.value("sections", json::array())) {
      Section sec;
      sec.topic = require(s, "topic").get<std::string>();
      for (const auto& p : require(s, "paragraphs")) {
        auto t = trim(p.get<std::string>());
        if (!t.empty()) sec.paragraphs.push_back(std::move(t));
      }
      if (!sec.paragraphs.empty()) d.sections.push_back(std::move(sec));
    }
    return d;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed region document: ") + e.what());
  }
}

json to_json(const ContextCorpus& c) {
  json docs = json::array();
  for (const auto& d : c.documents) docs.push_back(to_json(d));
  return {{"resolution", c.resolution}, {"documents", docs}, {"warnings", c.warnings}};
}

ContextCorpus corpus_from_json(const json& j) {
  ContextCorpus c;
  c.resolution = j.value("resolution", std::string{});
  for (const auto& d : jsonio::require(j, "documents")) c.documents.push_back(region_document_from_json(d));
  c.warnings = j.value("warnings", std::vector<std::string>{});
  return c;
}

json to_json(const FetchReport& r) {
  return {{"fetched", r.fetched},   {"from_cache", r.from_cache}, {"missing", r.missing},
          {"rate_limited", r.rate_limited}, {"failed", r.failed}, {"network_requests", r.network_requests}};
}

}  // namespace geolens::context
