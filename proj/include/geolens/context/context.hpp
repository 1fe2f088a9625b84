#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace geolens::context {

struct Section {
  std::string topic;
  std::vector<std::string> paragraphs;
  friend bool operator==(const Section&, const Section&) = default;
};

struct RegionDocument {
  std::string region_id;
  std::string title;
  std::int64_t revision_id = 0;
  std::string fetched_at;
  std::vector<Section> sections;
  bool missing = false;
  friend bool operator==(const RegionDocument&, const RegionDocument&) = default;
};

struct ContextCorpus {
  std::string resolution;
  std::vector<RegionDocument> documents;
  std::vector<std::string> warnings;

  const RegionDocument* find(const std::string& region_id) const;
};

struct FetchRequest {
  std::string region_id;
  std::string title;
};

struct FetchConfig {
  bool offline = true;
  std::string fixture_dir;
  std::string base_url = "https://en.wikipedia.org";
  std::string api_path = "/w/api.php";
  std::string cache_dir;
  bool use_cache = true;
  int parallelism = 4;
  int max_retries = 4;
  std::chrono::milliseconds initial_backoff{250};
  std::chrono::milliseconds min_interval{100};
  std::chrono::seconds timeout{20};
  std::function<std::string()> clock;
};

struct FetchReport {
  std::vector<std::string> fetched;
  std::vector<std::string> from_cache;
  std::vector<std::string> missing;
  std::vector<std::string> rate_limited;
  std::vector<std::string> failed;
  int network_requests = 0;
};

struct FetchResult {
  ContextCorpus corpus;
  FetchReport report;
};

/// Plain-text article with "== Heading ==" lines split into topics; the lead
/// section is "Introduction".
std::vector<Section> split_sections(const std::string& text);

FetchResult fetch_region_documents(const std::vector<FetchRequest>& requests, const std::string& resolution,
                                   const FetchConfig& config);

nlohmann::json to_json(const RegionDocument& d);
RegionDocument region_document_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ContextCorpus& c);
ContextCorpus corpus_from_json(const nlohmann::json& j);

struct TextRankOptions {
  double damping = 0.85;
  double tolerance = 1e-6;
  int window = 4;
  int max_iterations = 1000;
};

struct Token {
  std::string word;
  bool candidate = false;
  // Separated from the previous token by exactly one space.
  bool joined = false;
  std::size_t offset = 0;
};

/// Lower-cased word tokens per sentence.
std::vector<std::vector<Token>> tokenize(const std::string& paragraph);
bool is_stopword(const std::string& word);

struct WordGraph {
  std::vector<std::string> words;
  std::vector<std::vector<int>> adjacency;
};

/// Undirected co-occurrence graph over candidate words; a window never spans sentences.
WordGraph build_word_graph(const std::vector<std::string>& paragraphs, int window);

/// Power iteration; dangling mass is spread uniformly so scores sum to one.
std::vector<double> pagerank(const std::vector<std::vector<int>>& adjacency, double damping, double tolerance,
                             int max_iterations = 1000);

struct Keyphrase {
  std::string phrase;
  double score = 0.0;
  std::string topic;
  std::vector<std::string> region_ids;
};

struct KeyphraseList {
  std::vector<Keyphrase> entries;
  std::size_t requested = 20;
};

KeyphraseList extract_keyphrases(const ContextCorpus& corpus, const std::vector<std::string>& region_ids,
                                 std::size_t n = 20, const TextRankOptions& options = {});

struct Match {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct ParagraphHit {
  std::string region_id;
  std::string topic;
  std::size_t section = 0;
  std::size_t paragraph = 0;
  std::string text;
  std::vector<Match> matches;
};

/// Case-insensitive whole-phrase lookup with byte offsets; empty region filter means all regions.
std::vector<ParagraphHit> find_paragraphs(const ContextCorpus& corpus, const std::string& phrase,
                                          const std::vector<std::string>& region_ids = {});

nlohmann::json to_json(const KeyphraseList& k);
nlohmann::json to_json(const std::vector<ParagraphHit>& hits);
nlohmann::json to_json(const FetchReport& r);

}  // namespace geolens::context
