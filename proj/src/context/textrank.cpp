#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "geolens/context/context.hpp"

namespace geolens::context {

using nlohmann::json;

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any", "are", "around",
      "as", "at", "be", "became", "because", "been", "before", "being", "below", "between", "both", "but", "by",
      "can", "could", "did", "do", "does", "doing", "down", "during", "each", "either", "est", "etc", "even", "ever",
      "every", "few", "first", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
      "herself", "him", "himself", "his", "how", "however", "i", "if", "in", "including", "into", "is", "it", "its",
      "itself", "just", "known", "largest", "later", "least", "less", "like", "located", "many", "may", "me", "more",
      "most", "much", "must", "my", "myself", "near", "nearly", "new", "no", "nor", "not", "now", "of", "off", "often",
      "on", "once", "one", "only", "or", "other", "others", "our", "ours", "ourselves", "out", "over", "own", "part",
      "per", "same", "second", "several", "she", "should", "since", "so", "some", "such", "than", "that", "the",
      "their", "theirs", "them", "themselves", "then", "there", "these", "they", "third", "this", "those", "three",
      "through", "thus", "to", "too", "two", "under", "until", "up", "upon", "us", "used", "very", "via", "was", "we",
      "well", "were", "what", "when", "where", "whether", "which", "while", "who", "whom", "whose", "why", "will",
      "with", "within", "without", "would", "year", "years", "yet", "you", "your", "yours", "yourself", "yourselves"};
  return words;
}

bool word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }
bool sentence_break(char c) { return c == '.' || c == '!' || c == '?' || c == ';' || c == ':' || c == '\n'; }

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool alphabetic(const std::string& w) {
  return std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isalpha(c) || c >= 0x80; });
}

struct Occurrence {
  std::size_t doc = 0;
  std::string topic;
};

}  // namespace

bool is_stopword(const std::string& word) { return stopwords().contains(word); }

std::vector<std::vector<Token>> tokenize(const std::string& paragraph) {
  std::vector<std::vector<Token>> sentences(1);
  std::size_t i = 0;
  std::string gap;
  while (i < paragraph.size()) {
    const auto c = static_cast<unsigned char>(paragraph[i]);
    if (!word_byte(c)) {
      // A period between two word characters (e.g. "U.S" or "3.5") does not end a sentence.
      const bool inner = c == '.' && i > 0 && i + 1 < paragraph.size() &&
                         word_byte(static_cast<unsigned char>(paragraph[i - 1])) &&
                         word_byte(static_cast<unsigned char>(paragraph[i + 1]));
      if (sentence_break(static_cast<char>(c)) && !inner && !sentences.back().empty()) {
        sentences.emplace_back();
      }
      gap += static_cast<char>(c);
      ++i;
      continue;
    }
    const auto start = i;
    while (i < paragraph.size() && word_byte(static_cast<unsigned char>(paragraph[i]))) ++i;
    Token t;
    t.word = lower(paragraph.substr(start, i - start));
    t.offset = start;
    t.candidate = t.word.size() >= 3 && alphabetic(t.word) && !is_stopword(t.word);
    t.joined = !sentences.back().empty() && gap == " ";
    sentences.back().push_back(std::move(t));
    gap.clear();
  }
  if (sentences.back().empty()) sentences.pop_back();
  return sentences;
}

WordGraph build_word_graph(const std::vector<std::string>& paragraphs, int window) {
  std::set<std::string> vocab;
  std::set<std::pair<std::string, std::string>> edges;
  for (const auto& p : paragraphs) {
    for (const auto& sentence : tokenize(p)) {
      std::vector<const std::string*> words;
      for (const auto& t : sentence) {
        if (t.candidate) words.push_back(&t.word);
      }
      for (std::size_t a = 0; a < words.size(); ++a) {
        vocab.insert(*words[a]);
        for (std::size_t b = a + 1; b < words.size() && b < a + static_cast<std::size_t>(window); ++b) {
          if (*words[a] == *words[b]) continue;
          edges.insert(std::minmax(*words[a], *words[b]));
        }
      }
    }
  }
  WordGraph g;
  g.words.assign(vocab.begin(), vocab.end());
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < g.words.size(); ++i) index[g.words[i]] = static_cast<int>(i);
  g.adjacency.resize(g.words.size());
  for (const auto& [a, b] : edges) {
    g.adjacency[index[a]].push_back(index[b]);
    g.adjacency[index[b]].push_back(index[a]);
  }
  for (auto& row : g.adjacency) std::sort(row.begin(), row.end());
  return g;
}

std::vector<double> pagerank(const std::vector<std::vector<int>>& adjacency, double damping, double tolerance,
                             int max_iterations) {
  const auto n = adjacency.size();
  if (n == 0) return {};
  const double nd = static_cast<double>(n);
  std::vector<double> score(n, 1.0 / nd), next(n);
  for (int it = 0; it < max_iterations; ++it) {
    double dangling = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (adjacency[i].empty()) dangling += score[i];
    }
    const double base = (1.0 - damping) / nd + damping * dangling / nd;
    std::fill(next.begin(), next.end(), base);
    for (std::size_t j = 0; j < n; ++j) {
      if (adjacency[j].empty()) continue;
      const double share = damping * score[j] / static_cast<double>(adjacency[j].size());
      for (int i : adjacency[j]) next[i] += share;
    }
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) delta += std::abs(next[i] - score[i]);
    score.swap(next);
    if (delta < tolerance) break;
  }
  return score;
}

KeyphraseList extract_keyphrases(const ContextCorpus& corpus, const std::vector<std::string>& region_ids,
                                 std::size_t n, const TextRankOptions& options) {
  KeyphraseList out;
  out.requested = n;
  const std::set<std::string> wanted(region_ids.begin(), region_ids.end());
  std::vector<const RegionDocument*> docs;
  for (const auto& d : corpus.documents) {
    if (wanted.contains(d.region_id) && !d.sections.empty()) docs.push_back(&d);
  }
  std::vector<std::string> paragraphs;
  for (const auto* d : docs) {
    for (const auto& s : d->sections) paragraphs.insert(paragraphs.end(), s.paragraphs.begin(), s.paragraphs.end());
  }
  const auto graph = build_word_graph(paragraphs, options.window);
  if (graph.words.empty() || n == 0) return out;
  const auto score = pagerank(graph.adjacency, options.damping, options.tolerance, options.max_iterations);

  std::vector<std::size_t> order(graph.words.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return score[a] > score[b]; });
  const auto keep = (graph.words.size() + 2) / 3;
  std::unordered_map<std::string, double> keyword;
  for (std::size_t r = 0; r < keep; ++r) keyword[graph.words[order[r]]] = score[order[r]];

  struct Entry {
    double score = 0.0;
    std::vector<std::string> topics;
    std::set<std::string> regions;
  };
  std::map<std::string, Entry> phrases;
  for (const auto* d : docs) {
    for (const auto& s : d->sections) {
      for (const auto& p : s.paragraphs) {
        for (const auto& sentence : tokenize(p)) {
          std::size_t i = 0;
          while (i < sentence.size()) {
            if (!sentence[i].candidate || !keyword.contains(sentence[i].word)) {
              ++i;
              continue;
            }
            std::string phrase = sentence[i].word;
            double sum = keyword[sentence[i].word];
            std::size_t j = i + 1;
            while (j < sentence.size() && sentence[j].joined && sentence[j].candidate && keyword.contains(sentence[j].word)) {
              phrase += ' ' + sentence[j].word;
              sum += keyword[sentence[j].word];
              ++j;
            }
            auto& e = phrases[phrase];
            e.score = sum / static_cast<double>(j - i);
            e.topics.push_back(s.topic);
            e.regions.insert(d->region_id);
            i = j;
          }
        }
      }
    }
  }

  for (auto& [phrase, e] : phrases) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : e.topics) ++counts[t];
    std::string topic = e.topics.front();
    for (const auto& t : e.topics) {
      if (counts[t] > counts[topic]) topic = t;
    }
    out.entries.push_back({phrase, e.score, topic, {e.regions.begin(), e.regions.end()}});
  }
  std::stable_sort(out.entries.begin(), out.entries.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.phrase < b.phrase;
  });
  if (out.entries.size() > n) out.entries.resize(n);
  return out;
}

std::vector<ParagraphHit> find_paragraphs(const ContextCorpus& corpus, const std::string& phrase,
                                          const std::vector<std::string>& region_ids) {
  std::vector<ParagraphHit> out;
  const auto needle = lower(phrase);
  if (needle.empty()) return out;
  const std::set<std::string> wanted(region_ids.begin(), region_ids.end());
  for (const auto& d : corpus.documents) {
    if (!wanted.empty() && !wanted.contains(d.region_id)) continue;
    for (std::size_t s = 0; s < d.sections.size(); ++s) {
      for (std::size_t p = 0; p < d.sections[s].paragraphs.size(); ++p) {
        const auto& text = d.sections[s].paragraphs[p];
        const auto hay = lower(text);
        ParagraphHit hit{d.region_id, d.sections[s].topic, s, p, text, {}};
        for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
          const auto end = pos + needle.size();
          const bool left = pos == 0 || !word_byte(static_cast<unsigned char>(hay[pos - 1]));
          const bool right = end == hay.size() || !word_byte(static_cast<unsigned char>(hay[end]));
          if (left && right) hit.matches.push_back({pos, end});
        }
        if (!hit.matches.empty()) out.push_back(std::move(hit));
      }
    }
  }
  return out;
}

json to_json(const KeyphraseList& k) {
  json entries = json::array();
  for (const auto& e : k.entries) {
    entries.push_back({{"phrase", e.phrase}, {"score", e.score}, {"topic", e.topic}, {"region_ids", e.region_ids}});
  }
  return {{"requested", k.requested}, {"entries", entries}};
}

json to_json(const std::vector<ParagraphHit>& hits) {
  json out = json::array();
  for (const auto& h : hits) {
    json m = json::array();
    for (const auto& x : h.matches) m.push_back({{"begin", x.begin}, {"end", x.end}});
    out.push_back({{"region_id", h.region_id},
                   {"topic", h.topic},
                   {"section", h.section},
                   {"paragraph", h.paragraph},
                   {"text", h.text},
                   {"matches", m}});
  }
  return out;
}

}  // namespace geolens::context
