#include <doctest.h>

#include <random>
#include <set>

#include "geolens/common/error.hpp"
#include "geolens/regression/calibrate.hpp"
#include "geolens/service/pipeline.hpp"
#include "geolens/state/state.hpp"
#include "support.hpp"

using namespace geolens;
using nlohmann::json;

namespace {

report::Asset png(const std::string& id) {
  return {id, "image/png", std::string("\x89PNG\r\n\x1a\n", 8) + id};
}

/// Random state at a random stage of the pipeline.
state::AnalyticalState generate(std::uint64_t seed, int stage) {
  std::mt19937_64 rng(seed);
  const int rows = 4 + static_cast<int>(rng() % 3);
  const int cols = 4 + static_cast<int>(rng() % 3);
  const auto n = static_cast<std::size_t>(rows * cols);
  auto x1 = testing::gaussian(n, seed * 3 + 1);
  auto x2 = testing::gaussian(n, seed * 3 + 2);
  auto e = testing::gaussian(n, seed * 3 + 3, 0.2);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 + 2.0 * x1[i] - x2[i] * (i % static_cast<std::size_t>(cols)) / cols + e[i];
  if (rng() % 4 == 0) x2[rng() % n] = std::numeric_limits<double>::quiet_NaN();
  auto s = service::ingest(testing::grid(rows, cols, {{"y", y}, {"x1", x1}, {"x2", x2}}));
  s.settings.xi = std::vector<double>{0.01, 0.05, 0.1}[rng() % 3];
  s.settings.permutations = 19 + static_cast<int>(rng() % 80);
  s.settings.moran_seed = rng();
  s.settings.leiden_seed = rng() % 1000;
  s.settings.local_r2_threshold = 0.25 + 0.5 * static_cast<double>(rng() % 100) / 100.0;
  if (stage < 1) return s;

  regression::ModelSpec spec;
  spec.dependent = "y";
  spec.independents = {"x1", "x2"};
  spec.family = static_cast<regression::Family>(rng() % 3);
  spec.kernel = static_cast<regression::Kernel>(rng() % 2);
  spec.convergence.max_iterations = 100;
  try {
    service::store_calibration(s, spec, regression::calibrate(service::require_dataset(s), spec));
  } catch (const Error&) {
    spec.family = regression::Family::ols;
    service::store_calibration(s, spec, regression::calibrate(service::require_dataset(s), spec));
  }
  if (stage < 2) return s;
  const auto w = dataset::queen_adjacency(service::require_dataset(s));
  service::run_diagnostics(s, w);
  if (stage < 3) return s;
  service::run_clusters(s, w);
  if (stage < 4) return s;
  for (const auto& surface : s.model->surface_names) {
    const auto doc = service::coefficient_narrative(s, surface);
    for (const auto& p : doc.paragraphs) {
      for (const auto& c : p.children) {
        if (!c.default_location.empty() && rng() % 2 == 0) {
          service::edit_identifier(s, "coefficient", surface, c.id, "place " + std::to_string(rng() % 100));
        }
      }
    }
  }
  service::add_narratives_to_report(s, service::all_narratives(s), "2024-03-01T12:00:00Z");
  s.assets["fig"] = png("fig");
  s.report = report::mutate_report(*s.report, report::Action::add,
                                   {{"item", {{"kind", "map_figure"}, {"asset_id", "fig"}, {"caption", "Map"}}}})
                 .report;
  s.corpus_cache_keys = {"Athens County, Ohio@1201"};
  return s;
}

state::AnalyticalState full_state() {
  static const auto s = [] {
    for (std::uint64_t seed = 100;; ++seed) {
      auto st = generate(seed, 4);
      bool any = false;
      for (const auto& [k, c] : st.clusters) any = any || !c.positive_clusters.empty() || !c.negative_clusters.empty();
      if (any && st.report && !st.narrative_edits.empty()) return st;
    }
  }();
  return s;
}

bool fails_closed(const std::string& bytes, const dataset::GeoFeatureTable* table = nullptr) {
  try {
    state::load_state(bytes, table);
    return false;
  } catch (const Error&) {
    return true;
  }
}

}  // namespace

TEST_SUITE("state") {
  TEST_CASE("save load save is byte identical") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      CAPTURE(seed);
      const auto s = generate(seed, static_cast<int>(seed % 5));
      const auto a = state::save_state(s);
      state::AnalyticalState loaded;
      try {
        loaded = state::load_state(a);
      } catch (const Error& e) {
        FAIL(e.to_json().dump());
      }
      CHECK(state::save_state(loaded) == a);
      CHECK(state::analysis_hash(loaded) == state::analysis_hash(s));
      if (seed % 7 == 0) {
        const auto slim = state::save_state(s, {false});
        const auto back = state::load_state(slim, &*s.dataset);
        CHECK(state::save_state(back, {false}) == slim);
        CHECK(state::save_state(back) == a);
      }
    }
  }

  TEST_CASE("staged states need no calibration") {
    const auto s = generate(5, 0);
    CHECK_FALSE(s.model.has_value());
    const auto back = state::load_state(state::save_state(s));
    CHECK(dataset::to_json(*back.dataset) == dataset::to_json(*s.dataset));
    CHECK(back.settings == s.settings);
  }

  TEST_CASE("loaded models reproduce endpoint results") {
    const auto s = full_state();
    const auto back = state::load_state(state::save_state(s));
    for (const auto& surface : s.model->surface_names) {
      CHECK(service::surface_values(back, surface) == service::surface_values(s, surface));
      CHECK(narrative::to_json(service::coefficient_narrative(back, surface)) ==
            narrative::to_json(service::coefficient_narrative(s, surface)));
    }
    CHECK(report::export_html(*back.report, back.assets) == report::export_html(*s.report, s.assets));
  }

  TEST_CASE("malformed files are rejected with precise errors") {
    const auto bytes = state::save_state(full_state());
    for (std::size_t cut : {std::size_t{0}, std::size_t{1}, bytes.size() / 3, bytes.size() - 1}) {
      try {
        state::load_state(bytes.substr(0, cut));
        FAIL("expected parse error");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parse);
      }
    }
    auto j = json::parse(bytes);
    j["schema_version"] = 2;
    try {
      state::load_state(j.dump());
      FAIL("expected version error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::version);
      CHECK(e.details()["supported"] == 1);
      CHECK(e.details()["found"] == 2);
    }
  }

  TEST_CASE("fingerprints guard the dataset") {
    const auto s = full_state();
    const auto slim = state::save_state(s, {false});
    const auto bare = state::load_state(slim);
    CHECK_FALSE(bare.dataset.has_value());
    CHECK_THROWS_AS(service::require_dataset(bare), Error);
    auto other = *s.dataset;
    other.columns["y"][0] += 1.0;
    try {
      state::load_state(slim, &other);
      FAIL("expected integrity error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::integrity);
    }
    auto j = json::parse(state::save_state(s));
    j["dataset"]["fingerprint"] = std::string(64, '0');
    CHECK(fails_closed(j.dump()));
  }

  TEST_CASE("corrupted references always fail closed") {
    const auto s = full_state();
    const auto base = json::parse(state::save_state(s));
    const std::set<std::string> ids(s.dataset->region_ids.begin(), s.dataset->region_ids.end());
    const auto flat = base.flatten();
    std::vector<std::string> targets;
    for (const auto& [ptr, v] : flat.items()) {
      if (ptr.rfind("/dataset/", 0) == 0) continue;
      if (v.is_string() && ids.contains(v.get<std::string>())) targets.push_back(ptr);
    }
    REQUIRE(targets.size() > 20);
    for (const auto& ptr : targets) {
      CAPTURE(ptr);
      auto j = base;
      j[json::json_pointer(ptr)] = "ghost-region";
      CHECK(fails_closed(j.dump()));
    }

    std::vector<std::pair<std::string, json>> edits = {
        {"/spec/dependent", "x1"},
        {"/calibration/surface_names/1", "x9"},
        {"/calibration/family", "ols"},
    };
    for (const auto& [k, c] : s.clusters) {
      const auto* list = !c.positive_clusters.empty() ? &c.positive_clusters : &c.negative_clusters;
      if (list->empty()) continue;
      const auto prefix = "/clusters/" + k;
      edits.push_back({prefix + "/surface", "x9"});
      edits.push_back({prefix + (list == &c.positive_clusters ? "/positive_clusters/0/id" : "/negative_clusters/0/id"),
                       "x9/positive/1"});
    }
    for (const auto& [key, e] : s.narrative_edits) {
      auto j = base;
      j["narrative_edits"][key]["coef:nowhere/positive/7"] = "lost";
      CHECK(fails_closed(j.dump()));
    }
    for (std::size_t i = 0; i < s.report->items.size(); ++i) {
      if (s.report->items[i].kind != report::ItemKind::paragraph) {
        edits.push_back({"/report/items/" + std::to_string(i) + "/asset_id", "ghost"});
      }
    }
    edits.push_back({"/assets/0/id", "other"});
    for (const auto& [ptr, value] : edits) {
      CAPTURE(ptr);
      auto j = base;
      REQUIRE(j.contains(json::json_pointer(ptr)));
      j[json::json_pointer(ptr)] = value;
      CHECK(fails_closed(j.dump()));
    }
    auto j = base;
    j.erase("spec");
    CHECK(fails_closed(j.dump()));
  }

  TEST_CASE("random byte damage never loads silently") {
    const auto bytes = state::save_state(full_state());
    std::mt19937_64 rng(9);
    int loaded = 0;
    for (int trial = 0; trial < 300; ++trial) {
      auto damaged = bytes;
      damaged[rng() % damaged.size()] = static_cast<char>(' ' + rng() % 90);
      try {
        const auto s = state::load_state(damaged);
        ++loaded;
        state::validate(s);
        CHECK(state::save_state(state::load_state(state::save_state(s))) == state::save_state(s));
      } catch (const Error&) {
      }
    }
    MESSAGE("byte edits that still formed a valid state: " << loaded);
  }
}
