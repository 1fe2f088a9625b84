#include <doctest.h>

#include <random>

#include "geolens/common/digest.hpp"
#include "geolens/common/error.hpp"
#include "geolens/report/report.hpp"

using namespace geolens;
using namespace geolens::report;

namespace {

Asset png(const std::string& id) {
  Asset a;
  a.id = id;
  a.media_type = "image/png";
  a.bytes = std::string("\x89PNG\r\n\x1a\n", 8) + id;
  return a;
}

Report sample() {
  Report r;
  r.title = "Sample";
  r.created_at = "2024-01-01T00:00:00Z";
  r = mutate_report(r, Action::add, {{"item", {{"kind", "paragraph"}, {"content", "<p>First <b>bold</b></p>"}}}}).report;
  r = mutate_report(r, Action::add,
                    {{"item", {{"kind", "map_figure"}, {"asset_id", "map1"}, {"caption", "Coefficient map"}}}})
          .report;
  r = mutate_report(r, Action::add,
                    {{"item",
                      {{"kind", "paragraph"},
                       {"content", "Second"},
                       {"provenance", {{"module", "narrative/coefficient:x1"}, {"state_hash", "abc123"}, {"template_version", "1.0.0"}}}}}},
                    "2024-01-02T00:00:00Z")
          .report;
  return r;
}

std::vector<std::string> ids(const Report& r) {
  std::vector<std::string> out;
  for (const auto& it : r.items) out.push_back(it.id);
  return out;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("add assigns stable ids and defaults") {
    const auto r = sample();
    CHECK(ids(r) == std::vector<std::string>{"item-1", "item-2", "item-3"});
    CHECK(r.items[1].color_scheme == "viridis");
    CHECK(r.modified_at == "2024-01-02T00:00:00Z");
    const auto front = mutate_report(r, Action::add, {{"item", {{"kind", "paragraph"}, {"content", "x"}}}, {"index", 0}}).report;
    CHECK(front.items.front().id == "item-4");
  }

  TEST_CASE("add then delete is the identity on items") {
    const auto r = sample();
    for (int at = 0; at <= 3; ++at) {
      auto added = mutate_report(r, Action::add, {{"item", {{"kind", "paragraph"}, {"content", "tmp"}}}, {"index", at}}).report;
      const auto back = mutate_report(added, Action::remove, {{"index", at}}).report;
      CHECK(back.items == r.items);
    }
  }

  TEST_CASE("moves at the boundary are no-ops") {
    const auto r = sample();
    const auto up = mutate_report(r, Action::move_up, {{"index", 0}});
    CHECK(up.noop);
    CHECK(up.report.items == r.items);
    const auto down = mutate_report(r, Action::move_down, {{"index", 2}});
    CHECK(down.noop);
    const auto mid = mutate_report(r, Action::move_down, {{"index", 0}});
    CHECK_FALSE(mid.noop);
    CHECK(ids(mid.report) == std::vector<std::string>{"item-2", "item-1", "item-3"});
    CHECK_THROWS_AS(mutate_report(r, Action::remove, {{"index", 3}}), Error);
    CHECK_THROWS_AS(mutate_report(r, Action::edit, {{"index", 1}, {"color_scheme", "rainbow-ish"}}), Error);
  }

  TEST_CASE("random mutation sequences match a list simulation") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
      Report r;
      std::vector<std::pair<std::string, std::string>> model;  // id, content
      int next = 1;
      for (int step = 0; step < 60; ++step) {
        const int action = static_cast<int>(rng() % 5);
        const auto size = model.size();
        if (action == 0 || size == 0) {
          const auto at = static_cast<std::size_t>(rng() % (size + 1));
          const auto content = "c" + std::to_string(step);
          r = mutate_report(r, Action::add, {{"item", {{"kind", "paragraph"}, {"content", content}}}, {"index", at}}).report;
          model.insert(model.begin() + static_cast<long>(at), {"item-" + std::to_string(next++), content});
        } else {
          const auto at = static_cast<std::size_t>(rng() % size);
          if (action == 1) {
            r = mutate_report(r, Action::remove, {{"index", at}}).report;
            model.erase(model.begin() + static_cast<long>(at));
          } else if (action == 2) {
            const auto content = "e" + std::to_string(step);
            r = mutate_report(r, Action::edit, {{"index", at}, {"content", content}}).report;
            model[at].second = content;
          } else if (action == 3) {
            const auto m = mutate_report(r, Action::move_up, {{"index", at}});
            CHECK(m.noop == (at == 0));
            r = m.report;
            if (at > 0) std::swap(model[at], model[at - 1]);
          } else {
            const auto m = mutate_report(r, Action::move_down, {{"index", at}});
            CHECK(m.noop == (at + 1 == size));
            r = m.report;
            if (at + 1 < size) std::swap(model[at], model[at + 1]);
          }
        }
        REQUIRE(r.items.size() == model.size());
        for (std::size_t i = 0; i < model.size(); ++i) {
          CHECK(r.items[i].id == model[i].first);
          CHECK(r.items[i].content == model[i].second);
        }
      }
    }
  }

  TEST_CASE("markup is sanitized") {
    CHECK(sanitize_markup("<p onclick=\"steal()\">hi<script>alert(1)</script></p>") == "<p>hi</p>");
    CHECK(sanitize_markup("<b>bold") == "<b>bold</b>");
    CHECK(sanitize_markup("<a href=\"javascript:x\">link</a>") == "link");
    CHECK(sanitize_markup("<span class=\"num\" style=\"color: red\">1</span>") ==
          "<span class=\"num\" style=\"color: red\">1</span>");
    CHECK(sanitize_markup("<span style=\"background:url(javascript:x)\">1</span>") == "<span>1</span>");
    CHECK(sanitize_markup("a < b &amp; c") == "a &lt; b &amp; c");
    CHECK(sanitize_markup("x<!-- hidden -->y<iframe src=x>z</iframe>") == "xy");
    CHECK(sanitize_markup("<p id=\"coef:x1/positive\" data-key=\"n\" data-x\"y=\"1\" data-=\"2\">t</p>") ==
          "<p id=\"coef:x1/positive\" data-key=\"n\">t</p>");
    const auto r = mutate_report(Report{}, Action::add, {{"item", {{"kind", "paragraph"}, {"content", "<img src=x onerror=y>ok"}}}}).report;
    CHECK(r.items[0].content == "ok");
  }

  TEST_CASE("export is deterministic and self-contained") {
    const AssetMap assets = {{"map1", png("map1")}};
    const auto a = export_html(sample(), assets);
    const auto b = export_html(sample(), AssetMap{{"map1", png("map1")}});
    CHECK(a == b);
    CHECK(sha256_hex(a) == sha256_hex(b));
    CHECK(a.starts_with("<!DOCTYPE html>"));
    CHECK(a.find("data:image/png;base64,") != std::string::npos);
    CHECK(a.find("http://") == std::string::npos);
    CHECK(a.find("https://") == std::string::npos);
    CHECK(a.find("<script") == std::string::npos);
    CHECK(a.find("abc123") != std::string::npos);
    CHECK(a.find("@media print") != std::string::npos);
    auto other = sample();
    other.title = "Other";
    CHECK(export_html(other, assets) != a);
  }

  TEST_CASE("export fails on unresolved or non-image assets") {
    const auto r = sample();
    CHECK(unresolved_assets(r, {}) == std::vector<std::string>{"map1"});
    try {
      export_html(r, {});
      FAIL("expected export error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::export_error);
      CHECK(e.details()["unresolved"] == nlohmann::json::array({"map1"}));
    }
    auto bad = png("map1");
    bad.media_type = "text/html";
    CHECK_THROWS_AS(export_html(r, {{"map1", bad}}), Error);
  }

  TEST_CASE("reports round trip through json") {
    const auto r = sample();
    const auto j = to_json(r);
    const auto back = report_from_json(j);
    CHECK(back.items == r.items);
    CHECK(to_json(back) == j);
    auto dup = j;
    dup["items"][1]["id"] = "item-1";
    CHECK_THROWS_AS(report_from_json(dup), Error);
    const auto a = png("m");
    const auto aj = to_json(a);
    CHECK(asset_from_json(aj).bytes == a.bytes);
  }
}
