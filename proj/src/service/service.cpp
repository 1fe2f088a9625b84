#include <ctime>
#include <sstream>

#include "geolens/common/error.hpp"
#include "geolens/common/json_util.hpp"
#include "geolens/dataset/geojson.hpp"
#include "geolens/service/pipeline.hpp"
#include "geolens/service/service.hpp"

#include <httplib.h>

namespace geolens::service {

using nlohmann::json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::integrity:
    case ErrorCode::version:
    case ErrorCode::cancelled: return 409;
    case ErrorCode::fetch: return 502;
    case ErrorCode::convergence:
    case ErrorCode::export_error:
    case ErrorCode::undefined_statistic:
    case ErrorCode::oversaturated_model:
    case ErrorCode::singular_design:
    case ErrorCode::local_singularity:
    case ErrorCode::bandwidth_search: return 422;
    default: return 400;
  }
}

Service::Service(ServiceConfig config) : config_(std::move(config)) {}

Service::~Service() = default;

Session& Service::session(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto& s = sessions_[id];
  if (!s) s = std::make_unique<Session>(config_);
  return *s;
}

std::string Service::now() const {
  if (config_.clock) return config_.clock();
  const auto t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

void send(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

Handler guarded(Handler fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send(res, e.to_json(), http_status(e.code()));
    } catch (const json::exception& e) {
      send(res, Error(ErrorCode::parse, e.what()).to_json(), 400);
    } catch (const std::exception& e) {
      send(res, {{"error", "internal"}, {"message", e.what()}, {"details", json::object()}}, 500);
    }
  };
}

json body_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("request body is not valid JSON: ") + e.what());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string param(const httplib::Request& req, const char* key, std::string fallback = {}) {
  return req.has_param(key) ? req.get_param_value(key) : fallback;
}

int int_param(const httplib::Request& req, const char* key, int fallback) {
  if (!req.has_param(key)) return fallback;
  try {
    return std::stoi(req.get_param_value(key));
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_argument, std::string("parameter '") + key + "' must be an integer");
  }
}

std::vector<std::string> selected_regions(const httplib::Request& req, Session& session) {
  if (req.has_param("cluster")) {
    const auto id = req.get_param_value("cluster");
    return session.with_state([&](auto& s) { return cluster_regions(s, id); });
  }
  return split_list(param(req, "regions"));
}

json model_summary(const regression::CalibratedModel& m, const std::optional<diagnostics::DiagnosticsReport>& d) {
  json trace = json::array();
  for (const auto& it : m.trace) {
    trace.push_back({{"iteration", it.iteration},
                     {"bandwidths", jsonio::encode(it.bandwidths)},
                     {"soc", jsonio::encode(it.soc)},
                     {"rss", jsonio::encode(it.rss)}});
  }
  json j = {{"family", regression::to_string(m.family)},
            {"kernel", regression::to_string(m.kernel)},
            {"bandwidth_mode", regression::to_string(m.bandwidth_mode)},
            {"surfaces", m.surface_names},
            {"bandwidths", jsonio::encode(m.bandwidths)},
            {"enp_per_surface", jsonio::encode(m.enp_per_surface)},
            {"hat_trace", jsonio::encode(m.hat_trace)},
            {"sigma2", jsonio::encode(m.sigma2)},
            {"rss", jsonio::encode(m.rss())},
            {"regions", m.n()},
            {"excluded_region_ids", m.excluded_region_ids},
            {"trace", trace}};
  if (d) {
    j["aicc"] = jsonio::encode(d->global.aicc);
    j["r2"] = jsonio::encode(d->global.r2);
    j["adj_r2"] = jsonio::encode(d->global.adj_r2);
  }
  return j;
}

}  // namespace

void Service::register_routes(httplib::Server& server) {
  auto sess = [this](const httplib::Request& req) -> Session& { return session(param(req, "session", "default")); };

  server.Get("/api/health", guarded([](const auto&, auto& res) { send(res, {{"status", "ok"}}); }));

  server.Post("/api/dataset", guarded([sess](const auto& req, auto& res) {
    dataset::LoadOptions o;
    if (req.has_param("id_key")) o.id_key = req.get_param_value("id_key");
    o.planar = param(req, "planar") == "1";
    auto s = ingest(dataset::load_geojson(req.body, o));
    auto summary = dataset_summary(s);
    sess(req).replace_state(std::move(s));
    send(res, summary, 201);
  }));
  server.Get("/api/dataset", guarded([sess](const auto& req, auto& res) {
    send(res, sess(req).with_state([](auto& s) { return dataset_summary(s); }));
  }));
  server.Get("/api/dataset/geojson", guarded([sess](const auto& req, auto& res) {
    res.set_content(sess(req).with_state([](auto& s) { return dataset::to_geojson(require_dataset(s)); }),
                    "application/geo+json");
  }));

  server.Get("/api/features", guarded([sess](const auto& req, auto& res) {
    send(res, sess(req).with_state([](auto& s) {
      json names = json::array();
      for (const auto& [name, v] : require_dataset(s).columns) names.push_back(name);
      return names;
    }));
  }));
  server.Get("/api/features/:name", guarded([sess](const auto& req, auto& res) {
    const auto name = req.path_params.at("name");
    send(res, sess(req).with_state([&](auto& s) { return feature_profile(s, name); }));
  }));
  server.Post("/api/screening", guarded([sess](const auto& req, auto& res) {
    const auto b = body_json(req);
    const auto dep = b.value("dependent", std::string{});
    const auto ind = b.value("independents", std::vector<std::string>{});
    send(res, sess(req).with_state([&](auto& s) { return screen(s, dep, ind); }));
  }));
  server.Get("/api/choropleth", guarded([sess](const auto& req, auto& res) {
    const auto var = param(req, "variable");
    const int k = int_param(req, "k", 5);
    send(res, sess(req).with_state([&](auto& s) { return choropleth(s, var, k); }));
  }));
  server.Get("/api/choropleth/bivariate", guarded([sess](const auto& req, auto& res) {
    const auto dep = param(req, "dependent");
    const auto ind = param(req, "independent");
    const int k = int_param(req, "k", 3);
    send(res, sess(req).with_state([&](auto& s) { return bivariate_choropleth(s, dep, ind, k); }));
  }));

  server.Post("/api/spec/validate", guarded([sess](const auto& req, auto& res) {
    const auto spec = regression::spec_from_json(body_json(req));
    sess(req).with_state([&](auto& s) {
      spec.validate(s.dataset ? &*s.dataset : nullptr);
      return 0;
    });
    send(res, {{"valid", true}, {"spec", regression::to_json(spec)}});
  }));

  server.Post("/api/jobs", guarded([sess](const auto& req, auto& res) {
    send(res, sess(req).submit(regression::spec_from_json(body_json(req))), 202);
  }));
  server.Get("/api/jobs", guarded([sess](const auto& req, auto& res) { send(res, sess(req).jobs()); }));
  server.Get("/api/jobs/:id", guarded([sess](const auto& req, auto& res) {
    const auto& id = req.path_params.at("id");
    const int wait_ms = int_param(req, "wait_ms", 0);
    send(res, wait_ms > 0 ? sess(req).wait(id, std::chrono::milliseconds(wait_ms)) : sess(req).job(id));
  }));
  server.Post("/api/jobs/:id/cancel", guarded([sess](const auto& req, auto& res) {
    send(res, sess(req).cancel(req.path_params.at("id")));
  }));

  server.Get("/api/model", guarded([sess](const auto& req, auto& res) {
    const bool full = param(req, "full") == "1";
    send(res, sess(req).with_state([&](auto& s) {
      return full ? regression::to_json(require_model(s)) : model_summary(require_model(s), s.diagnostics);
    }));
  }));
  server.Get("/api/surfaces", guarded([sess](const auto& req, auto& res) {
    send(res, sess(req).with_state([](auto& s) { return json(require_model(s).surface_names); }));
  }));
  server.Get("/api/surfaces/:name", guarded([sess](const auto& req, auto& res) {
    const auto name = req.path_params.at("name");
    send(res, sess(req).with_state([&](auto& s) { return surface_values(s, name); }));
  }));

  server.Post("/api/diagnostics", guarded([sess](const auto& req, auto& res) {
    const auto b = body_json(req);
    auto& session = sess(req);
    const auto weights = session.weights();
    send(res, session.with_state([&](auto& s) {
      auto& st = s.settings;
      st.xi = b.value("xi", st.xi);
      st.permutations = b.value("permutations", st.permutations);
      st.moran_seed = b.value("seed", st.moran_seed);
      if (b.contains("residual_convention")) {
        st.convention = diagnostics::residual_convention_from_string(b["residual_convention"].template get<std::string>());
      }
      st.local_r2_threshold = b.value("local_r2_threshold", st.local_r2_threshold);
      run_diagnostics(s, *weights);
      return diagnostics::to_json(*s.diagnostics);
    }));
  }));
  server.Get("/api/diagnostics", guarded([sess](const auto& req, auto& res) {
    send(res, sess(req).with_state([](auto& s) { return diagnostics::to_json(require_diagnostics(s)); }));
  }));

  server.Post("/api/clusters", guarded([sess](const auto& req, auto& res) {
    const auto b = body_json(req);
    auto& session = sess(req);
    const auto weights = session.weights();
    send(res, session.with_state([&](auto& s) {
      auto& st = s.settings;
      st.cluster_resolution = b.value("resolution", st.cluster_resolution);
      st.cluster_min_size = b.value("min_size", st.cluster_min_size);
      st.leiden_seed = b.value("seed", st.leiden_seed);
      run_clusters(s, *weights, b.value("surfaces", std::vector<std::string>{}));
      json out = json::object();
      for (const auto& [k, v] : s.clusters) out[k] = patterns::to_json(v);
      return out;
    }));
  }));
  server.Get("/api/clusters", guarded([sess](const auto& req, auto& res) {
    send(res, sess(req).with_state([](auto& s) {
      json out = json::object();
      for (const auto& [k, v] : s.clusters) out[k] = patterns::to_json(v);
      return out;
    }));
  }));
  server.Get("/api/clusters/:surface", guarded([sess](const auto& req, auto& res) {
    const auto surface = req.path_params.at("surface");
    send(res, sess(req).with_state([&](auto& s) {
      const auto it = s.clusters.find(surface);
      if (it == s.clusters.end()) throw Error(ErrorCode::not_found, "no clusters for surface '" + surface + "'");
      return patterns::to_json(it->second);
    }));
  }));

  server.Get("/api/narratives/coefficient/:surface", guarded([sess](const auto& req, auto& res) {
    const auto surface = req.path_params.at("surface");
    send(res, sess(req).with_state([&](auto& s) { return narrative::to_json(coefficient_narrative(s, surface)); }));
  }));
  server.Get("/api/narratives/diagnostic/:kind", guarded([sess](const auto& req, auto& res) {
    const auto kind = narrative::diagnostic_kind_from_string(req.path_params.at("kind"));
    send(res, sess(req).with_state([&](auto& s) { return narrative::to_json(diagnostic_narrative(s, kind)); }));
  }));
  server.Get("/api/narratives/feature/:name", guarded([sess](const auto& req, auto& res) {
    const auto name = req.path_params.at("name");
    send(res, sess(req).with_state([&](auto& s) { return feature_profile(s, name)["narrative"]; }));
  }));
  server.Post("/api/narratives/:family/:subject/edits", guarded([sess](const auto& req, auto& res) {
    const auto b = body_json(req);
    const auto family = req.path_params.at("family");
    const auto subject = req.path_params.at("subject");
    const auto id = jsonio::require(b, "paragraph_id").template get<std::string>();
    const auto label = jsonio::require(b, "label").template get<std::string>();
    send(res, sess(req).with_state([&](auto& s) { return narrative::to_json(edit_identifier(s, family, subject, id, label)); }));
  }));

  server.Post("/api/context/corpus", guarded([this, sess](const auto& req, auto& res) {
    const auto b = body_json(req);
    std::vector<context::FetchRequest> requests;
    for (const auto& r : jsonio::require(b, "regions")) {
      requests.push_back({jsonio::require(r, "region_id").template get<std::string>(), r.value("title", std::string{})});
    }
    auto config = config_.fetch;
    config.offline = b.value("offline", config.offline);
    auto result = context::fetch_region_documents(requests, b.value("resolution", std::string("region")), config);
    json out = {{"report", context::to_json(result.report)},
                {"warnings", result.corpus.warnings},
                {"documents", result.corpus.documents.size()}};
    sess(req).set_corpus(std::move(result.corpus));
    send(res, out);
  }));
  server.Get("/api/context/keyphrases", guarded([sess](const auto& req, auto& res) {
    auto& session = sess(req);
    const auto regions = selected_regions(req, session);
    const auto corpus = session.corpus();
    if (!corpus) throw Error(ErrorCode::not_found, "no context corpus loaded");
    const auto n = static_cast<std::size_t>(std::max(0, int_param(req, "n", 20)));
    send(res, context::to_json(context::extract_keyphrases(*corpus, regions, n)));
  }));
  server.Get("/api/context/paragraphs", guarded([sess](const auto& req, auto& res) {
    auto& session = sess(req);
    const auto phrase = param(req, "phrase");
    if (phrase.empty()) throw Error(ErrorCode::invalid_argument, "phrase is required");
    const auto regions = selected_regions(req, session);
    const auto corpus = session.corpus();
    if (!corpus) throw Error(ErrorCode::not_found, "no context corpus loaded");
    send(res, context::to_json(context::find_paragraphs(*corpus, phrase, regions)));
  }));

  server.Get("/api/report", guarded([sess](const auto& req, auto& res) {
    send(res, sess(req).with_state([](auto& s) { return report::to_json(s.report.value_or(report::Report{})); }));
  }));
  server.Post("/api/report", guarded([this, sess](const auto& req, auto& res) {
    const auto b = body_json(req);
    const auto action = report::action_from_string(jsonio::require(b, "action").template get<std::string>());
    const auto payload = b.value("payload", json::object());
    const auto stamp = now();
    send(res, sess(req).with_state([&](auto& s) {
      auto current = s.report.value_or(report::Report{});
      if (!s.report) current.created_at = stamp;
      auto m = report::mutate_report(current, action, payload, stamp);
      if (!report::unresolved_assets(m.report, s.assets).empty()) {
        throw Error(ErrorCode::not_found, "figure references an unknown asset",
                    {{"unresolved", report::unresolved_assets(m.report, s.assets)}});
      }
      s.report = m.report;
      return json{{"noop", m.noop}, {"report", report::to_json(m.report)}};
    }));
  }));
  server.Post("/api/report/narratives", guarded([this, sess](const auto& req, auto& res) {
    const auto b = body_json(req);
    const auto stamp = now();
    send(res, sess(req).with_state([&](auto& s) {
      std::vector<narrative::NarrativeDoc> docs;
      for (const auto& d : jsonio::require(b, "narratives")) {
        const auto family = jsonio::require(d, "family").template get<std::string>();
        const auto subject = jsonio::require(d, "subject").template get<std::string>();
        if (family == "coefficient") docs.push_back(coefficient_narrative(s, subject));
        else if (family == "diagnostic") docs.push_back(diagnostic_narrative(s, narrative::diagnostic_kind_from_string(subject)));
        else throw Error(ErrorCode::invalid_argument, "unknown narrative family '" + family + "'");
      }
      add_narratives_to_report(s, docs, stamp);
      return report::to_json(*s.report);
    }));
  }));
  server.Post("/api/report/assets", guarded([sess](const auto& req, auto& res) {
    auto asset = report::asset_from_json(body_json(req));
    if (asset.id.empty()) throw Error(ErrorCode::invalid_argument, "asset id is required");
    const auto id = asset.id;
    sess(req).with_state([&](auto& s) {
      s.assets[id] = std::move(asset);
      return 0;
    });
    send(res, {{"id", id}}, 201);
  }));
  server.Get("/api/report/export", guarded([sess](const auto& req, auto& res) {
    res.set_content(sess(req).with_state([](auto& s) { return report::export_html(s.report.value_or(report::Report{}), s.assets); }),
                    "text/html; charset=utf-8");
  }));

  server.Get("/api/state", guarded([sess](const auto& req, auto& res) {
    state::SaveOptions o;
    o.embed_dataset = param(req, "embed", "1") != "0";
    res.set_content(sess(req).with_state([&](auto& s) { return state::save_state(s, o); }), "application/json");
  }));
  server.Post("/api/state", guarded([sess](const auto& req, auto& res) {
    auto& session = sess(req);
    auto current = session.with_state([](auto& s) { return s.dataset; });
    auto loaded = state::load_state(req.body);
    if (!loaded.dataset && current) loaded = state::load_state(req.body, &*current);
    json summary = {{"schema_version", loaded.schema_version},
                    {"dataset_fingerprint", loaded.dataset_fingerprint},
                    {"has_calibration", loaded.model.has_value()},
                    {"clusters", loaded.clusters.size()},
                    {"report_items", loaded.report ? loaded.report->items.size() : 0}};
    session.replace_state(std::move(loaded));
    send(res, summary);
  }));
}

}  // namespace geolens::service
