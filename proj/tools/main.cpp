#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "geolens/common/digest.hpp"
#include "geolens/common/error.hpp"
#include "geolens/context/context.hpp"
#include "geolens/dataset/geojson.hpp"
#include "geolens/dataset/synthetic.hpp"
#include "geolens/regression/calibrate.hpp"
#include "geolens/service/pipeline.hpp"
#include "geolens/service/service.hpp"
#include "geolens/state/state.hpp"

#include <httplib.h>

namespace {

using namespace geolens;
using nlohmann::json;
namespace fs = std::filesystem;

struct Globals {
  std::uint64_t seed = 0;
  bool offline = false;
  std::string out;
  std::string timestamp;
  std::string state_path;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot read '" + path + "'", {{"path", path}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  const auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::invalid_argument, "cannot write '" + path + "'", {{"path", path}});
    out << bytes;
  }
  fs::rename(tmp, path);
}

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) std::cout << text << (text.empty() || text.back() != '\n' ? "\n" : "");
  else write_file(g.out, text);
}

void emit(const Globals& g, const json& j) { emit(g, j.dump(2)); }

std::string now(const Globals& g) {
  if (!g.timestamp.empty()) return g.timestamp;
  const auto t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

state::AnalyticalState load(const Globals& g) {
  if (g.state_path.empty()) throw Error(ErrorCode::invalid_argument, "--state is required");
  return state::load_state(read_file(g.state_path));
}

void save(const Globals& g, const state::AnalyticalState& s) { write_file(g.state_path, state::save_state(s)); }

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json model_brief(const regression::CalibratedModel& m) {
  return {{"family", regression::to_string(m.family)},
          {"surfaces", m.surface_names},
          {"bandwidths", m.bandwidths},
          {"enp_per_surface", m.enp_per_surface},
          {"hat_trace", m.hat_trace},
          {"rss", m.rss()},
          {"iterations", m.trace.size()},
          {"regions", m.n()}};
}

std::vector<context::FetchRequest> region_requests(const std::string& spec, const std::string& file) {
  std::vector<context::FetchRequest> out;
  if (!file.empty()) {
    for (const auto& r : json::parse(read_file(file))) {
      out.push_back({r.at("region_id").get<std::string>(), r.value("title", std::string{})});
    }
  }
  for (const auto& item : split(spec)) {
    const auto eq = item.find('=');
    out.push_back(eq == std::string::npos ? context::FetchRequest{item, item}
                                          : context::FetchRequest{item.substr(0, eq), item.substr(eq + 1)});
  }
  return out;
}

int fail(const json& error) {
  std::cerr << error.dump() << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  Globals g;
  CLI::App app{"Spatial regression analysis with narrated results"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", g.seed, "Seed for permutation tests, clustering and synthetic data");
  app.add_flag("--offline", g.offline, "Read context documents from fixtures only");
  app.add_option("--out", g.out, "Output file (stdout when omitted)");
  app.add_option("--timestamp", g.timestamp, "Timestamp recorded in reports");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic grid dataset as GeoJSON");
  std::string synth_kind = "multiscale";
  int rows = 20, cols = 20;
  synth->add_option("kind", synth_kind, "multiscale, trend or election")->check(CLI::IsMember({"multiscale", "trend", "election"}));
  synth->add_option("--rows", rows);
  synth->add_option("--cols", cols);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load a GeoJSON dataset into a new state file");
  std::string geojson_path, id_key;
  bool planar = false;
  ingest->add_option("geojson", geojson_path)->required();
  ingest->add_option("--id-key", id_key, "Property holding the region id");
  ingest->add_flag("--planar", planar, "Coordinates are already planar");
  ingest->add_option("--state", g.state_path)->required();

  // screen
  auto* screen = app.add_subcommand("screen", "Profiles, correlations and VIF");
  std::string dependent, independents;
  screen->add_option("--state", g.state_path)->required();
  screen->add_option("--dependent", dependent);
  screen->add_option("--independents", independents, "Comma-separated");

  // train
  auto* train = app.add_subcommand("train", "Calibrate OLS, GWR or MGWR");
  std::string family = "mgwr", kernel = "bisquare", mode = "adaptive";
  std::optional<double> bandwidth;
  double tolerance = 1e-5;
  int max_iterations = 200;
  train->add_option("--state", g.state_path)->required();
  train->add_option("--dependent", dependent)->required();
  train->add_option("--independents", independents, "Comma-separated")->required();
  train->add_option("--family", family)->check(CLI::IsMember({"ols", "gwr", "mgwr"}, CLI::ignore_case));
  train->add_option("--kernel", kernel)->check(CLI::IsMember({"bisquare", "gaussian", "boxcar"}));
  train->add_option("--bandwidth-mode", mode)->check(CLI::IsMember({"adaptive", "fixed"}));
  train->add_option("--bandwidth", bandwidth, "Fixed GWR bandwidth (skips the search)");
  train->add_option("--tolerance", tolerance);
  train->add_option("--max-iterations", max_iterations);
  bool quiet = false;
  train->add_flag("--quiet", quiet, "No progress on stderr");

  // diagnose
  auto* diagnose = app.add_subcommand("diagnose", "Diagnostics and significance masks");
  double xi = 0.05;
  int permutations = 999;
  std::string convention = "predicted_minus_observed";
  diagnose->add_option("--state", g.state_path)->required();
  diagnose->add_option("--xi", xi);
  diagnose->add_option("--permutations", permutations);
  diagnose->add_option("--residual-convention", convention);

  // clusters
  auto* clusters = app.add_subcommand("clusters", "Significant-coefficient clusters");
  std::string surfaces;
  double resolution = 1.0;
  std::size_t min_size = 2;
  clusters->add_option("--state", g.state_path)->required();
  clusters->add_option("--surfaces", surfaces, "Comma-separated (all when omitted)");
  clusters->add_option("--resolution", resolution);
  clusters->add_option("--min-size", min_size);

  // narrate
  auto* narrate = app.add_subcommand("narrate", "Render narratives");
  std::string narrate_family, narrate_subject;
  std::vector<std::string> edits;
  bool as_html = false;
  narrate->add_option("--state", g.state_path)->required();
  narrate->add_option("--family", narrate_family)->check(CLI::IsMember({"coefficient", "diagnostic"}));
  narrate->add_option("--subject", narrate_subject, "Surface or diagnostic kind");
  narrate->add_option("--edit", edits, "paragraph_id=label (needs --family and --subject)");
  narrate->add_flag("--html", as_html, "Emit HTML instead of JSON");

  // context
  auto* context_cmd = app.add_subcommand("context", "Keyphrases and paragraphs from regional documents");
  std::string regions, regions_file, fixtures, cache_dir, cluster, phrase, base_url = "https://en.wikipedia.org";
  std::size_t top_n = 20;
  context_cmd->add_option("--regions", regions, "id or id=title, comma-separated");
  context_cmd->add_option("--regions-file", regions_file, "JSON array of {region_id, title}");
  context_cmd->add_option("--fixtures", fixtures, "Directory of per-region JSON documents");
  context_cmd->add_option("--cache", cache_dir, "Cache directory for fetched pages");
  context_cmd->add_option("--base-url", base_url);
  context_cmd->add_option("--state", g.state_path, "Needed with --cluster");
  context_cmd->add_option("--cluster", cluster, "Restrict to a cluster's regions");
  context_cmd->add_option("--phrase", phrase, "List paragraphs containing the phrase");
  context_cmd->add_option("-n", top_n);

  // report
  auto* report_cmd = app.add_subcommand("report", "Build and export the report");
  std::string title;
  std::vector<std::string> assets, figures;
  report_cmd->add_option("--state", g.state_path)->required();
  report_cmd->add_option("--title", title);
  report_cmd->add_option("--asset", assets, "id=path[:media/type]");
  report_cmd->add_option("--figure", figures, "asset_id:color_scheme:caption");

  // state
  auto* state_cmd = app.add_subcommand("state", "Save or load shareable state files");
  state_cmd->require_subcommand(1);
  state_cmd->fallthrough();
  auto* state_save = state_cmd->add_subcommand("save", "Write a shareable state file to --out");
  bool no_embed = false;
  state_save->add_option("--state", g.state_path)->required();
  state_save->add_flag("--no-embed", no_embed, "Store only the dataset fingerprint");
  auto* state_load = state_cmd->add_subcommand("load", "Validate a state file and write a working copy to --state");
  std::string input, dataset_path;
  state_load->add_option("file", input)->required();
  state_load->add_option("--dataset", dataset_path, "GeoJSON for fingerprint-only files");
  state_load->add_option("--id-key", id_key);
  state_load->add_option("--state", g.state_path)->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--state", g.state_path, "Preload a state file");
  serve->add_option("--fixtures", fixtures);
  serve->add_option("--cache", cache_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail({{"error", "invalid_argument"}, {"message", e.what()}, {"details", {{"exit_code", e.get_exit_code()}}}});
  }

  try {
    if (*synth) {
      dataset::synthetic::Grid grid;
      std::map<std::string, std::vector<double>> columns;
      if (synth_kind == "multiscale") {
        grid.rows = rows;
        grid.cols = cols;
        columns = dataset::synthetic::multiscale_columns(g.seed, rows, cols);
      } else if (synth_kind == "trend") {
        grid.rows = grid.cols = rows;
        columns = dataset::synthetic::linear_trend_columns(g.seed, rows);
      } else {
        grid.rows = rows;
        grid.cols = cols;
        columns = dataset::synthetic::election_columns(g.seed, rows, cols);
      }
      emit(g, dataset::synthetic::grid_geojson(grid, columns));
    } else if (*ingest) {
      dataset::LoadOptions o;
      if (!id_key.empty()) o.id_key = id_key;
      o.planar = planar;
      auto s = service::ingest(dataset::load_geojson(read_file(geojson_path), o));
      s.settings.moran_seed = s.settings.leiden_seed = g.seed;
      save(g, s);
      emit(g, service::dataset_summary(s));
    } else if (*screen) {
      emit(g, service::screen(load(g), dependent, split(independents)));
    } else if (*train) {
      auto s = load(g);
      regression::ModelSpec spec;
      spec.dependent = dependent;
      spec.independents = split(independents);
      spec.family = regression::family_from_string(family);
      spec.kernel = regression::kernel_from_string(kernel);
      spec.bandwidth_mode = regression::bandwidth_mode_from_string(mode);
      spec.bandwidth = bandwidth;
      spec.convergence = {tolerance, max_iterations};
      auto model = regression::calibrate(service::require_dataset(s), spec, [&](const regression::Progress& p) {
        if (!quiet) {
          std::cerr << json{{"stage", p.stage}, {"iteration", p.iteration}, {"aicc", p.aicc}, {"soc", p.soc}}.dump() << "\n";
        }
        return true;
      });
      service::store_calibration(s, spec, std::move(model));
      save(g, s);
      emit(g, model_brief(*s.model));
    } else if (*diagnose) {
      auto s = load(g);
      s.settings.xi = xi;
      s.settings.permutations = permutations;
      s.settings.convention = diagnostics::residual_convention_from_string(convention);
      if (app.get_option("--seed")->count()) s.settings.moran_seed = g.seed;
      service::run_diagnostics(s, dataset::queen_adjacency(service::require_dataset(s)));
      save(g, s);
      emit(g, diagnostics::to_json(*s.diagnostics));
    } else if (*clusters) {
      auto s = load(g);
      s.settings.cluster_resolution = resolution;
      s.settings.cluster_min_size = min_size;
      if (app.get_option("--seed")->count()) s.settings.leiden_seed = g.seed;
      service::run_clusters(s, dataset::queen_adjacency(service::require_dataset(s)), split(surfaces));
      save(g, s);
      json out = json::object();
      for (const auto& [k, v] : s.clusters) out[k] = patterns::to_json(v);
      emit(g, out);
    } else if (*narrate) {
      auto s = load(g);
      std::vector<narrative::NarrativeDoc> docs;
      if (!narrate_family.empty()) {
        if (narrate_subject.empty()) throw Error(ErrorCode::invalid_argument, "--subject is required with --family");
        narrative::NarrativeDoc doc =
            narrate_family == "coefficient"
                ? service::coefficient_narrative(s, narrate_subject)
                : service::diagnostic_narrative(s, narrative::diagnostic_kind_from_string(narrate_subject));
        for (const auto& e : edits) {
          const auto eq = e.find('=');
          if (eq == std::string::npos) throw Error(ErrorCode::invalid_argument, "--edit expects paragraph_id=label");
          doc = service::edit_identifier(s, narrate_family, narrate_subject, e.substr(0, eq), e.substr(eq + 1));
        }
        if (!edits.empty()) save(g, s);
        docs.push_back(std::move(doc));
      } else {
        if (!edits.empty()) throw Error(ErrorCode::invalid_argument, "--edit needs --family and --subject");
        docs = service::all_narratives(s);
      }
      if (as_html) {
        std::string html;
        for (const auto& d : docs) html += narrative::to_html(d);
        emit(g, html);
      } else {
        json out = json::array();
        for (const auto& d : docs) out.push_back(narrative::to_json(d));
        emit(g, out);
      }
    } else if (*context_cmd) {
      auto requests = region_requests(regions, regions_file);
      std::vector<std::string> selection;
      if (!cluster.empty()) selection = service::cluster_regions(load(g), cluster);
      context::FetchConfig config;
      config.offline = g.offline || !fixtures.empty();
      config.fixture_dir = fixtures;
      config.cache_dir = cache_dir;
      config.base_url = base_url;
      if (requests.empty() && config.offline && !fixtures.empty()) {
        for (const auto& e : fs::directory_iterator(fixtures)) {
          if (e.path().extension() == ".json") requests.push_back({e.path().stem().string(), e.path().stem().string()});
        }
        std::sort(requests.begin(), requests.end(), [](const auto& a, const auto& b) { return a.region_id < b.region_id; });
      }
      if (requests.empty()) throw Error(ErrorCode::invalid_argument, "no regions given");
      if (selection.empty()) {
        for (const auto& r : requests) selection.push_back(r.region_id);
      }
      auto result = context::fetch_region_documents(requests, "region", config);
      json out = {{"fetch", context::to_json(result.report)}, {"warnings", result.corpus.warnings}};
      if (!phrase.empty()) out["paragraphs"] = context::to_json(context::find_paragraphs(result.corpus, phrase, selection));
      else out["keyphrases"] = context::to_json(context::extract_keyphrases(result.corpus, selection, top_n));
      emit(g, out);
    } else if (*report_cmd) {
      auto s = load(g);
      const auto stamp = now(g);
      if (!s.report || s.report->items.empty()) service::add_narratives_to_report(s, service::all_narratives(s), stamp);
      if (!title.empty()) s.report->title = title;
      for (const auto& a : assets) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::invalid_argument, "--asset expects id=path[:media/type]");
        auto path = a.substr(eq + 1);
        std::string type;
        if (const auto colon = path.rfind(':'); colon != std::string::npos && path.find('/', colon) != std::string::npos) {
          type = path.substr(colon + 1);
          path = path.substr(0, colon);
        } else {
          const auto ext = fs::path(path).extension().string();
          type = ext == ".svg" ? "image/svg+xml" : ext == ".jpg" || ext == ".jpeg" ? "image/jpeg" : "image/png";
        }
        const auto id = a.substr(0, eq);
        s.assets[id] = {id, type, read_file(path)};
      }
      for (const auto& f : figures) {
        const auto parts = split(f, ':');
        if (parts.size() < 2) throw Error(ErrorCode::invalid_argument, "--figure expects asset_id:color_scheme:caption");
        json item = {{"kind", "map_figure"},
                     {"asset_id", parts[0]},
                     {"color_scheme", parts[1]},
                     {"caption", parts.size() > 2 ? parts[2] : ""},
                     {"provenance", {{"module", "figure"}, {"state_hash", state::analysis_hash(s)}}}};
        s.report = report::mutate_report(*s.report, report::Action::add, {{"item", item}}, stamp).report;
      }
      const auto html = report::export_html(*s.report, s.assets);
      save(g, s);
      emit(g, html);
    } else if (*state_save) {
      state::SaveOptions o;
      o.embed_dataset = !no_embed;
      const auto bytes = state::save_state(load(g), o);
      if (g.out.empty()) throw Error(ErrorCode::invalid_argument, "--out is required");
      write_file(g.out, bytes);
      std::cout << json{{"path", g.out}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}}.dump() << "\n";
    } else if (*state_load) {
      std::optional<dataset::GeoFeatureTable> provided;
      if (!dataset_path.empty()) {
        dataset::LoadOptions o;
        if (!id_key.empty()) o.id_key = id_key;
        provided = dataset::load_geojson(read_file(dataset_path), o);
      }
      const auto s = state::load_state(read_file(input), provided ? &*provided : nullptr);
      if (!s.dataset) throw Error(ErrorCode::integrity, "state holds only a fingerprint; pass --dataset");
      save(g, s);
      emit(g, json{{"schema_version", s.schema_version},
                   {"dataset_fingerprint", s.dataset_fingerprint},
                   {"has_calibration", s.model.has_value()},
                   {"clusters", s.clusters.size()},
                   {"report_items", s.report ? s.report->items.size() : 0}});
    } else if (*serve) {
      service::ServiceConfig config;
      config.fetch.offline = g.offline || !fixtures.empty();
      config.fetch.fixture_dir = fixtures;
      config.fetch.cache_dir = cache_dir;
      service::Service svc(config);
      if (!g.state_path.empty()) svc.session("default").replace_state(load(g));
      httplib::Server server;
      svc.register_routes(server);
      std::cerr << json{{"listening", host + ":" + std::to_string(port)}}.dump() << "\n";
      if (!server.listen(host, port)) throw Error(ErrorCode::invalid_argument, "cannot listen on " + host + ":" + std::to_string(port));
    }
  } catch (const Error& e) {
    return fail(e.to_json());
  } catch (const json::exception& e) {
    return fail({{"error", "parse"}, {"message", e.what()}, {"details", json::object()}});
  } catch (const std::exception& e) {
    return fail({{"error", "internal"}, {"message", e.what()}, {"details", json::object()}});
  }
  return 0;
}
