// phonosynth command-line front end.

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "phonosynth/alignment.hpp"
#include "phonosynth/config.hpp"
#include "phonosynth/datagen.hpp"
#include "phonosynth/errors.hpp"
#include "phonosynth/hash.hpp"
#include "phonosynth/http.hpp"
#include "phonosynth/pipeline.hpp"
#include "phonosynth/session.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace phonosynth;

namespace {

struct Common {
  std::string config_dir;
  std::string engine_config;  // defaults.toml override
  fs::path dir() const { return config_dir.empty() ? default_config_dir() : fs::path(config_dir); }
  VisemeTable table() const { return VisemeTable::load(dir() / "visemes.tsv"); }
  Lexicon lexicon() const { return Lexicon::load(dir() / "lexicon.dict"); }
  EngineConfig engine() const {
    const fs::path p = engine_config.empty() ? dir() / "defaults.toml" : fs::path(engine_config);
    return fs::exists(p) || !engine_config.empty() ? load_engine_config(p) : EngineConfig{};
  }
};

// Options shared by search, stitch and synth.
struct EditOptions {
  std::string text;
  std::string alignment;
  std::string cost_file;
  std::string target;
  std::string at;
  std::vector<std::string> radius;
  std::vector<std::string> closure;

  void add(CLI::App* cmd, bool stitching) {
    cmd->add_option("--edit,-e", text, "edit text, e.g. \"the quick [smile:1.5s] fox\", or an alignment file")
        ->required();
    cmd->add_option("--alignment", alignment, "phoneme timings for the edit (NAME START END per line)");
    cmd->add_option("--cost", cost_file, "TOML file with search cost weights");
    cmd->add_option("--target", target, "target clip; supplies context phonemes around the edit");
    cmd->add_option("--at", at, "edit location in the target transcript: BEGIN:END replaces, N inserts");
    if (stitching) {
      cmd->add_option("--radius", radius, "boundary smoothing radius override, BOUNDARY=FRAMES");
      cmd->add_option("--closure", closure, "closure length override, TOKEN=FRAMES");
    }
  }

  std::optional<EditLocation> location() const {
    if (at.empty()) return std::nullopt;
    const auto colon = at.find(':');
    EditLocation loc;
    try {
      loc.begin = std::stoul(at.substr(0, colon));
      loc.end = colon == std::string::npos ? loc.begin : std::stoul(at.substr(colon + 1));
    } catch (const std::exception&) {
      throw InvalidEditError("--at expects BEGIN:END or N, got '" + at + "'");
    }
    return loc;
  }

  StitchOverrides overrides() const {
    StitchOverrides o;
    auto parse = [](const std::string& s, const char* what) {
      const auto eq = s.find('=');
      try {
        if (eq == std::string::npos) throw std::invalid_argument(s);
        return std::pair<std::size_t, int>(std::stoul(s.substr(0, eq)), std::stoi(s.substr(eq + 1)));
      } catch (const std::exception&) {
        throw InvalidEditError(std::string(what) + " expects INDEX=FRAMES, got '" + s + "'");
      }
    };
    for (const auto& s : radius) o.boundary_radius.insert(parse(s, "--radius"));
    for (const auto& s : closure) o.closure_frames.insert(parse(s, "--closure"));
    return o;
  }

  EditScript script(const Common& c, const VisemeTable& table) const {
    // An existing file is taken as the aligned phonemes of the edit itself.
    if (fs::is_regular_file(text)) {
      EditScript s;
      s.tokens = ingest_alignment(text);
      if (s.tokens.empty()) throw InvalidEditError("alignment " + text + " has no phonemes");
      for (const Token& t : s.tokens) table.viseme_of(t);
      s.text = describe(s.tokens.tokens());
      return s;
    }
    EditTiming timing;
    if (!alignment.empty()) timing.alignment = ingest_alignment(alignment);
    return parse_edit_script(text, c.lexicon(), table, timing);
  }

  CostConfig cost(const EngineConfig& engine) const {
    return cost_file.empty() ? engine.cost : load_cost_config(cost_file);
  }
};

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, j.dump(2) + "\n");
}

json affine_json(const AffineMap& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.a.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.a.cols(); ++c) row.push_back(m.a(r, c));
    a.push_back(std::move(row));
  }
  json b = json::array();
  for (Eigen::Index r = 0; r < m.b.size(); ++r) b.push_back(m.b(r));
  return {{"a", std::move(a)}, {"b", std::move(b)}, {"condition_number", m.condition_number}};
}

void print_partition(const TokenSequence& edit, const PartitionResult& p, const RepositoryBundle& repo) {
  std::cout << "total cost " << p.total_cost << " over " << p.segments.size() << " segment(s)\n";
  for (std::size_t i = 0; i < p.segments.size(); ++i) {
    const SegmentMatch& s = p.segments[i];
    const auto core = edit.tokens().subspan(s.core_begin, s.core_size());
    std::cout << "  [" << i << "] " << describe(core) << "  <- ";
    if (s.gesture) {
      const Token& g = repo.gestures.at(s.repo_begin);
      std::cout << "gesture " << g.name << " @" << g.start_s << "s";
    } else {
      const auto m = repo.tokens.tokens().subspan(s.repo_begin, s.match_size());
      std::cout << describe(m) << " @" << m.front().start_s << "s";
    }
    std::cout << "  cost " << s.cost() << " (" << s.candidate_count << " candidates)\n";
  }
}

std::atomic<HttpServer*> g_server{nullptr};

void on_signal(int) {
  if (HttpServer* s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-based editing of talking-head expression tracks"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config-dir", common.config_dir, "directory with visemes.tsv, lexicon.dict, defaults.toml");
  app.add_option("--config", common.engine_config, "engine defaults TOML (default: <config-dir>/defaults.toml)");

  // datagen
  auto* datagen = app.add_subcommand("datagen", "generate a synthetic repository set and target clip");
  std::string plan_file, out_dir;
  std::optional<double> dg_duration, dg_target_duration;
  std::optional<std::uint64_t> dg_seed;
  datagen->add_option("--plan,--spec", plan_file, "datagen TOML (default: <config-dir>/datagen.toml)");
  datagen->add_option("--out,-o", out_dir, "output directory")->required();
  datagen->add_option("--seed", dg_seed, "world seed");
  datagen->add_option("--duration", dg_duration, "repository length in seconds");
  datagen->add_option("--target-duration", dg_target_duration, "target clip length in seconds");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the retargeting model on the neutral repository");
  std::string repo_file, target_file, model_out;
  std::optional<int> epochs, hidden;
  bool quiet = false;
  train_cmd->add_option("--repo", repo_file, "neutral repository bundle")->required();
  train_cmd->add_option("--target", target_file, "target clip")->required();
  train_cmd->add_option("--out,-o", model_out, "checkpoint to write")->required();
  train_cmd->add_option("--epochs", epochs, "maximum epochs");
  train_cmd->add_option("--hidden", hidden, "hidden layer width");
  train_cmd->add_flag("--quiet,-q", quiet, "no per-epoch log");

  // search
  auto* search_cmd = app.add_subcommand("search", "find the optimal repository partition for an edit");
  EditOptions search_opts;
  std::string trace_out;
  search_cmd->add_option("--repo", repo_file, "repository bundle")->required();
  search_opts.add(search_cmd, false);
  search_cmd->add_option("--trace", trace_out, "write the search trace JSON here");

  // stitch
  auto* stitch_cmd = app.add_subcommand("stitch", "search and stitch an edit in source-actor space");
  EditOptions stitch_opts;
  std::string track_out;
  stitch_cmd->add_option("--repo", repo_file, "repository bundle")->required();
  stitch_opts.add(stitch_cmd, true);
  stitch_cmd->add_option("--out,-o", track_out, "stitched track as little-endian f32 (frames x 64)")->required();
  stitch_cmd->add_option("--trace", trace_out, "write search and stitch traces as JSON");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "full pipeline: search, stitch, retarget, expand");
  EditOptions synth_opts;
  std::string model_file, style = "neutral";
  std::vector<std::string> style_repos;
  synth_cmd->add_option("--repo", repo_file, "neutral repository bundle")->required();
  synth_cmd->add_option("--style-repo", style_repos, "extra repository style, NAME=PATH");
  synth_cmd->add_option("--style", style, "repository style to search");
  synth_cmd->add_option("--model", model_file, "retargeting checkpoint")->required();
  synth_opts.add(synth_cmd, true);
  synth_cmd->add_option("--out,-o", out_dir, "output directory")->required();
  // --target is required here; EditOptions registers it.

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "run the session HTTP service");
  std::string root = "sessions", host = "127.0.0.1";
  int port = 8080;
  serve_cmd->add_option("--root", root, "session storage directory");
  serve_cmd->add_option("--host", host, "listen address");
  serve_cmd->add_option("--port", port, "listen port (0 picks one)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*datagen) {
      DatagenPlan plan = load_datagen_plan(plan_file.empty() ? common.dir() / "datagen.toml" : fs::path(plan_file));
      if (dg_seed) plan.spec.seed = *dg_seed;
      if (dg_duration) plan.spec.duration_s = *dg_duration;
      if (dg_target_duration) plan.spec.target_duration_s = *dg_target_duration;
      plan.spec.validate();
      const VisemeTable table = common.table();
      const fs::path out(out_dir);
      fs::create_directories(out);
      json manifest = {{"seed", plan.spec.seed}, {"repositories", json::object()}};
      for (const StyleVariant& v : plan.styles) {
        const RepositoryBundle repo = gen_repository(spec_for_style(plan.spec, v), table);
        const fs::path p = out / ("repo_" + v.name + ".json");
        save_bundle(repo, p);
        manifest["repositories"][v.name] = p.filename().string();
        std::cout << "wrote " << p.string() << " (" << repo.tokens.size() << " phonemes, " << repo.track.size()
                  << " frames)\n";
      }
      const TargetClip target = gen_target(plan.spec, table);
      save_target(target, out / "target.json");
      manifest["target"] = "target.json";
      std::cout << "wrote " << (out / "target.json").string() << " (" << target.tokens.size() << " phonemes)\n";
      const SynthWorld world = make_world(plan.spec, table);
      write_json(out / "affine.json", affine_json(world.affine));
      manifest["affine"] = "affine.json";
      write_json(out / "manifest.json", manifest);
      return 0;
    }

    const EngineConfig engine = common.engine();

    if (*train_cmd) {
      const VisemeTable table = common.table();
      const TargetClip target = load_target(target_file);
      const RepositoryBundle repo = load_bundle(repo_file, target.track.fps);
      ModelConfig mc = engine.model;
      TrainConfig tc = engine.train;
      if (hidden) mc.hidden = *hidden;
      if (epochs) tc.max_epochs = *epochs;
      mc.lambda = tc.lambda;
      if (!quiet) {
        tc.on_epoch = [](const EpochReport& r) {
          std::cout << "epoch " << std::setw(3) << r.epoch + 1 << "  loss " << std::setprecision(6) << r.mean_loss
                    << "  lr " << r.learning_rate << "  " << std::setprecision(3) << r.seconds << "s\n"
                    << std::flush;
          return true;
        };
      }
      const TrainResult result = train_retargeting(repo, target, table, mc, tc, engine.cost);
      result.model.save(model_out);
      std::cout << "saved " << model_out << " checksum " << hex64(result.model.checksum()) << "\n";
      return 0;
    }

    if (*search_cmd || *stitch_cmd) {
      EditOptions& opts = *search_cmd ? search_opts : stitch_opts;
      const VisemeTable table = common.table();
      const RepositoryBundle repo = load_bundle(repo_file);
      const EditScript edit = opts.script(common, table);
      SearchContext ctx;
      if (!opts.target.empty()) ctx = context_for(load_target(opts.target), edit.tokens, opts.location());
      const BigramIndex index = build_index(repo, table);
      const CostConfig cost = opts.cost(engine);
      const PartitionResult partition = optimal_partition(edit.tokens, ctx, repo, index, table, cost);
      print_partition(edit.tokens, partition, repo);
      json trace = search_trace_json(edit.tokens, partition, repo);
      if (*stitch_cmd) {
        const StitchConfig sc = apply_overrides(engine.stitch, opts.overrides());
        const StitchResult st = stitch(partition, edit.tokens, ctx, repo, table, sc);
        write_file_atomic(track_out, encode_track_f32(st.track));
        std::cout << "wrote " << track_out << " (" << st.track.size() << " frames at " << st.track.fps << " fps, "
                  << st.trace.closures.size() << " closure(s))\n";
        trace["stitch"] = to_json(st.trace);
      }
      if (!trace_out.empty()) write_json(trace_out, trace);
      return 0;
    }

    if (*synth_cmd) {
      if (synth_opts.target.empty()) throw Error("synth needs --target");
      EngineContext ctx;
      ctx.table = common.table();
      ctx.lexicon = common.lexicon();
      ctx.target = load_target(synth_opts.target);
      ctx.styles["neutral"] = StyleRepository::make(load_bundle(repo_file, ctx.target.track.fps), ctx.table);
      for (const std::string& s : style_repos) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw Error("--style-repo expects NAME=PATH, got '" + s + "'");
        ctx.styles[s.substr(0, eq)] =
            StyleRepository::make(load_bundle(s.substr(eq + 1), ctx.target.track.fps), ctx.table);
      }
      ctx.model = std::make_shared<const RetargetModel>(RetargetModel::load(model_file));
      SynthesisRequest req;
      req.edit = synth_opts.script(common, ctx.table);
      req.style = style;
      req.cost = synth_opts.cost(engine);
      req.stitch = apply_overrides(engine.stitch, synth_opts.overrides());
      req.location = synth_opts.location();
      const SynthesisResult r = synthesize(ctx, req);
      print_partition(r.request.edit.tokens, r.partition, ctx.style(style).bundle);
      const fs::path out(out_dir);
      fs::create_directories(out);
      write_file_atomic(out / "track.f32", encode_track_f32(r.track));
      write_file_atomic(out / "stitched.f32", encode_track_f32(r.stitched));
      write_json(out / "result.json", result_json(r, ctx));
      std::cout << "result " << r.id << ": " << r.track.size() << " frames -> " << out.string() << "\n";
      return 0;
    }

    if (*serve_cmd) {
      SessionStore store(root);
      HttpServer server(store);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on http://" << host << ":" << bound << " (sessions in " << store.root().string()
                << ")\n"
                << std::flush;
      server.run();
      g_server = nullptr;
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
