// mmehr: command-line entry points (gen-data, train, eval, attribute).

#include "mmehr/attribution.hpp"
#include "mmehr/checkpoint.hpp"
#include "mmehr/io.hpp"
#include "mmehr/random.hpp"
#include "mmehr/report.hpp"
#include "mmehr/synthetic.hpp"
#include "mmehr/train.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace mmehr;

namespace {

constexpr const char* kOutputEnv = "MMEHR_OUTPUT_DIR";
const char* const kSplits[] = {"train", "validation", "test"};

struct Outputs {
  fs::path dir;
  std::vector<std::string> files;

  fs::path add(const std::string& name) {
    files.push_back(name);
    return dir / name;
  }
};

fs::path resolve_output(const std::string& flag) {
  if (const char* env = std::getenv(kOutputEnv); env && *env) {
    std::cerr << "note: " << kOutputEnv << " overrides --out (" << env << ")\n";
    return env;
  }
  if (flag.empty()) throw Error("--out is required (or set " + std::string(kOutputEnv) + ")");
  return flag;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Exit status 0 requires every declared output to exist and be non-empty.
void finish(const Outputs& out, std::string_view command, nlohmann::json arguments, double seconds) {
  for (const auto& f : out.files) {
    const fs::path p = out.dir / f;
    if (!fs::is_regular_file(p) || fs::file_size(p) == 0) throw Error("output not written: " + p.string());
  }
  nlohmann::json manifest = run_manifest(command, arguments, out.files);
  manifest["started_utc"] = utc_now();
  manifest["wall_clock_seconds"] = seconds;
  write_json(out.dir / "manifest.json", manifest);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct DataDir {
  VariableSchema schema;
  DatasetSplit split;

  const std::vector<ClinicalEpisode>& part(const std::string& name) const {
    if (name == "train") return split.train;
    if (name == "validation") return split.validation;
    if (name == "test") return split.test;
    throw Error("unknown split '" + name + "' (expected train, validation or test)");
  }
};

DataDir load_data(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("dataset directory not found: " + dir.string());
  DataDir d{schema_from_json(nlohmann::json::parse(read_file(dir / "schema.json"))), {}};
  d.split.train = read_episodes(dir / "train.jsonl", d.schema);
  d.split.validation = read_episodes(dir / "validation.jsonl", d.schema);
  d.split.test = read_episodes(dir / "test.jsonl", d.schema);
  check_disjoint(d.split);
  return d;
}

std::string schema_fingerprint(const VariableSchema& schema) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(schema_to_json(schema).dump())));
  return buf;
}

// Owns a loaded embedding file so an EmbeddingSource can point at it.
struct Embeddings {
  nlohmann::json spec;
  EmbeddingMap file;
  HashEmbedder hash;

  EmbeddingSource source() const {
    if (spec.at("kind") == "hash") return hash;
    return &file;
  }
};

Embeddings make_embeddings(const nlohmann::json& spec) {
  Embeddings e;
  e.spec = spec;
  if (spec.at("kind") == "hash") {
    e.hash = HashEmbedder{spec.at("dim").get<Index>(), spec.at("seed").get<std::uint64_t>()};
  } else {
    const fs::path path = spec.at("path").get<std::string>();
    if (!fs::exists(path)) throw Error("embedding file not found: " + path.string());
    e.file = load_embeddings(path);
  }
  return e;
}

nlohmann::json embedding_spec(const std::string& flag, Index notes_dim, std::uint64_t hash_seed) {
  if (flag == "hash") return {{"kind", "hash"}, {"dim", notes_dim}, {"seed", hash_seed}};
  if (flag.rfind("file:", 0) == 0 && flag.size() > 5) return {{"kind", "file"}, {"path", flag.substr(5)}};
  throw Error("--embeddings must be 'hash' or 'file:PATH', got '" + flag + "'");
}

std::vector<EpisodeTensors> prepare(const std::vector<ClinicalEpisode>& episodes, const DataDir& data,
                                    const Embeddings& emb, const std::string& what) {
  PreparedSplit p = prepare_episodes(episodes, data.schema, emb.source());
  if (!p.dropped.empty())
    std::cerr << "warning: " << what << ": dropped " << p.dropped.size() << " episodes without notes\n";
  return std::move(p.episodes);
}

// Checkpoint and dataset must agree on schema and input widths.
void check_compatible(const Checkpoint& ckpt, const DataDir& data, const Embeddings& emb) {
  const ModelConfig& c = ckpt.model.config();
  const std::string fp = ckpt.metadata.value("schema_fingerprint", "");
  if (!fp.empty() && fp != schema_fingerprint(data.schema))
    throw Error("config mismatch: checkpoint was trained on a different variable schema");
  if (c.ts_dim != data.schema.encoded_width())
    throw Error("config mismatch: checkpoint expects " + std::to_string(c.ts_dim) + " time-series channels, data has " +
                std::to_string(data.schema.encoded_width()));
  const Index dim = embedding_dim(emb.source());
  if (dim != c.notes_dim)
    throw Error("config mismatch: checkpoint expects notes dimension " + std::to_string(c.notes_dim) +
                ", embeddings have " + std::to_string(dim));
}

Embeddings checkpoint_embeddings(const Checkpoint& ckpt, const std::string& flag) {
  if (!flag.empty()) {
    const std::uint64_t seed = ckpt.metadata.contains("embeddings") ? ckpt.metadata["embeddings"].value("seed", 0ULL) : 0;
    return make_embeddings(embedding_spec(flag, ckpt.model.config().notes_dim, seed));
  }
  if (!ckpt.metadata.contains("embeddings")) throw Error("checkpoint records no embedding source; pass --embeddings");
  return make_embeddings(ckpt.metadata["embeddings"]);
}

std::string eval_csv(const std::string& split, const EvalResult& r) {
  std::ostringstream os;
  os << "split,aucroc,aucpr,f1,threshold,tp,fp,tn,fn\n"
     << split << ',' << r.aucroc << ',' << r.aucpr << ',' << r.f1 << ',' << r.threshold << ',' << r.counts.tp << ','
     << r.counts.fp << ',' << r.counts.tn << ',' << r.counts.fn << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  Index n = 1000;
  std::uint64_t seed = 0;
  std::string signal_config;
  std::string out;
};

void gen_data(const GenDataArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  SignalConfig signal;
  if (!a.signal_config.empty()) signal = signal_config_from_json(nlohmann::json::parse(read_file(a.signal_config)));
  const VariableSchema schema = default_schema();
  const SyntheticDataset ds = generate_synthetic(a.n, a.seed, signal, schema);

  Outputs out{resolve_output(a.out), {}};
  fs::create_directories(out.dir);
  write_json(out.add("schema.json"), schema_to_json(schema));
  write_json(out.add("signal_config.json"), signal_config_to_json(signal));
  write_episodes(out.add("train.jsonl"), ds.split.train, schema);
  write_episodes(out.add("validation.jsonl"), ds.split.validation, schema);
  write_episodes(out.add("test.jsonl"), ds.split.test, schema);

  nlohmann::json stats = nlohmann::json::object();
  std::vector<ClinicalEpisode> all;
  for (const char* s : kSplits) {
    const auto& part = std::string(s) == "train" ? ds.split.train
                       : std::string(s) == "validation" ? ds.split.validation : ds.split.test;
    const SplitStats st = split_stats(part);
    stats[s] = {{"episodes", st.episodes}, {"positives", st.positives}, {"prevalence", st.prevalence}};
    all.insert(all.end(), part.begin(), part.end());
  }
  stats["prevalence"] = prevalence(all);
  write_json(out.add("stats.json"), stats);
  finish(out, "gen-data",
         {{"n", a.n}, {"seed", a.seed}, {"signal_config", a.signal_config}, {"out", out.dir.string()}, {"stats", stats}},
         seconds_since(t0));
  std::cout << "wrote " << a.n << " episodes to " << out.dir.string() << " (prevalence "
            << stats["prevalence"].get<double>() << ")\n";
}

struct TrainArgs {
  std::string data;
  std::string model;
  std::string embeddings = "hash";
  Index seeds = 1;
  std::uint64_t seed = 0;
  std::string config;
  unsigned jobs = 1;
  std::string out;
};

void train_cmd(const TrainArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelKind kind = parse_model_kind(a.model);
  if (a.seeds < 1) throw Error("--seeds must be >= 1");
  ModelConfig mcfg;
  TrainConfig tcfg;
  std::uint64_t hash_seed = 0;
  if (!a.config.empty()) {
    const nlohmann::json j = nlohmann::json::parse(read_file(a.config));
    if (j.contains("model")) mcfg = model_config_from_json(j["model"]);
    if (j.contains("train")) tcfg = train_config_from_json(j["train"]);
    hash_seed = j.value("hash_seed", hash_seed);
  }
  const DataDir data = load_data(a.data);
  const Embeddings emb = make_embeddings(embedding_spec(a.embeddings, mcfg.notes_dim, hash_seed));
  const Index dim = embedding_dim(emb.source());
  if (dim != mcfg.notes_dim) {
    std::cerr << "note: notes dimension set to " << dim << " to match the embedding file\n";
    mcfg.notes_dim = dim;
  }
  mcfg.ts_dim = data.schema.encoded_width();
  mcfg.validate(kind);
  tcfg.validate();

  const auto train_set = prepare(data.split.train, data, emb, "train");
  const auto val_set = prepare(data.split.validation, data, emb, "validation");
  const auto test_set = prepare(data.split.test, data, emb, "test");

  std::vector<std::uint64_t> seeds;
  for (Index i = 0; i < a.seeds; ++i) seeds.push_back(a.seed + static_cast<std::uint64_t>(i));
  std::vector<TrainResult> runs = train_seeds(kind, mcfg, train_set, val_set, tcfg, seeds, a.jobs);

  Outputs out{resolve_output(a.out), {}};
  fs::create_directories(out.dir);
  const std::vector<int> test_labels = labels_of(test_set);
  std::vector<EvalResult> test_results;
  std::ostringstream runs_csv;
  runs_csv << "model,seed,best_epoch,epochs,val_aucpr,test_aucroc,test_aucpr,test_f1\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    TrainResult& r = runs[i];
    const std::string tag = "seed" + std::to_string(seeds[i]);
    r.best.metadata["embeddings"] = emb.spec;
    r.best.metadata["schema_fingerprint"] = schema_fingerprint(data.schema);
    save_checkpoint(out.add("checkpoint_" + tag + ".bin"), r.best);
    std::string log;
    for (const auto& e : r.log) log += e.dump() + "\n";
    write_file_atomic(out.add("log_" + tag + ".jsonl"), log);

    const EvalResult test = evaluate(predict_all(r.best.model, test_set), test_labels);
    test_results.push_back(test);
    runs_csv << a.model << ',' << seeds[i] << ',' << r.best_epoch << ',' << r.epochs_run << ','
             << r.best_validation.aucpr << ',' << test.aucroc << ',' << test.aucpr << ',' << test.f1 << '\n';
  }
  write_file_atomic(out.add("runs.csv"), runs_csv.str());
  const AggregateResult agg = aggregate(test_results);
  write_file_atomic(out.add("metrics.csv"), metrics_csv({{a.model, agg}}));

  for (const auto& f : out.files)
    if (f.rfind("checkpoint_", 0) == 0) load_checkpoint(out.dir / f);
  finish(out, "train",
         {{"data", a.data},
          {"model", a.model},
          {"embeddings", emb.spec},
          {"seeds", seeds},
          {"jobs", a.jobs},
          {"model_config", model_config_to_json(mcfg)},
          {"train_config", train_config_to_json(tcfg)},
          {"out", out.dir.string()}},
         seconds_since(t0));
  std::cout << metrics_csv({{a.model, agg}});
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string embeddings;
  std::string out;
};

void eval_cmd(const EvalArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const DataDir data = load_data(a.data);
  const Embeddings emb = checkpoint_embeddings(ckpt, a.embeddings);
  check_compatible(ckpt, data, emb);
  const auto episodes = prepare(data.part(a.split), data, emb, a.split);
  const std::vector<int> labels = labels_of(episodes);
  const EvalResult r = evaluate(predict_all(ckpt.model, episodes), labels);
  const std::string csv = eval_csv(a.split, r);
  std::cout << csv;

  const bool to_dir = !a.out.empty() || std::getenv(kOutputEnv);
  if (!to_dir) return;
  Outputs out{resolve_output(a.out), {}};
  fs::create_directories(out.dir);
  write_file_atomic(out.add("eval_" + a.split + ".csv"), csv);
  finish(out, "eval",
         {{"checkpoint", a.checkpoint}, {"data", a.data}, {"split", a.split}, {"embeddings", emb.spec}},
         seconds_since(t0));
}

struct AttributeArgs {
  std::string checkpoint;
  std::string data;
  std::string mode;
  std::string split = "test";
  std::string embeddings;
  std::string labels = "all";
  Index limit = 0;
  Index steps = 256;
  std::string estimator = "sampled";
  Index permutations = 64;
  std::uint64_t seed = 0;
  Index top_k = 10;
  std::string out;
};

void attribute_cmd(const AttributeArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const DataDir data = load_data(a.data);
  const Embeddings emb = checkpoint_embeddings(ckpt, a.embeddings);
  check_compatible(ckpt, data, emb);
  if (a.labels != "all" && a.labels != "positive") throw Error("--labels must be 'all' or 'positive'");

  // Episodes in split order, optionally positives only, optionally truncated.
  std::vector<ClinicalEpisode> selected;
  for (const auto& e : data.part(a.split)) {
    if (a.labels == "positive" && e.label != 1) continue;
    selected.push_back(e);
    if (a.limit > 0 && static_cast<Index>(selected.size()) >= a.limit) break;
  }
  PreparedSplit prepared = prepare_episodes(selected, data.schema, emb.source());
  if (prepared.episodes.empty()) throw Error("attribute: no episodes selected");
  std::vector<std::vector<NoteEvent>> notes;
  for (const auto& e : selected)
    if (std::find(prepared.dropped.begin(), prepared.dropped.end(), e.id) == prepared.dropped.end())
      notes.push_back(e.note_events);

  Outputs out{resolve_output(a.out), {}};
  fs::create_directories(out.dir);
  nlohmann::json arguments = {{"checkpoint", a.checkpoint}, {"data", a.data},     {"mode", a.mode},
                              {"split", a.split},           {"labels", a.labels}, {"limit", a.limit},
                              {"episodes", prepared.episodes.size()}};

  if (a.mode == "notes") {
    const IGConfig ig{a.steps};
    std::vector<TokenAttribution> attributions;
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < prepared.episodes.size(); ++i) {
      try {
        attributions.push_back(attribute_note_tokens(ckpt.model, prepared.episodes[i], notes[i], emb.source(), ig));
      } catch (const GranularityUnavailable& ex) {
        if (warnings.empty()) {
          std::cerr << "warning: " << ex.what() << "; falling back to per-hour scores\n";
          warnings.push_back(ex.what());
        }
        attributions.push_back(attribute_note_hours(ckpt.model, prepared.episodes[i], ig));
      }
    }
    nlohmann::json summary = attribution_summary(attributions);
    summary["steps"] = a.steps;
    summary["baseline"] = "zero";
    summary["target"] = "probability";
    summary["warnings"] = warnings;
    write_json(out.add("attribution_summary.json"), summary);

    const bool token_level = attributions.front().token_level;
    if (token_level) {
      std::vector<std::vector<RankedWord>> rankings;
      for (const auto& att : attributions)
        for (const auto& note : tokens_by_note(att))
          if (!note.empty()) rankings.push_back(postprocess_tokens(note));
      write_file_atomic(out.add("tokens.csv"), token_attributions_csv(attributions));
      write_file_atomic(out.add("frequency.csv"), frequency_csv(top_word_frequency(rankings, a.top_k)));
      std::ostringstream words;
      words << "word,mean_score,occurrences\n";
      for (const auto& w : mean_word_scores(rankings)) words << w.word << ',' << w.mean_score << ',' << w.occurrences << '\n';
      write_file_atomic(out.add("word_scores.csv"), words.str());
      write_file_atomic(out.add("heatmap.html"), token_heatmap_html(attributions, notes));
    } else {
      std::ostringstream hours;
      hours << "episode,hour,score\n";
      for (const auto& att : attributions)
        for (std::size_t h = 0; h < att.hour_scores.size(); ++h)
          hours << att.episode_id << ',' << h << ',' << att.hour_scores[h] << '\n';
      write_file_atomic(out.add("hours.csv"), hours.str());
    }
    arguments["steps"] = a.steps;
    std::cout << "attributed " << attributions.size() << " episodes; max completeness residual "
              << summary["max_residual"].get<double>() << "\n";
  } else if (a.mode == "variables") {
    ShapleyEstimator est;
    if (a.estimator == "exact") {
      est.kind = ShapleyEstimator::Kind::kExact;
    } else if (a.estimator != "sampled") {
      throw Error("--estimator must be 'exact' or 'sampled'");
    }
    est.permutations = a.permutations;
    est.seed = a.seed;
    const ShapleyReport report = variable_shapley(ckpt.model, prepared.episodes, data.schema, est, ckpt.step > 0);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    write_file_atomic(out.add("shapley.csv"), shapley_csv(report));
    write_file_atomic(out.add("shapley_top10.svg"), shapley_bar_svg(report, 10));
    std::ostringstream per;
    per << "episode,variable,value,stderr\n";
    for (const auto& e : report.episodes)
      for (std::size_t v = 0; v < e.values.size(); ++v)
        per << e.episode_id << ',' << report.variables[v].variable << ',' << e.values[v] << ',' << e.standard_errors[v]
            << '\n';
    write_file_atomic(out.add("shapley_episodes.csv"), per.str());
    arguments["estimator"] = a.estimator;
    arguments["permutations"] = a.permutations;
    arguments["seed"] = a.seed;
    arguments["warnings"] = report.warnings;
    const auto top = report.ranking().front();
    std::cout << "top variable by mean |phi|: " << report.variables[top].variable << "\n";
  } else {
    throw Error("--mode must be 'notes' or 'variables'");
  }
  finish(out, "attribute", arguments, seconds_since(t0));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal note + clinical-variable mortality model"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  g->add_option("--n", gen.n, "Number of episodes")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--signal-config", gen.signal_config, "JSON file with planted-signal settings")->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one model kind over several seeds");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--model", tr.model, "fusion | lstm_vars | transformer_vars | notes_only | lstm_fusion")->required();
  t->add_option("--embeddings", tr.embeddings, "hash or file:PATH");
  t->add_option("--seeds", tr.seeds, "Number of runs");
  t->add_option("--seed", tr.seed, "First seed");
  t->add_option("--config", tr.config, "JSON with 'model' and 'train' sections")->check(CLI::ExistingFile);
  t->add_option("--jobs", tr.jobs, "Worker threads across seeds");
  t->add_option("--out", tr.out, "Output directory");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  e->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data)->required();
  e->add_option("--split", ev.split, "train | validation | test");
  e->add_option("--embeddings", ev.embeddings, "Override the checkpoint's embedding source");
  e->add_option("--out", ev.out, "Also write eval_<split>.csv here");

  AttributeArgs at;
  auto* a = app.add_subcommand("attribute", "Integrated Gradients over note tokens or Shapley values over variables");
  a->add_option("--checkpoint", at.checkpoint)->required()->check(CLI::ExistingFile);
  a->add_option("--data", at.data)->required();
  a->add_option("--mode", at.mode, "notes | variables")->required();
  a->add_option("--split", at.split);
  a->add_option("--embeddings", at.embeddings, "Override the checkpoint's embedding source");
  a->add_option("--labels", at.labels, "all | positive");
  a->add_option("--limit", at.limit, "At most this many episodes (0 = all)");
  a->add_option("--steps", at.steps, "IG steps");
  a->add_option("--estimator", at.estimator, "exact | sampled");
  a->add_option("--permutations", at.permutations, "Permutations per episode (sampled estimator)");
  a->add_option("--seed", at.seed, "Shapley sampling seed");
  a->add_option("--top-k", at.top_k, "Words per note in the frequency table");
  a->add_option("--out", at.out, "Output directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*g) gen_data(gen);
    if (*t) train_cmd(tr);
    if (*e) eval_cmd(ev);
    if (*a) attribute_cmd(at);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
