// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// MMEHR_ACCEPTANCE_ONLY=name[,name...] restricts the run to some criteria.

#include "cli_runner.hpp"
#include "op_cases.hpp"

#include "mmehr/attribution.hpp"
#include "mmehr/io.hpp"
#include "mmehr/metrics.hpp"
#include "mmehr/synthetic.hpp"
#include "mmehr/train.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

using namespace mmehr;
using namespace mmehr::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct AcceptanceConfig {
  ModelConfig model;
  TrainConfig train;
  std::uint64_t hash_seed = 0;
};

AcceptanceConfig load_config() {
  const auto j = nlohmann::json::parse(read_file(fs::path(MMEHR_CONFIG_DIR) / "synthetic.json"));
  AcceptanceConfig c{model_config_from_json(j.at("model")), train_config_from_json(j.at("train")),
                     j.value("hash_seed", std::uint64_t{0})};
  c.model.ts_dim = VariableSchema::kEncodedWidth;
  return c;
}

constexpr Index kEpisodes = 8000;
constexpr std::uint64_t kDataSeed = 1;
constexpr int kSeeds = 5;

// The default-signal dataset shared by the ordering and recovery checks.
struct DefaultRun {
  AcceptanceConfig config;
  SyntheticDataset data;
  std::vector<EpisodeTensors> train, validation, test;
  std::optional<Checkpoint> fusion_seed0;
};

DefaultRun& default_run() {
  static DefaultRun run = [] {
    DefaultRun r;
    r.config = load_config();
    r.data = generate_synthetic(kEpisodes, kDataSeed);
    const HashEmbedder emb{r.config.model.notes_dim, r.config.hash_seed};
    const VariableSchema schema = default_schema();
    r.train = prepare_episodes(r.data.split.train, schema, emb).episodes;
    r.validation = prepare_episodes(r.data.split.validation, schema, emb).episodes;
    r.test = prepare_episodes(r.data.split.test, schema, emb).episodes;
    return r;
  }();
  return run;
}

const Checkpoint& default_fusion() {
  DefaultRun& r = default_run();
  if (!r.fusion_seed0) {
    TrainConfig t = r.config.train;
    t.seed = 0;
    r.fusion_seed0 = train(ModelKind::kFusion, r.config.model, r.train, r.validation, t).best;
  }
  return *r.fusion_seed0;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const Stopwatch clock;
  double worst_op = 0.0;
  std::string worst_name;
  for (const OpCase& c : op_cases()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed * 7919 + 11);
      auto [f, inputs] = c.make(rng, seed);
      const double e = grad_check(f, inputs).max_rel_error;
      if (e > worst_op) {
        worst_op = e;
        worst_name = c.name;
      }
    }
  }
  double worst_model = 0.0;
  const ModelConfig cfg = tiny_config();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    const Model m = Model::initialize(ModelKind::kFusion, cfg, seed);
    const Eigen::VectorXd presence = presence_of(rng, cfg.hours);
    MatrixXd notes = random_matrix(rng, cfg.hours, cfg.notes_dim);
    for (Index t = 0; t < cfg.hours; ++t)
      if (presence(t) == 0.0) notes.row(t).setZero();
    const MatrixXd ts = random_matrix(rng, cfg.hours, cfg.ts_dim);
    const auto r = grad_check(model_loss(m, presence, static_cast<int>(seed % 2)), model_inputs(m, notes, ts));
    worst_model = std::max(worst_model, r.max_rel_error);
  }
  const double secs = clock.seconds();
  return {worst_op < 1e-5 && worst_model < 1e-5 && secs < 120.0,
          "max rel error ops " + fmt(worst_op, 3) + " (" + worst_name + "), fusion model " + fmt(worst_model, 3) +
              ", " + fmt(secs, 3) + " s"};
}

Outcome ig_exactness() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Tensor w = random_tensor(rng, {6, 5});
    const Tensor x = random_tensor(rng, {6, 5});
    const Tensor base = random_tensor(rng, {6, 5});
    const double b = rng.normal();
    const DifferentiableFn f = [&](Tape& t, Var v) { return add(sum(mul(v, t.constant(w))), t.constant(Tensor::scalar(b))); };
    const MatrixXd expected = (x.matrix() - base.matrix()).cwiseProduct(w.matrix());
    for (Index m : {1, 16, 256}) {
      const IGResult r = integrated_gradients(f, x, base, m);
      worst = std::max(worst, (r.attributions.matrix() - expected).cwiseAbs().maxCoeff());
    }
  }
  return {worst < 1e-10, "max attribution error " + fmt(worst, 3)};
}

Outcome ig_completeness() {
  // Toy fusion model trained on a small default-signal dataset.
  ModelConfig mc;
  mc.notes_dim = 32;
  mc.ts_dim = VariableSchema::kEncodedWidth;
  mc.notes_out = 16;
  mc.ts_out = 16;
  mc.mm_out = 32;
  mc.layers = 1;
  mc.heads = 2;
  mc.ff_dim = 32;
  mc.head_hidden = {16};
  TrainConfig tc;
  tc.max_epochs = 8;
  tc.patience = 3;
  tc.l2 = 1e-3;
  const SyntheticDataset data = generate_synthetic(2000, 7);
  const HashEmbedder emb{mc.notes_dim, 0};
  const VariableSchema schema = default_schema();
  const auto tr = prepare_episodes(data.split.train, schema, emb).episodes;
  const auto va = prepare_episodes(data.split.validation, schema, emb).episodes;
  auto te = prepare_episodes(data.split.test, schema, emb).episodes;
  const Model model = train(ModelKind::kFusion, mc, tr, va, tc).best.model;
  if (te.size() > 200) te.resize(200);

  std::vector<double> r512, r16;
  Index within = 0;
  for (const auto& e : te) {
    const TokenAttribution fine = attribute_note_hours(model, e, {512});
    const TokenAttribution coarse = attribute_note_hours(model, e, {16});
    r512.push_back(fine.residual);
    r16.push_back(coarse.residual);
    if (fine.residual <= 0.005 * std::abs(fine.output - fine.baseline_output)) ++within;
  }
  const double share = static_cast<double>(within) / static_cast<double>(te.size());
  const double m512 = median(r512), m16 = median(r16);
  return {te.size() == 200 && share >= 0.95 && m512 < m16,
          std::to_string(within) + "/" + std::to_string(te.size()) + " episodes within 0.5%, median residual m=512 " +
              fmt(m512, 3) + " vs m=16 " + fmt(m16, 3)};
}

// Model-like 10-player game: a logistic of main effects plus pairwise interactions.
std::vector<double> smooth_game(Rng& rng, int n) {
  std::vector<double> main(static_cast<std::size_t>(n));
  for (auto& a : main) a = rng.normal();
  MatrixXd pair = random_matrix(rng, n, n, 0.3);
  std::vector<double> v(std::size_t{1} << n);
  for (std::uint64_t s = 0; s < v.size(); ++s) {
    double z = -1.0;
    for (int i = 0; i < n; ++i) {
      if (!(s >> i & 1)) continue;
      z += main[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < n; ++j)
        if (s >> j & 1) z += pair(i, j);
    }
    v[s] = 1.0 / (1.0 + std::exp(-z));
  }
  return v;
}

Outcome shapley_axioms() {
  const int n = 8;
  double efficiency = 0.0, symmetry = 0.0, dummy = 0.0, linearity = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    std::vector<double> a(std::size_t{1} << n), b(a.size());
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    a[0] = b[0] = 0.0;
    // Player d is a dummy and players 0 and 1 are interchangeable in game a.
    const int d = rng.integer(2, n - 1);
    const std::uint64_t dbit = std::uint64_t{1} << d;
    for (std::uint64_t s = 0; s < a.size(); ++s) {
      const std::uint64_t base = s & ~dbit;
      const std::uint64_t swapped = (base & ~std::uint64_t{3}) | ((base & 1) << 1) | ((base >> 1) & 1);
      a[s] = a[std::min(base, swapped)];
    }
    const auto pa = shapley_exact([&a](std::uint64_t s) { return a[s]; }, n);
    const auto pb = shapley_exact([&b](std::uint64_t s) { return b[s]; }, n);
    const auto pc = shapley_exact([&](std::uint64_t s) { return 1.5 * a[s] - 0.5 * b[s]; }, n);
    double total = 0.0;
    for (double x : pa) total += x;
    efficiency = std::max(efficiency, std::abs(total - (a.back() - a.front())));
    symmetry = std::max(symmetry, std::abs(pa[0] - pa[1]));
    dummy = std::max(dummy, std::abs(pa[static_cast<std::size_t>(d)]));
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      linearity = std::max(linearity, std::abs(pc[k] - (1.5 * pa[k] - 0.5 * pb[k])));
    }
  }
  const bool exact_ok = efficiency < 1e-10 && symmetry < 1e-10 && dummy < 1e-10 && linearity < 1e-10;

  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed + 1000);
    const auto game = smooth_game(rng, 10);
    const CoalitionValue v = [&game](std::uint64_t s) { return game[s]; };
    const auto exact = shapley_exact(v, 10);
    const SampledShapley est = shapley_sampled(v, 10, 2000, seed);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
      err = std::max(err, std::abs(est.values[i] - exact[i]));
      scale = std::max(scale, std::abs(exact[i]));
    }
    worst = std::max(worst, err / scale);
  }
  return {exact_ok && worst <= 0.02,
          "efficiency " + fmt(efficiency, 2) + ", symmetry " + fmt(symmetry, 2) + ", dummy " + fmt(dummy, 2) +
              ", linearity " + fmt(linearity, 2) + "; sampled K=2000 max error relative to max |phi| " + fmt(worst, 3)};
}

double brute_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return num / pairs;
}

double brute_aucpr(const std::vector<double>& s, const std::vector<int>& y) {
  const std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  const double positives = static_cast<double>(std::count(y.begin(), y.end(), 1));
  double prev = 0.0, area = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, predicted = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) {
        predicted += 1.0;
        tp += y[i];
      }
    area += (tp / positives - prev) * tp / predicted;
    prev = tp / positives;
  }
  return area;
}

Outcome metric_oracles() {
  Rng rng(42);
  double worst_roc = 0.0, worst_pr = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.integer(2, 500));
    const double grid = static_cast<double>(rng.integer(2, 50));
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * grid) / grid;
      y[i] = rng.bernoulli(0.15) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    worst_roc = std::max(worst_roc, std::abs(auroc(s, y) - brute_auroc(s, y)));
    worst_pr = std::max(worst_pr, std::abs(aucpr(s, y) - brute_aucpr(s, y)));
  }
  const std::vector<double> negatives(50, 0.1);
  std::vector<int> labels(50, 0);
  for (int i = 0; i < 7; ++i) labels[static_cast<std::size_t>(i)] = 1;
  const double f1_neg = f1(negatives, labels);
  return {worst_roc <= 1e-12 && worst_pr <= 1e-12 && f1_neg == 0.0,
          "max |AUROC - brute| " + fmt(worst_roc, 2) + ", max |AUCPR - brute| " + fmt(worst_pr, 2) +
              ", F1 of all-negative " + fmt(f1_neg)};
}

Outcome ordering() {
  const Stopwatch clock;
  DefaultRun& r = default_run();
  const ModelKind kinds[] = {ModelKind::kFusion, ModelKind::kLstmFusion, ModelKind::kTransformerVars,
                             ModelKind::kLstmVars, ModelKind::kNotesOnly};
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < kSeeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  const std::vector<int> labels = labels_of(r.test);
  std::map<ModelKind, double> mean;
  std::ostringstream detail;
  for (ModelKind k : kinds) {
    const auto runs = train_seeds(k, r.config.model, r.train, r.validation, r.config.train, seeds, 1);
    std::vector<EvalResult> evals;
    for (const auto& run : runs) evals.push_back(evaluate(predict_all(run.best.model, r.test), labels));
    if (k == ModelKind::kFusion) r.fusion_seed0 = runs.front().best;
    const AggregateResult a = aggregate(evals);
    mean[k] = a.aucpr.mean;
    detail << model_kind_name(k) << " " << fmt(a.aucpr.mean, 3) << "±" << fmt(a.aucpr.stddev, 2) << ", ";
  }
  const double single = std::max({mean[ModelKind::kTransformerVars], mean[ModelKind::kLstmVars], mean[ModelKind::kNotesOnly]});
  const double margin = mean[ModelKind::kFusion] - single;
  const double secs = clock.seconds();
  detail << "margin " << fmt(margin, 3) << ", " << fmt(secs / 60.0, 3) << " min";
  const bool ok = mean[ModelKind::kFusion] > mean[ModelKind::kLstmFusion] && mean[ModelKind::kLstmFusion] > single &&
                  margin >= 0.03 && secs < 3600.0;
  return {ok, "test AUCPR " + detail.str()};
}

Outcome planted_recovery() {
  DefaultRun& r = default_run();
  const Model& model = default_fusion().model;
  const SignalConfig signal;
  const HashEmbedder emb{r.config.model.notes_dim, r.config.hash_seed};

  std::map<std::string, const ClinicalEpisode*> raw;
  for (const auto& e : r.data.split.test) raw[e.id] = &e;
  std::vector<std::vector<RankedWord>> rankings;
  for (const auto& e : r.test) {
    if (e.label != 1) continue;
    const TokenAttribution a = attribute_note_tokens(model, e, raw.at(e.id)->note_events, emb);
    for (const auto& note_tokens : tokens_by_note(a)) rankings.push_back(postprocess_tokens(note_tokens));
  }
  const auto words = mean_word_scores(rankings);
  std::size_t token_rank = words.size() + 1;
  for (std::size_t i = 0; i < words.size(); ++i)
    if (words[i].word == signal.token) token_rank = i + 1;

  std::vector<EpisodeTensors> subset(r.test.begin(), r.test.begin() + std::min<std::ptrdiff_t>(200, std::ssize(r.test)));
  const ShapleyReport shap = variable_shapley(model, subset, default_schema(), {});
  const auto order = shap.ranking();
  const std::string top_var = shap.variables[order.front()].variable;

  std::ostringstream detail;
  detail << "'" << signal.token << "' ranks #" << token_rank << " of " << words.size() << " words (top: ";
  for (std::size_t i = 0; i < std::min<std::size_t>(3, words.size()); ++i)
    detail << (i ? ", " : "") << words[i].word << " " << fmt(words[i].mean_score, 3);
  detail << "); top variable by mean |Shapley|: " << top_var << " " << fmt(shap.variables[order[0]].mean_abs, 3)
         << ", next " << shap.variables[order[1]].variable << " " << fmt(shap.variables[order[1]].mean_abs, 3);
  return {token_rank <= 3 && top_var == signal.trend_variable, detail.str()};
}

// Every regular file under `dir` except manifests, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
    out[fs::relative(entry.path(), dir).string()] = read_file(entry.path());
  }
  return out;
}

Outcome reproducibility() {
  const char* config = R"({
    "model": {"D1": 32, "D3": 16, "D4": 16, "D5": 32, "layers": 1, "heads": 2, "ff_dim": 32, "head_hidden": [16], "lstm_hidden": 16},
    "train": {"max_epochs": 3, "patience": 3},
    "hash_seed": 3
  })";
  std::map<std::string, std::string> first;
  std::string failure;
  std::size_t compared = 0;
  for (int pass = 0; pass < 2 && failure.empty(); ++pass) {
    // Same directory both times, since paths appear in console output.
    const fs::path root = scratch_dir("repro");
    std::ofstream(root / "config.json") << config;
    const std::string data = shell_quote((root / "data").string());
    const std::string ckpt = shell_quote((root / "train" / "checkpoint_seed4.bin").string());
    const std::vector<std::string> commands = {
        "gen-data --n 400 --seed 9 --out " + data,
        "train --data " + data + " --model fusion --seeds 2 --seed 4 --config " +
            shell_quote((root / "config.json").string()) + " --out " + shell_quote((root / "train").string()),
        "train --data " + data + " --model lstm_fusion --seeds 1 --config " +
            shell_quote((root / "config.json").string()) + " --out " + shell_quote((root / "train_lstm").string()),
        "eval --checkpoint " + ckpt + " --data " + data + " --split test --out " + shell_quote((root / "eval").string()),
        "attribute --checkpoint " + ckpt + " --data " + data + " --mode notes --limit 5 --steps 32 --out " +
            shell_quote((root / "notes").string()),
        "attribute --checkpoint " + ckpt + " --data " + data +
            " --mode variables --limit 5 --permutations 8 --seed 2 --out " + shell_quote((root / "vars").string()),
        "attribute --checkpoint " + ckpt + " --data " + data +
            " --mode variables --limit 1 --estimator exact --out " + shell_quote((root / "vars_exact").string()),
    };
    std::string stdout_log;
    for (const auto& c : commands) {
      const CliRun run = run_cli(c, root / "stderr.txt");
      if (run.exit_code != 0) {
        failure = "command failed: mmehr " + c.substr(0, c.find(' '));
        break;
      }
      stdout_log += run.out;
    }
    std::ofstream(root / "stdout.txt") << stdout_log;
    fs::remove(root / "stderr.txt");
    auto snap = snapshot(root);
    if (pass == 0) {
      first = std::move(snap);
      continue;
    }
    if (snap.size() != first.size()) failure = "different file sets";
    for (const auto& [name, bytes] : first) {
      ++compared;
      if (!snap.count(name) || snap.at(name) != bytes) {
        failure = "differs: " + name;
        break;
      }
    }
  }
  if (!failure.empty()) return {false, failure};
  return {true, std::to_string(compared) + " output files byte-identical across two runs of 7 commands"};
}

struct Criterion {
  const char* id;
  const char* title;
  Outcome (*run)();
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"gradients", "gradient correctness", gradient_correctness},
      {"ig_exact", "IG exactness on affine scorers", ig_exactness},
      {"ig_complete", "IG completeness on a trained toy fusion model", ig_completeness},
      {"shapley", "Shapley axioms and sampled accuracy", shapley_axioms},
      {"metrics", "metric oracles", metric_oracles},
      {"ordering", "AUCPR ordering over 5 seeds", ordering},
      {"recovery", "planted-signal recovery", planted_recovery},
      {"reproducibility", "byte-identical reruns", reproducibility},
  };
  std::set<std::string> only;
  if (const char* env = std::getenv("MMEHR_ACCEPTANCE_ONLY"); env && *env) {
    std::stringstream ss(env);
    for (std::string item; std::getline(ss, item, ',');) only.insert(item);
  }
  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.title << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
