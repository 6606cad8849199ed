#include "mmehr/synthetic.hpp"
#include "mmehr/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace mmehr {

nlohmann::json signal_config_to_json(const SignalConfig& c) {
  return {
      {"trend_variable", c.trend_variable},
      {"trend_weight", c.trend_weight},
      {"trend_amplitude", c.trend_amplitude},
      {"severity_variable", c.severity_variable},
      {"severe_categories", c.severe_categories},
      {"severe_rate", c.severe_rate},
      {"severity_weight", c.severity_weight},
      {"token", c.token},
      {"token_rate", c.token_rate},
      {"token_recurrence", c.token_recurrence},
      {"condition_variable", c.condition_variable},
      {"condition_rate", c.condition_rate},
      {"condition_shift", c.condition_shift},
      {"interaction_weight", c.interaction_weight},
      {"noise_scale", c.noise_scale},
      {"prevalence", c.prevalence},
  };
}

SignalConfig signal_config_from_json(const nlohmann::json& j) {
  SignalConfig c;
  c.trend_variable = j.value("trend_variable", c.trend_variable);
  c.trend_weight = j.value("trend_weight", c.trend_weight);
  c.trend_amplitude = j.value("trend_amplitude", c.trend_amplitude);
  c.severity_variable = j.value("severity_variable", c.severity_variable);
  c.severe_categories = j.value("severe_categories", c.severe_categories);
  c.severe_rate = j.value("severe_rate", c.severe_rate);
  c.severity_weight = j.value("severity_weight", c.severity_weight);
  c.token = j.value("token", c.token);
  c.token_rate = j.value("token_rate", c.token_rate);
  c.token_recurrence = j.value("token_recurrence", c.token_recurrence);
  c.condition_variable = j.value("condition_variable", c.condition_variable);
  c.condition_rate = j.value("condition_rate", c.condition_rate);
  c.condition_shift = j.value("condition_shift", c.condition_shift);
  c.interaction_weight = j.value("interaction_weight", c.interaction_weight);
  c.noise_scale = j.value("noise_scale", c.noise_scale);
  c.prevalence = j.value("prevalence", c.prevalence);
  return c;
}

namespace {

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "patient", "the",       "with",     "and",       "was",       "year",     "old",       "care",
      "pain",    "noted",     "given",    "continue",  "plan",      "history",  "stable",    "family",
      "medical", "condition", "diagnosis", "impression", "reason",  "for",      "this",      "examination",
      "chest",   "left",      "right",    "pulmonary", "edema",     "effusion", "cardiac",   "sedation",
      "monitor", "overnight", "report",   "neuro",     "afebrile",  "tolerating", "diet",    "skin",
      "intact",  "lines",     "drains",   "remains",   "placed",    "changes",  "comparison", "tube"};
  return words;
}

const std::vector<std::string>& short_tokens() {
  static const std::vector<std::string> words = {"mg", "iv", "pt", "po", "a", "of", "in", "to", "bp", "hr"};
  return words;
}

const std::vector<std::string>& separators() {
  static const std::vector<std::string> words = {".", ",", ";", ":", "-", "/", "(", ")", "[", "]", "#", "*"};
  return words;
}

const std::vector<std::vector<std::string>>& subword_runs() {
  static const std::vector<std::vector<std::string>> runs = {
      {"ex", "##tub", "##ated"}, {"intu", "##bation"}, {"cre", "##pit", "##us"}, {"ra", "##les"}};
  return runs;
}

std::vector<std::string> draw_note(Rng& rng) {
  std::vector<std::string> tokens;
  const int length = rng.integer(6, 16);
  while (static_cast<int>(tokens.size()) < length) {
    const double u = rng.uniform();
    if (u < 0.60) {
      tokens.push_back(filler_words()[rng.index(filler_words().size())]);
    } else if (u < 0.75) {
      tokens.push_back(short_tokens()[rng.index(short_tokens().size())]);
    } else if (u < 0.85) {
      if (rng.bernoulli(0.5)) {
        tokens.push_back(std::to_string(rng.integer(0, 200)));
      } else {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%d.%d", rng.integer(0, 40), rng.integer(0, 9));
        tokens.emplace_back(buf);
      }
    } else if (u < 0.95) {
      tokens.push_back(separators()[rng.index(separators().size())]);
    } else {
      const auto& run = subword_runs()[rng.index(subword_runs().size())];
      tokens.insert(tokens.end(), run.begin(), run.end());
    }
  }
  return tokens;
}

double observation_rate(const std::string& name) {
  if (name == "Heart Rate" || name == "Respiratory rate" || name == "Oxygen saturation" ||
      name == "Systolic blood pressure" || name == "Diastolic blood pressure" || name == "Mean blood pressure")
    return 0.8;
  if (name == "Temperature") return 0.3;
  if (name == "Glucose" || name == "pH") return 0.12;
  if (name == "Fraction inspired oxygen") return 0.1;
  if (name == "Height" || name == "Weight") return 0.03;
  return 0.25;
}

}  // namespace

SyntheticDataset generate_synthetic(Index n_episodes, std::uint64_t seed, const SignalConfig& config,
                                    const VariableSchema& schema) {
  if (n_episodes < 1) throw Error("generate_synthetic: need at least one episode");
  const Index trend_var = schema.index_of(config.trend_variable);
  const Index severity_var = schema.index_of(config.severity_variable);
  const Index condition_var = schema.index_of(config.condition_variable);
  if (schema.variable(trend_var).kind != VariableKind::kContinuous ||
      schema.variable(condition_var).kind != VariableKind::kContinuous)
    throw Error("generate_synthetic: trend and condition variables must be continuous");
  if (schema.variable(severity_var).kind != VariableKind::kCategorical)
    throw Error("generate_synthetic: severity variable must be categorical");
  std::vector<std::string> mild_categories;
  for (const auto& c : schema.variable(severity_var).categories)
    if (std::find(config.severe_categories.begin(), config.severe_categories.end(), c) == config.severe_categories.end())
      mild_categories.push_back(c);
  for (const auto& c : config.severe_categories) schema.category_index(severity_var, c);
  if (mild_categories.empty()) throw Error("generate_synthetic: every severity category is marked severe");

  Rng rng = Rng::substream(seed, "data");
  const auto n = static_cast<std::size_t>(n_episodes);
  std::vector<ClinicalEpisode> episodes(n);
  std::vector<LatentFeatures> latent(n);
  std::vector<double> score(n);

  char id[32];
  for (std::size_t e = 0; e < n; ++e) {
    ClinicalEpisode& ep = episodes[e];
    LatentFeatures& lf = latent[e];
    std::snprintf(id, sizeof id, "ep%06zu", e);
    ep.id = id;

    lf.slope = rng.normal();
    lf.severe = rng.bernoulli(config.severe_rate);
    lf.token = rng.bernoulli(config.token_rate);
    lf.condition = rng.bernoulli(config.condition_rate);

    for (Index v = 0; v < schema.size(); ++v) {
      const VariableSpec& spec = schema.variable(v);
      const double rate = observation_rate(spec.name);
      const double base = 0.5 * rng.normal();
      for (int t = 0; t < kHours; ++t) {
        if (!rng.bernoulli(rate)) continue;
        if (spec.kind == VariableKind::kCategorical) {
          const std::vector<std::string>* pool = &spec.categories;
          if (v == severity_var) pool = lf.severe ? &config.severe_categories : &mild_categories;
          ep.observations.push_back({t, v, (*pool)[rng.index(pool->size())]});
        } else {
          double z = base + 0.3 * rng.normal();
          if (v == trend_var) z += lf.slope * config.trend_amplitude * (static_cast<double>(t) / (kHours - 1) - 0.5);
          if (v == condition_var && lf.condition) z += config.condition_shift;
          const double raw = std::clamp(spec.mean + spec.stddev * z, spec.min_value, spec.max_value);
          ep.observations.push_back({t, v, std::round(raw * 100.0) / 100.0});
        }
      }
    }
    std::stable_sort(ep.observations.begin(), ep.observations.end(),
                     [](const Observation& a, const Observation& b) { return a.hour < b.hour; });

    const int n_notes = rng.integer(1, 4);
    for (int k = 0; k < n_notes; ++k) ep.note_events.push_back({rng.integer(0, kHours - 1), draw_note(rng)});
    if (lf.token) {
      // One guaranteed mention, then a chance of recurring in each other note.
      const std::size_t first = rng.index(ep.note_events.size());
      for (std::size_t k = 0; k < ep.note_events.size(); ++k) {
        if (k != first && !rng.bernoulli(config.token_recurrence)) continue;
        auto& tokens = ep.note_events[k].tokens;
        // Word boundaries only, never inside a "##" continuation run.
        std::vector<std::size_t> slots;
        for (std::size_t p = 0; p <= tokens.size(); ++p)
          if (p == tokens.size() || tokens[p].rfind("##", 0) != 0) slots.push_back(p);
        tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(slots[rng.index(slots.size())]), config.token);
      }
    }
    std::stable_sort(ep.note_events.begin(), ep.note_events.end(),
                     [](const NoteEvent& a, const NoteEvent& b) { return a.hour < b.hour; });

    score[e] = config.trend_weight * lf.slope + config.severity_weight * (lf.severe ? 1.0 : 0.0) +
               config.interaction_weight * ((lf.token && lf.condition) ? 1.0 : 0.0) + config.noise_scale * rng.logistic();
  }

  // Exact prevalence: the top-scoring fraction is positive.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  const auto positives = static_cast<std::size_t>(std::llround(config.prevalence * static_cast<double>(n)));
  for (std::size_t r = 0; r < positives && r < n; ++r) episodes[order[r]].label = 1;

  SyntheticDataset out;
  for (std::size_t e = 0; e < n; ++e) out.latent.emplace(episodes[e].id, latent[e]);

  // Stratified by label so small datasets still get positives in every split.
  Rng split_rng = Rng::substream(seed, "split");
  std::vector<int> part(n, 0);
  for (int label : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t e = 0; e < n; ++e)
      if (episodes[e].label == label) members.push_back(e);
    split_rng.shuffle(members);
    const std::size_t k = members.size();
    const auto n_train = static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(k)));
    const auto n_val = std::min(k - n_train, static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(k))));
    for (std::size_t r = n_train; r < k; ++r) part[members[r]] = r < n_train + n_val ? 1 : 2;
  }
  for (std::size_t e = 0; e < n; ++e) {
    auto& dest = part[e] == 0 ? out.split.train : part[e] == 1 ? out.split.validation : out.split.test;
    dest.push_back(std::move(episodes[e]));
  }
  return out;
}

}  // namespace mmehr
