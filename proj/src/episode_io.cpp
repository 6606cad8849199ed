#include "mmehr/episode.hpp"
#include "mmehr/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace mmehr {

void validate(const ClinicalEpisode& episode, const VariableSchema& schema) {
  const auto where = [&] { return "episode '" + episode.id + "': "; };
  if (episode.label != 0 && episode.label != 1) throw Error(where() + "label must be 0 or 1");
  for (const Observation& o : episode.observations) {
    if (o.hour < 0 || o.hour >= kHours) throw Error(where() + "observation hour " + std::to_string(o.hour) + " out of range");
    if (o.variable < 0 || o.variable >= schema.size()) throw Error(where() + "variable index out of range");
    const VariableSpec& spec = schema.variable(o.variable);
    if (spec.kind == VariableKind::kCategorical) {
      const auto* label = std::get_if<std::string>(&o.value);
      if (!label) throw Error(where() + "variable '" + spec.name + "' expects a category label");
      schema.category_index(o.variable, *label);
    } else if (!std::holds_alternative<double>(o.value)) {
      throw Error(where() + "variable '" + spec.name + "' expects a number");
    }
  }
  for (const NoteEvent& n : episode.note_events)
    if (n.hour < 0 || n.hour >= kHours) throw Error(where() + "note hour " + std::to_string(n.hour) + " out of range");
}

SplitStats split_stats(const std::vector<ClinicalEpisode>& episodes) {
  SplitStats s;
  s.episodes = static_cast<Index>(episodes.size());
  for (const auto& e : episodes) s.positives += e.label;
  s.prevalence = s.episodes ? static_cast<double>(s.positives) / static_cast<double>(s.episodes) : 0.0;
  return s;
}

double prevalence(const std::vector<ClinicalEpisode>& episodes) { return split_stats(episodes).prevalence; }

void check_disjoint(const DatasetSplit& split) {
  std::set<std::string> seen;
  for (const auto* part : {&split.train, &split.validation, &split.test})
    for (const auto& e : *part)
      if (!seen.insert(e.id).second) throw Error("dataset: episode id '" + e.id + "' appears more than once");
}

nlohmann::json episode_to_json(const ClinicalEpisode& episode, const VariableSchema& schema) {
  nlohmann::json obs = nlohmann::json::array();
  for (const Observation& o : episode.observations) {
    nlohmann::json value = std::visit([](const auto& v) { return nlohmann::json(v); }, o.value);
    obs.push_back({o.hour, schema.variable(o.variable).name, std::move(value)});
  }
  nlohmann::json notes = nlohmann::json::array();
  for (const NoteEvent& n : episode.note_events) notes.push_back({n.hour, n.tokens});
  return {{"id", episode.id}, {"label", episode.label}, {"observations", std::move(obs)}, {"note_events", std::move(notes)}};
}

ClinicalEpisode episode_from_json(const nlohmann::json& j, const VariableSchema& schema) {
  ClinicalEpisode e;
  e.id = j.at("id").get<std::string>();
  e.label = j.at("label").get<int>();
  for (const auto& o : j.at("observations")) {
    Observation obs;
    obs.hour = o.at(0).get<int>();
    obs.variable = schema.index_of(o.at(1).get<std::string>());
    const auto& v = o.at(2);
    if (v.is_string())
      obs.value = v.get<std::string>();
    else
      obs.value = v.get<double>();
    e.observations.push_back(std::move(obs));
  }
  for (const auto& n : j.at("note_events")) e.note_events.push_back({n.at(0).get<int>(), n.at(1).get<std::vector<std::string>>()});
  validate(e, schema);
  return e;
}

void write_episodes(std::ostream& os, const std::vector<ClinicalEpisode>& episodes, const VariableSchema& schema) {
  for (const auto& e : episodes) os << episode_to_json(e, schema).dump() << '\n';
}

std::vector<ClinicalEpisode> read_episodes(std::istream& is, const VariableSchema& schema) {
  std::vector<ClinicalEpisode> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(episode_from_json(nlohmann::json::parse(line), schema));
    } catch (const nlohmann::json::exception& ex) {
      throw Error("episode file line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

void write_episodes(const std::filesystem::path& path, const std::vector<ClinicalEpisode>& episodes,
                    const VariableSchema& schema) {
  std::ostringstream os;
  write_episodes(os, episodes, schema);
  write_file_atomic(path, os.str());
}

std::vector<ClinicalEpisode> read_episodes(const std::filesystem::path& path, const VariableSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open episode file " + path.string());
  return read_episodes(in, schema);
}

}  // namespace mmehr
