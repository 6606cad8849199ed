#include "mmehr/dataset.hpp"

namespace mmehr {

Index embedding_dim(const EmbeddingSource& source) {
  if (const auto* h = std::get_if<HashEmbedder>(&source)) return h->dim;
  const EmbeddingMap* map = std::get<const EmbeddingMap*>(source);
  if (!map || map->empty()) throw Error("embedding file contains no episodes");
  return map->begin()->second.dim();
}

bool token_granular(const EmbeddingSource& source) { return std::holds_alternative<HashEmbedder>(source); }

PreparedSplit prepare_episodes(const std::vector<ClinicalEpisode>& episodes, const VariableSchema& schema,
                               const EmbeddingSource& source) {
  PreparedSplit out;
  const Index dim = embedding_dim(source);
  for (const ClinicalEpisode& e : episodes) {
    bool any_tokens = false;
    for (const NoteEvent& n : e.note_events) any_tokens = any_tokens || !n.tokens.empty();
    if (!any_tokens) {
      out.dropped.push_back(e.id);
      continue;
    }
    EpisodeTensors t;
    t.id = e.id;
    t.label = e.label;
    t.ts = encode_variables(e, schema).values;
    if (const auto* hash = std::get_if<HashEmbedder>(&source)) {
      NotesEmbeddingSequence seq = align_to_hours(e.note_events, kHours, dim, *hash);
      t.notes = std::move(seq.rows);
      t.presence = std::move(seq.presence);
      t.hour_tokens = tokens_by_hour(e.note_events, kHours);
    } else {
      const EmbeddingMap& map = *std::get<const EmbeddingMap*>(source);
      auto it = map.find(e.id);
      if (it == map.end()) throw Error("embedding file has no entry for episode '" + e.id + "'");
      if (it->second.hours() != kHours)
        throw Error("embedding file: episode '" + e.id + "' has L=" + std::to_string(it->second.hours()));
      t.notes = it->second.rows;
      t.presence = it->second.presence;
    }
    out.episodes.push_back(std::move(t));
  }
  return out;
}

std::vector<int> labels_of(const std::vector<EpisodeTensors>& episodes) {
  std::vector<int> y;
  y.reserve(episodes.size());
  for (const auto& e : episodes) y.push_back(e.label);
  return y;
}

}  // namespace mmehr
