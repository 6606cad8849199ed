#include "mmehr/notes_embedding.hpp"
#include "mmehr/io.hpp"
#include "mmehr/random.hpp"

#include <cmath>

namespace mmehr {

namespace {
constexpr char kMagic[4] = {'E', 'H', 'R', 'E'};
}

std::string serialize_embeddings(const EmbeddingMap& embeddings) {
  std::string out(kMagic, 4);
  put_le<std::uint32_t>(out, kEmbeddingFileVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(embeddings.size()));
  const Index dim = embeddings.empty() ? 0 : embeddings.begin()->second.dim();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  for (const auto& [id, seq] : embeddings) {
    if (seq.dim() != dim) throw Error("embeddings: inconsistent D1 for episode '" + id + "'");
    if (seq.presence.size() != seq.hours()) throw Error("embeddings: presence length mismatch for '" + id + "'");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out += id;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.hours()));
    std::string bitmap(static_cast<std::size_t>((seq.hours() + 7) / 8), '\0');
    for (Index t = 0; t < seq.hours(); ++t)
      if (seq.presence(t) != 0.0) bitmap[static_cast<std::size_t>(t / 8)] |= static_cast<char>(1u << (t % 8));
    out += bitmap;
    for (Index t = 0; t < seq.hours(); ++t) {
      if (seq.presence(t) == 0.0) continue;
      for (Index j = 0; j < dim; ++j) put_le<float>(out, static_cast<float>(seq.rows(t, j)));
    }
  }
  return out;
}

EmbeddingMap parse_embeddings(std::string_view bytes) {
  ByteReader in(bytes, "embedding file");
  if (in.bytes(4) != std::string_view(kMagic, 4)) throw Error("embedding file: bad magic");
  const auto version = in.get<std::uint32_t>();
  if (version != kEmbeddingFileVersion) throw Error("embedding file: unsupported version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();
  const auto dim = static_cast<Index>(in.get<std::uint32_t>());

  EmbeddingMap out;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto id_len = in.get<std::uint32_t>();
    std::string id(in.bytes(id_len));
    const auto hours = static_cast<Index>(in.get<std::uint32_t>());
    const std::string_view bitmap = in.bytes(static_cast<std::size_t>((hours + 7) / 8));
    NotesEmbeddingSequence seq{MatrixXd::Zero(hours, dim), Eigen::VectorXd::Zero(hours)};
    for (Index t = 0; t < hours; ++t)
      if (static_cast<unsigned char>(bitmap[static_cast<std::size_t>(t / 8)]) & (1u << (t % 8))) seq.presence(t) = 1.0;
    // Bits past L in the final byte must be clear.
    for (Index t = hours; t < static_cast<Index>(bitmap.size()) * 8; ++t)
      if (static_cast<unsigned char>(bitmap[static_cast<std::size_t>(t / 8)]) & (1u << (t % 8)))
        throw Error("embedding file: presence bitmap of '" + id + "' has bits past L");
    const auto rows = static_cast<std::size_t>(seq.presence.sum());
    if (in.remaining() < rows * static_cast<std::size_t>(dim) * sizeof(float))
      throw Error("embedding file: episode '" + id + "' has " + std::to_string(rows) +
                  " present hours but fewer stored rows (truncated payload)");
    for (Index t = 0; t < hours; ++t) {
      if (seq.presence(t) == 0.0) continue;
      for (Index j = 0; j < dim; ++j) seq.rows(t, j) = static_cast<double>(in.get<float>());
    }
    if (!out.emplace(std::move(id), std::move(seq)).second)
      throw Error("embedding file: duplicate episode id");
  }
  if (in.remaining() != 0)
    throw Error("embedding file: " + std::to_string(in.remaining()) + " trailing bytes (row count does not match bitmap)");
  return out;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingMap& embeddings) {
  write_file_atomic(path, serialize_embeddings(embeddings));
}

EmbeddingMap load_embeddings(const std::filesystem::path& path) { return parse_embeddings(read_file(path)); }

Eigen::VectorXd hash_token_vector(std::string_view token, Index dim, std::uint64_t seed) {
  std::uint64_t state = fnv1a64(token) ^ (seed * 0x9e3779b97f4a7c15ULL);
  const double half_width = std::sqrt(3.0);
  Eigen::VectorXd v(dim);
  for (Index j = 0; j < dim; ++j) {
    const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    v(j) = half_width * (2.0 * u - 1.0);
  }
  return v;
}

Eigen::VectorXd hash_embed(const std::vector<std::string>& tokens, Index dim, std::uint64_t seed) {
  if (dim < 8) throw Error("hash_embed: dimension must be at least 8");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
  if (tokens.empty()) return acc;
  for (const auto& t : tokens) acc += hash_token_vector(t, dim, seed);
  return acc / static_cast<double>(tokens.size());
}

std::vector<std::vector<std::string>> tokens_by_hour(const std::vector<NoteEvent>& note_events, Index hours) {
  std::vector<std::vector<std::string>> by_hour(static_cast<std::size_t>(hours));
  for (const NoteEvent& n : note_events) {
    if (n.hour < 0 || n.hour >= hours) throw Error("align_to_hours: note hour " + std::to_string(n.hour) + " out of range");
    auto& bucket = by_hour[static_cast<std::size_t>(n.hour)];
    bucket.insert(bucket.end(), n.tokens.begin(), n.tokens.end());
  }
  return by_hour;
}

NotesEmbeddingSequence align_to_hours(const std::vector<NoteEvent>& note_events, Index hours, Index dim,
                                      const TokenEmbedder& embedder) {
  NotesEmbeddingSequence seq{MatrixXd::Zero(hours, dim), Eigen::VectorXd::Zero(hours)};
  const auto by_hour = tokens_by_hour(note_events, hours);
  for (Index t = 0; t < hours; ++t) {
    // An hour whose notes carry no tokens counts as absent.
    if (by_hour[static_cast<std::size_t>(t)].empty()) continue;
    const Eigen::VectorXd row = embedder(by_hour[static_cast<std::size_t>(t)]);
    if (row.size() != dim) throw Error("align_to_hours: embedder returned dimension " + std::to_string(row.size()));
    seq.rows.row(t) = row.transpose();
    seq.presence(t) = 1.0;
  }
  return seq;
}

}  // namespace mmehr
