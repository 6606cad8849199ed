#include "mmehr/checkpoint.hpp"
#include "mmehr/io.hpp"

namespace mmehr {

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const Parameters& params = ckpt.model.params();
  nlohmann::json manifest = nlohmann::json::array();
  std::string blob;
  for (std::size_t i = 0; i < params.size(); ++i) {
    manifest.push_back({{"name", params.name(i)}, {"offset", blob.size()}, {"shape", params[i].shape()}});
    for (Index k = 0; k < params[i].size(); ++k) put_le<double>(blob, params[i][k]);
  }
  const nlohmann::json header = {{"format", "mmehr-checkpoint"},
                                 {"version", 1},
                                 {"model", model_kind_name(ckpt.model.kind())},
                                 {"config", model_config_to_json(ckpt.model.config())},
                                 {"seed", ckpt.seed},
                                 {"step", ckpt.step},
                                 {"metadata", ckpt.metadata},
                                 {"manifest", std::move(manifest)}};
  const std::string text = header.dump();
  std::string out;
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out += blob;
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  ByteReader in(bytes, "checkpoint");
  const auto header_len = in.get<std::uint64_t>();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.bytes(header_len));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(std::string("checkpoint: bad header: ") + ex.what());
  }
  if (header.value("format", "") != "mmehr-checkpoint") throw Error("checkpoint: not an mmehr checkpoint");
  const std::string_view blob = bytes.substr(in.position());

  const ModelKind kind = parse_model_kind(header.at("model").get<std::string>());
  const ModelConfig config = model_config_from_json(header.at("config"));
  Parameters params;
  for (const auto& entry : header.at("manifest")) {
    const auto offset = entry.at("offset").get<std::size_t>();
    Tensor t(entry.at("shape").get<Shape>());
    if (offset > blob.size()) throw Error("checkpoint: truncated payload");
    ByteReader values(blob.substr(offset), "checkpoint");
    for (Index k = 0; k < t.size(); ++k) t[k] = values.get<double>();
    params.add(entry.at("name").get<std::string>(), std::move(t));
  }
  return {Model(kind, config, std::move(params)), header.at("seed").get<std::uint64_t>(),
          header.at("step").get<std::int64_t>(), header.value("metadata", nlohmann::json::object())};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

}  // namespace mmehr
