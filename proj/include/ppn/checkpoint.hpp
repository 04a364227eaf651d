#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>

#include "ppn/model.hpp"

namespace ppn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

/// Everything needed to run inference: configuration, vocabulary and weights.
struct Checkpoint {
  ModelConfig config;
  Vocab vocab;
  ParamSet<float> params;
  Json extra = Json::object();  // e.g. dev F1 and step of the kept model
};

namespace detail {

inline std::string config_mismatch(const ModelConfig& want, const ModelConfig& got) {
  const Json a = want.to_json();
  const Json b = got.to_json();
  std::string out;
  for (const auto& [k, v] : a.items())
    if (!b.contains(k) || b.at(k) != v)
      out += (out.empty() ? "" : ", ") + k + " (expected " + v.dump() + ", found " +
             (b.contains(k) ? b.at(k).dump() : "nothing") + ")";
  return out;
}

}  // namespace detail

/// Layout: u64 little-endian header length, JSON header, then float32 data in
/// header order.
inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  Json tensors = Json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ck.params.tensors) {
    const std::uint64_t bytes = t.size() * sizeof(float);
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"dtype", "float32"}, {"offset", offset}, {"bytes", bytes}});
    offset += bytes;
  }
  const Json header{{"format", "ppn-checkpoint"}, {"version", 1},          {"config", ck.config.to_json()},
                    {"vocab", ck.vocab.to_json()}, {"tensors", tensors}, {"extra", ck.extra}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const std::uint64_t n = text.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ck.params.tensors)
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
  if (!out) throw IoError("write to '" + path + "' failed");
}

/// Loads and validates a checkpoint. With `expected`, any configuration field
/// that differs is reported by name.
inline Checkpoint load_checkpoint(const std::string& path, const std::optional<ModelConfig>& expected = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  std::uint64_t n = 0;
  if (file_size < sizeof n || !in.read(reinterpret_cast<char*>(&n), sizeof n))
    throw CheckpointError("'" + path + "': truncated header length");
  if (n > file_size - sizeof n) throw CheckpointError("'" + path + "': header length exceeds file size");
  std::string text(n, '\0');
  in.read(text.data(), static_cast<std::streamsize>(n));

  Checkpoint ck;
  Json header;
  try {
    header = Json::parse(text);
    if (header.value("format", "") != "ppn-checkpoint") throw CheckpointError("'" + path + "': not a checkpoint");
    ck.config = ModelConfig::from_json(header.at("config"));
    ck.vocab = Vocab::from_json(header.at("vocab"));
    ck.extra = header.value("extra", Json::object());
  } catch (const Json::exception& e) {
    throw CheckpointError("'" + path + "': bad header: " + e.what());
  } catch (const ParseError& e) {
    throw CheckpointError("'" + path + "': " + e.what());
  }
  if (expected) {
    const auto field = detail::config_mismatch(*expected, ck.config);
    if (!field.empty()) throw CheckpointError("'" + path + "': config mismatch in " + field);
  }
  if (ck.vocab.size() != ck.config.vocab_size)
    throw CheckpointError("'" + path + "': vocab has " + std::to_string(ck.vocab.size()) + " entries, config says " +
                          std::to_string(ck.config.vocab_size));

  ck.params = make_param_shapes<float>(ck.config);
  const auto& listed = header.at("tensors");
  if (listed.size() != ck.params.count())
    throw CheckpointError("'" + path + "': expected " + std::to_string(ck.params.count()) + " tensors, found " +
                          std::to_string(listed.size()));
  const std::uint64_t data_start = sizeof n + n;
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < listed.size(); ++i) {
    auto& t = ck.params[i];
    const auto& e = listed[i];
    if (e.at("name").get<std::string>() != t.name || e.at("shape").get<std::vector<int>>() != t.shape)
      throw CheckpointError("'" + path + "': tensor " + std::to_string(i) + " is '" + e.at("name").get<std::string>() +
                            "' with an unexpected name or shape (wanted '" + t.name + "')");
    if (e.at("dtype").get<std::string>() != "float32" || e.at("offset").get<std::uint64_t>() != offset)
      throw CheckpointError("'" + path + "': tensor '" + t.name + "' has bad dtype or offset");
    const std::uint64_t bytes = t.size() * sizeof(float);
    if (data_start + offset + bytes > file_size)
      throw CheckpointError("'" + path + "': truncated data in tensor '" + t.name + "'");
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(bytes));
    for (float v : t.data)
      if (!std::isfinite(v)) throw CheckpointError("'" + path + "': non-finite value in '" + t.name + "'");
    offset += bytes;
  }
  if (data_start + offset != file_size) throw CheckpointError("'" + path + "': trailing bytes after tensor data");
  return ck;
}

}  // namespace ppn
