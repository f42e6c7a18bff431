#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kgt/kg_io.hpp"
#include "kgt/nn.hpp"
#include "kgt/tape.hpp"

namespace kgt {

template <typename S>
constexpr const char* dtype_name();
template <>
constexpr const char* dtype_name<float>() {
  return "f32";
}
template <>
constexpr const char* dtype_name<double>() {
  return "f64";
}

// A frozen model: encoder layout, parameter registry, and the tagged
// vocabularies its ids refer to ("graph:name" labels). The checkpoint loads
// standalone — no corpus or source graphs needed.
template <typename S>
struct Checkpoint {
  EncoderConfig encoder;
  ParameterSet<S> params;
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;
  std::vector<std::pair<std::string, std::string>> meta;  // ordered, free-form

  const std::string* find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return &v;
    return nullptr;
  }
};

namespace detail {

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace detail

// Directory layout: manifest.txt (format, version, dtype, encoder fields,
// parameter shapes, tensor checksum, metadata), entities.txt, relations.txt,
// tensors.bin (row-major little-endian values in registry order).
template <typename S>
void save_checkpoint(const Checkpoint<S>& ckpt, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(dir + "/tensors.bin", std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + dir + "/tensors.bin");
    std::vector<S> row;
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
      const auto& m = ckpt.params.value(i);
      row.resize(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(S)));
      }
    }
  }
  detail::write_lines(dir + "/entities.txt", ckpt.entity_names);
  detail::write_lines(dir + "/relations.txt", ckpt.relation_names);

  Manifest m;
  m.set("format", "kgt.checkpoint");
  m.set("version", "1");
  m.set("dtype", dtype_name<S>());
  m.set("encoder.kind", to_string(ckpt.encoder.kind));
  m.set("encoder.dim", std::to_string(ckpt.encoder.dim));
  m.set("encoder.layers", std::to_string(ckpt.encoder.layers));
  m.set("encoder.heads", std::to_string(ckpt.encoder.heads));
  {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", ckpt.encoder.dropout_rate);
    m.set("encoder.dropout", buf);
  }
  m.set("encoder.max_path_length", std::to_string(ckpt.encoder.max_path_length));
  m.set("n_entities", std::to_string(ckpt.entity_names.size()));
  m.set("n_relations", std::to_string(ckpt.relation_names.size()));
  m.set("n_params", std::to_string(ckpt.params.size()));
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    const auto& v = ckpt.params.value(i);
    std::string base = "param." + std::to_string(i) + ".";
    m.set(base + "name", ckpt.params.names()[i]);
    m.set(base + "rows", std::to_string(v.rows()));
    m.set(base + "cols", std::to_string(v.cols()));
  }
  m.set("tensors_checksum", to_hex(checksum_file(dir + "/tensors.bin")));
  for (const auto& [k, v] : ckpt.meta) m.set("meta." + k, v);
  save_manifest(m, dir + "/manifest.txt");
}

template <typename S>
Checkpoint<S> load_checkpoint(const std::string& dir) {
  Manifest m = load_manifest(dir + "/manifest.txt");
  if (m.get("format") != "kgt.checkpoint") throw DataError(dir + ": not a checkpoint directory");
  if (m.get("version") != "1")
    throw DataError(dir + ": unsupported checkpoint version " + m.get("version"));
  if (m.get("dtype") != dtype_name<S>())
    throw DataError(dir + ": checkpoint dtype is " + m.get("dtype") + ", expected " +
                    dtype_name<S>());
  if (to_hex(checksum_file(dir + "/tensors.bin")) != m.get("tensors_checksum"))
    throw DataError(dir + ": tensors.bin checksum mismatch");

  Checkpoint<S> ckpt;
  ckpt.encoder.kind = encoder_kind_from_string(m.get("encoder.kind"));
  ckpt.encoder.dim = std::stoi(m.get("encoder.dim"));
  ckpt.encoder.layers = std::stoi(m.get("encoder.layers"));
  ckpt.encoder.heads = std::stoi(m.get("encoder.heads"));
  ckpt.encoder.dropout_rate = std::stod(m.get("encoder.dropout"));
  ckpt.encoder.max_path_length = std::stoi(m.get("encoder.max_path_length"));
  ckpt.encoder.precision =
      m.get("dtype") == std::string("f64") ? Precision::f64 : Precision::f32;
  validate_encoder_config(ckpt.encoder);

  ckpt.entity_names = detail::read_lines(dir + "/entities.txt");
  ckpt.relation_names = detail::read_lines(dir + "/relations.txt");
  while (!ckpt.entity_names.empty() && ckpt.entity_names.back().empty())
    ckpt.entity_names.pop_back();
  while (!ckpt.relation_names.empty() && ckpt.relation_names.back().empty())
    ckpt.relation_names.pop_back();
  if (ckpt.entity_names.size() != std::stoul(m.get("n_entities")))
    throw DataError(dir + ": entities.txt does not match the manifest count");
  if (ckpt.relation_names.size() != std::stoul(m.get("n_relations")))
    throw DataError(dir + ": relations.txt does not match the manifest count");

  std::size_t n_params = std::stoul(m.get("n_params"));
  std::ifstream in(dir + "/tensors.bin", std::ios::binary);
  if (!in) throw DataError("cannot open " + dir + "/tensors.bin");
  std::vector<S> row;
  for (std::size_t i = 0; i < n_params; ++i) {
    std::string base = "param." + std::to_string(i) + ".";
    auto rows = static_cast<Eigen::Index>(std::stol(m.get(base + "rows")));
    auto cols = static_cast<Eigen::Index>(std::stol(m.get(base + "cols")));
    auto& mat = ckpt.params.add(m.get(base + "name"), rows, cols);
    row.resize(static_cast<std::size_t>(cols));
    for (Eigen::Index r = 0; r < rows; ++r) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(S)));
      if (!in) throw DataError(dir + ": tensors.bin is truncated");
      for (Eigen::Index c = 0; c < cols; ++c) mat(r, c) = row[static_cast<std::size_t>(c)];
    }
  }
  in.peek();
  if (!in.eof()) throw DataError(dir + ": tensors.bin has trailing bytes");
  for (const auto& [k, v] : m.entries)
    if (k.rfind("meta.", 0) == 0) ckpt.meta.emplace_back(k.substr(5), v);
  return ckpt;
}

}  // namespace kgt
