#include "kgt/kg_io.hpp"

#include <filesystem>
#include <fstream>

namespace kgt {

namespace {

std::ifstream open_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  return in;
}

// Splits a line into exactly `n` tab-separated non-empty fields.
std::vector<std::string> fields(const std::string& line, std::size_t n,
                                const std::string& path, std::size_t lineno) {
  auto parts = split(line, '\t');
  if (parts.size() != n)
    throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(n) +
                    " tab-separated fields, got " + std::to_string(parts.size()));
  for (auto& p : parts) {
    p = trim(p);
    if (p.empty())
      throw DataError(path + ":" + std::to_string(lineno) + ": empty field");
  }
  return parts;
}

}  // namespace

std::vector<Triplet> load_triplets_into(const std::string& path, KnowledgeGraph& kg) {
  auto in = open_text(path);
  std::vector<Triplet> out;
  std::unordered_set<Triplet, TripletHash> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = fields(line, 3, path, lineno);
    Triplet t{kg.entities.get_or_add(f[0]), kg.add_relation(f[1]), kg.entities.get_or_add(f[2])};
    kg.add_triplet(t);
    if (seen.insert(t).second) out.push_back(t);
  }
  return out;
}

KnowledgeGraph load_triplets(const std::string& path, const std::string& kg_name) {
  KnowledgeGraph kg;
  kg.name = kg_name;
  load_triplets_into(path, kg);
  return kg;
}

Dataset load_dataset(const std::string& kg_name, const std::string& train_path,
                     const std::string& valid_path, const std::string& test_path) {
  Dataset d;
  d.kg.name = kg_name;
  d.split.train = load_triplets_into(train_path, d.kg);
  d.split.valid = load_triplets_into(valid_path, d.kg);
  d.split.test = load_triplets_into(test_path, d.kg);
  validate_split(d.kg, d.split);
  return d;
}

AlignmentSet load_alignment(const std::string& path, const KnowledgeGraph& left,
                            const KnowledgeGraph& right) {
  auto in = open_text(path);
  AlignmentSet a;
  a.left_kg = left.name;
  a.right_kg = right.name;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = fields(line, 2, path, lineno);
    auto l = left.entities.find(f[0]);
    auto r = right.entities.find(f[1]);
    if (!l) throw DataError(path + ":" + std::to_string(lineno) + ": unknown entity '" + f[0] +
                            "' in graph '" + left.name + "'");
    if (!r) throw DataError(path + ":" + std::to_string(lineno) + ": unknown entity '" + f[1] +
                            "' in graph '" + right.name + "'");
    a.add(*l, *r);
  }
  return a;
}

std::vector<std::pair<std::int32_t, std::int32_t>> load_relation_map(
    const std::string& path, const KnowledgeGraph& left, const KnowledgeGraph& right) {
  auto in = open_text(path);
  std::vector<std::pair<std::int32_t, std::int32_t>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = fields(line, 2, path, lineno);
    auto l = left.relations.find(f[0]);
    auto r = right.relations.find(f[1]);
    if (!l) throw DataError(path + ":" + std::to_string(lineno) + ": unknown relation '" + f[0] +
                            "' in graph '" + left.name + "'");
    if (!r) throw DataError(path + ":" + std::to_string(lineno) + ": unknown relation '" + f[1] +
                            "' in graph '" + right.name + "'");
    out.emplace_back(*l, *r);
  }
  return out;
}

const std::string& Manifest::get(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return v;
  throw DataError("manifest is missing key '" + key + "'");
}

bool Manifest::has(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return true;
  return false;
}

void save_manifest(const Manifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest: " + path);
  for (const auto& [k, v] : m.entries) out << k << ' ' << v << '\n';
}

Manifest load_manifest(const std::string& path) {
  auto in = open_text(path);
  Manifest m;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    auto sp = line.find(' ');
    if (sp == std::string::npos)
      throw DataError("malformed manifest line in " + path + ": '" + line + "'");
    m.set(line.substr(0, sp), line.substr(sp + 1));
  }
  return m;
}

void save_kg(const KnowledgeGraph& kg, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(dir + "/entities.txt", std::ios::trunc);
    for (const auto& n : kg.entities.names()) out << n << '\n';
  }
  {
    std::ofstream out(dir + "/relations.txt", std::ios::trunc);
    for (std::int32_t r = 0; r < kg.relations.size(); ++r)
      out << kg.relations.name(r) << '\t'
          << (kg.reverse_closed && kg.relation_is_reverse[static_cast<std::size_t>(r)] ? 1 : 0)
          << '\n';
  }
  {
    std::ofstream out(dir + "/triplets.bin", std::ios::binary | std::ios::trunc);
    for (const auto& t : kg.triplets) {
      std::int32_t rec[3] = {t.s, t.r, t.o};
      out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    }
  }
  Manifest m;
  m.set("format", "kgt.kg");
  m.set("version", "1");
  m.set("name", kg.name);
  m.set("entities", std::to_string(kg.entities.size()));
  m.set("relations", std::to_string(kg.relations.size()));
  m.set("triplets", std::to_string(kg.triplets.size()));
  m.set("reverse_closed", kg.reverse_closed ? "1" : "0");
  m.set("triplets_checksum", to_hex(checksum_file(dir + "/triplets.bin")));
  save_manifest(m, dir + "/manifest.txt");
}

KnowledgeGraph load_kg(const std::string& dir) {
  Manifest m = load_manifest(dir + "/manifest.txt");
  if (m.get("format") != "kgt.kg") throw DataError(dir + ": not a graph directory");
  if (m.get("version") != "1") throw DataError(dir + ": unsupported graph format version " + m.get("version"));
  if (to_hex(checksum_file(dir + "/triplets.bin")) != m.get("triplets_checksum"))
    throw DataError(dir + ": triplets.bin checksum mismatch");

  KnowledgeGraph kg;
  kg.name = m.get("name");
  {
    auto in = open_text(dir + "/entities.txt");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      kg.entities.get_or_add(line);
    }
  }
  {
    auto in = open_text(dir + "/relations.txt");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto f = fields(line, 2, dir + "/relations.txt", lineno);
      kg.add_relation(f[0], f[1] == "1");
    }
  }
  if (kg.entities.size() != std::stoi(m.get("entities")) ||
      kg.relations.size() != std::stoi(m.get("relations")))
    throw DataError(dir + ": vocabulary size disagrees with manifest");

  auto n = static_cast<std::size_t>(std::stoll(m.get("triplets")));
  std::ifstream in(dir + "/triplets.bin", std::ios::binary);
  if (!in) throw DataError("cannot open " + dir + "/triplets.bin");
  for (std::size_t i = 0; i < n; ++i) {
    std::int32_t rec[3];
    in.read(reinterpret_cast<char*>(rec), sizeof(rec));
    if (!in) throw DataError(dir + "/triplets.bin is truncated");
    kg.add_triplet({rec[0], rec[1], rec[2]});
  }
  kg.reverse_closed = m.get("reverse_closed") == "1";
  if (kg.triplets.size() != n) throw DataError(dir + ": duplicate triplets in serialized graph");
  return kg;
}

void write_triplets_tsv(const KnowledgeGraph& kg, const std::vector<Triplet>& triplets,
                        const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& t : triplets)
    out << kg.entities.name(t.s) << '\t' << kg.relations.name(t.r) << '\t'
        << kg.entities.name(t.o) << '\n';
}

void write_alignment_tsv(const AlignmentSet& a, const KnowledgeGraph& left,
                         const KnowledgeGraph& right, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (auto [l, r] : a.pairs)
    out << left.entities.name(l) << '\t' << right.entities.name(r) << '\n';
}

}  // namespace kgt
