#pragma once

#include <string>

#include "kgt/kg.hpp"

namespace kgt {

// Text formats. Triplet files are "subject<TAB>relation<TAB>object" lines,
// alignment files "left<TAB>right". Malformed lines raise DataError with the
// file and 1-based line number.

KnowledgeGraph load_triplets(const std::string& path, const std::string& kg_name);

// Appends the triplets of `path` to `kg` (shared vocabulary), returning them
// in file order. Duplicates within the graph are dropped from the graph but
// kept in the returned list only once (the list is deduplicated too).
std::vector<Triplet> load_triplets_into(const std::string& path, KnowledgeGraph& kg);

struct Dataset {
  KnowledgeGraph kg;  // union of the three parts, train vocabulary first
  DatasetSplit split;
};

Dataset load_dataset(const std::string& kg_name, const std::string& train_path,
                     const std::string& valid_path, const std::string& test_path);

AlignmentSet load_alignment(const std::string& path, const KnowledgeGraph& left,
                            const KnowledgeGraph& right);

// Relation map files reuse the alignment format with relation names.
std::vector<std::pair<std::int32_t, std::int32_t>> load_relation_map(
    const std::string& path, const KnowledgeGraph& left, const KnowledgeGraph& right);

// Binary graph directory: manifest.txt (versioned key-value lines),
// entities.txt, relations.txt ("name<TAB>reverse flag"), triplets.bin
// (little-endian int32 subject,relation,object records). Loading verifies
// the manifest version, counts and checksums before anything is kept.
void save_kg(const KnowledgeGraph& kg, const std::string& dir);
KnowledgeGraph load_kg(const std::string& dir);

void write_triplets_tsv(const KnowledgeGraph& kg, const std::vector<Triplet>& triplets,
                        const std::string& path);

void write_alignment_tsv(const AlignmentSet& a, const KnowledgeGraph& left,
                         const KnowledgeGraph& right, const std::string& path);

// Minimal key-value manifest helpers shared by the artifact directories.
struct Manifest {
  std::vector<std::pair<std::string, std::string>> entries;
  void set(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }
  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;
};
void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

}  // namespace kgt
