#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgt/kg.hpp"

namespace kgt {

// Paths interleave entity and relation indices: entities at odd 1-based
// positions, relations at even ones, so the stored length is always odd.
// Every element carries the tag of the graph it came from; augmentation is
// what introduces mixed-tag paths.
enum class PathProvenance : std::uint8_t { raw = 0, replaced = 1, concatenated = 2 };

class PathCorpus {
 public:
  explicit PathCorpus(std::int32_t length) : length_(length) {
    if (length < 3 || length % 2 == 0)
      throw ConfigError("path length must be odd and at least 3");
  }

  std::int32_t length() const { return length_; }
  std::size_t size() const { return provenance_.size(); }

  std::int32_t element(std::size_t path, std::int32_t pos) const {
    return elements_[path * static_cast<std::size_t>(length_) + static_cast<std::size_t>(pos)];
  }
  std::uint8_t tag(std::size_t path, std::int32_t pos) const {
    return tags_[path * static_cast<std::size_t>(length_) + static_cast<std::size_t>(pos)];
  }
  PathProvenance provenance(std::size_t path) const {
    return static_cast<PathProvenance>(provenance_[path]);
  }

  void append(const std::int32_t* elems, const std::uint8_t* tags, PathProvenance prov) {
    elements_.insert(elements_.end(), elems, elems + length_);
    tags_.insert(tags_.end(), tags, tags + length_);
    provenance_.push_back(static_cast<std::uint8_t>(prov));
  }

  const std::vector<std::int32_t>& elements() const { return elements_; }
  const std::vector<std::uint8_t>& tags() const { return tags_; }
  const std::vector<std::uint8_t>& provenance_bytes() const { return provenance_; }

 private:
  std::int32_t length_;
  std::vector<std::int32_t> elements_;
  std::vector<std::uint8_t> tags_;
  std::vector<std::uint8_t> provenance_;
};

enum class NeighborWeighting { uniform, inverse_frequency };

struct WalkConfig {
  std::int32_t path_length = 5;
  std::int32_t walks_per_start = 2;
  NeighborWeighting weighting = NeighborWeighting::uniform;
  std::uint64_t seed = 0;
};

inline void validate_walk_config(const WalkConfig& cfg) {
  if (cfg.path_length < 3 || cfg.path_length % 2 == 0)
    throw ConfigError("walk.path_length must be odd and at least 3");
  if (cfg.walks_per_start < 1) throw ConfigError("walk.walks_per_start must be positive");
}

// Random walks over a reverse-closed graph. Every triplet (s, r, o) seeds
// `walks_per_start` paths beginning with that triplet, extended by
// (path_length - 3) / 2 outgoing steps. Each walk draws from its own
// seed-derived stream, so the corpus is byte-identical for a fixed seed no
// matter how the work is scheduled.
PathCorpus sample_paths(const KnowledgeGraph& kg, std::uint8_t kg_tag, const WalkConfig& config);

// Bidirectional alignment lookup between two tagged graphs.
class AlignmentIndex {
 public:
  AlignmentIndex(const AlignmentSet& a, std::uint8_t left_tag, std::uint8_t right_tag);
  // Counterparts of (tag, idx) on the other side; empty when the element is
  // unaligned or the tag does not participate.
  const std::vector<std::int32_t>& counterparts(std::uint8_t tag, std::int32_t idx) const;
  std::uint8_t left_tag() const { return left_tag_; }
  std::uint8_t right_tag() const { return right_tag_; }
  std::uint8_t other(std::uint8_t tag) const { return tag == left_tag_ ? right_tag_ : left_tag_; }

 private:
  std::uint8_t left_tag_, right_tag_;
  std::unordered_map<std::int32_t, std::vector<std::int32_t>> l2r_, r2l_;
  std::vector<std::int32_t> empty_;
};

struct AugmentConfig {
  double cap_multiplier = 1.0;  // emitted paths capped at multiplier * |input|
  std::uint64_t seed = 0;
};

// Entity replacement: each aligned entity occurrence spawns one copy of the
// path with that occurrence swapped for its counterpart. Output is reservoir
// sampled down to the cap.
PathCorpus augment_entity_replacement(const PathCorpus& corpus, const AlignmentIndex& index,
                                      const AugmentConfig& config);

// Concatenation across an alignment junction: a path of `first` ending at
// entity e joins a path of `second` starting at s' when (e, s') is aligned.
// Both junction spellings are emitted (keep e / keep s'), deduplicated when
// they coincide. Result length is len(first) + len(second) - 1. Single
// round only: both inputs must be raw corpora.
PathCorpus augment_concatenation(const PathCorpus& first, const PathCorpus& second,
                                 const AlignmentIndex& index, const AugmentConfig& config);

struct PathValidation {
  bool ok = true;
  std::string message;  // first violation, empty when ok
};

// Checks one corpus against its source graphs: every (entity, relation,
// entity) window must be a triplet of the relation's graph, resolving
// cross-tag endpoints through the alignment indexes.
PathValidation validate_corpus(const PathCorpus& corpus,
                               const std::vector<const KnowledgeGraph*>& kg_by_tag,
                               const std::vector<const AlignmentIndex*>& alignments);

void save_corpus(const PathCorpus& corpus, const std::string& path);
PathCorpus load_corpus(const std::string& path);

// Human-readable dump, one path per line, elements as "graph:name".
void dump_corpus_text(const PathCorpus& corpus,
                      const std::vector<const KnowledgeGraph*>& kg_by_tag,
                      const std::string& path);

}  // namespace kgt
