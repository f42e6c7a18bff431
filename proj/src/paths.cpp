#include "kgt/paths.hpp"

#include <algorithm>
#include <fstream>

namespace kgt {

PathCorpus sample_paths(const KnowledgeGraph& kg, std::uint8_t kg_tag, const WalkConfig& config) {
  if (config.path_length < 3 || config.path_length % 2 == 0)
    throw ConfigError("walk path_length must be odd and at least 3");
  if (config.walks_per_start < 1) throw ConfigError("walks_per_start must be positive");
  if (!kg.reverse_closed)
    throw DataError("sample_paths requires a reverse-closed graph ('" + kg.name + "')");

  OutgoingIndex out = build_outgoing_index(kg);
  FrequencyTable freq;
  if (config.weighting == NeighborWeighting::inverse_frequency) freq = entity_frequencies(kg);

  std::int32_t steps = (config.path_length - 3) / 2;
  PathCorpus corpus(config.path_length);
  std::vector<std::int32_t> elems(static_cast<std::size_t>(config.path_length));
  std::vector<std::uint8_t> tags(static_cast<std::size_t>(config.path_length), kg_tag);
  std::vector<double> cum;

  for (std::size_t ti = 0; ti < kg.triplets.size(); ++ti) {
    for (std::int32_t w = 0; w < config.walks_per_start; ++w) {
      Rng rng(derive_seed(config.seed,
                          static_cast<std::uint64_t>(ti) * static_cast<std::uint64_t>(config.walks_per_start) + static_cast<std::uint64_t>(w)));
      const Triplet& t = kg.triplets[ti];
      elems[0] = t.s;
      elems[1] = t.r;
      elems[2] = t.o;
      std::int32_t cur = t.o;
      for (std::int32_t s = 0; s < steps; ++s) {
        const auto& outs = out.by_subject[static_cast<std::size_t>(cur)];
        if (outs.empty())
          throw DataError("entity '" + kg.entities.name(cur) + "' has no outgoing triplet");
        std::size_t pick;
        if (config.weighting == NeighborWeighting::uniform) {
          pick = rng.index(outs.size());
        } else {
          cum.resize(outs.size());
          double total = 0.0;
          for (std::size_t j = 0; j < outs.size(); ++j) {
            const Triplet& cand = kg.triplets[static_cast<std::size_t>(outs[j])];
            total += 1.0 / static_cast<double>(freq.entity_counts[static_cast<std::size_t>(cand.o)]);
            cum[j] = total;
          }
          double u = rng.real01() * total;
          pick = static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
          if (pick >= outs.size()) pick = outs.size() - 1;
        }
        const Triplet& step = kg.triplets[static_cast<std::size_t>(outs[pick])];
        elems[static_cast<std::size_t>(3 + 2 * s)] = step.r;
        elems[static_cast<std::size_t>(4 + 2 * s)] = step.o;
        cur = step.o;
      }
      corpus.append(elems.data(), tags.data(), PathProvenance::raw);
    }
  }
  return corpus;
}

AlignmentIndex::AlignmentIndex(const AlignmentSet& a, std::uint8_t left_tag, std::uint8_t right_tag)
    : left_tag_(left_tag), right_tag_(right_tag) {
  for (auto [l, r] : a.pairs) {
    l2r_[l].push_back(r);
    r2l_[r].push_back(l);
  }
}

const std::vector<std::int32_t>& AlignmentIndex::counterparts(std::uint8_t tag,
                                                              std::int32_t idx) const {
  const auto* m = tag == left_tag_ ? &l2r_ : tag == right_tag_ ? &r2l_ : nullptr;
  if (!m) return empty_;
  auto it = m->find(idx);
  return it == m->end() ? empty_ : it->second;
}

namespace {

// Streaming reservoir that keeps at most `cap` paths, uniformly over the
// emitted stream, deterministically for a fixed rng.
class PathReservoir {
 public:
  PathReservoir(std::int32_t length, std::size_t cap, Rng& rng)
      : length_(static_cast<std::size_t>(length)), cap_(cap), rng_(rng) {}

  void offer(const std::vector<std::int32_t>& elems, const std::vector<std::uint8_t>& tags,
             PathProvenance prov) {
    if (cap_ == 0) return;
    if (paths_.size() < cap_) {
      paths_.push_back(elems);
      tags_.push_back(tags);
      prov_.push_back(prov);
    } else {
      std::size_t j = rng_.index(seen_ + 1);
      if (j < cap_) {
        paths_[j] = elems;
        tags_[j] = tags;
        prov_[j] = prov;
      }
    }
    ++seen_;
  }

  PathCorpus finish() const {
    PathCorpus c(static_cast<std::int32_t>(length_));
    for (std::size_t i = 0; i < paths_.size(); ++i)
      c.append(paths_[i].data(), tags_[i].data(), prov_[i]);
    return c;
  }

 private:
  std::size_t length_;
  std::size_t cap_;
  Rng& rng_;
  std::size_t seen_ = 0;
  std::vector<std::vector<std::int32_t>> paths_;
  std::vector<std::vector<std::uint8_t>> tags_;
  std::vector<PathProvenance> prov_;
};

}  // namespace

PathCorpus augment_entity_replacement(const PathCorpus& corpus, const AlignmentIndex& index,
                                      const AugmentConfig& config) {
  if (config.cap_multiplier < 0) throw ConfigError("cap_multiplier must be non-negative");
  Rng rng(derive_seed(config.seed, 0x7e9));
  auto cap = static_cast<std::size_t>(config.cap_multiplier * static_cast<double>(corpus.size()));
  PathReservoir res(corpus.length(), cap, rng);

  std::vector<std::int32_t> elems(static_cast<std::size_t>(corpus.length()));
  std::vector<std::uint8_t> tags(static_cast<std::size_t>(corpus.length()));
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    for (std::int32_t pos = 0; pos < corpus.length(); pos += 2) {
      std::uint8_t tag = corpus.tag(p, pos);
      for (std::int32_t cp : index.counterparts(tag, corpus.element(p, pos))) {
        for (std::int32_t j = 0; j < corpus.length(); ++j) {
          elems[static_cast<std::size_t>(j)] = corpus.element(p, j);
          tags[static_cast<std::size_t>(j)] = corpus.tag(p, j);
        }
        elems[static_cast<std::size_t>(pos)] = cp;
        tags[static_cast<std::size_t>(pos)] = index.other(tag);
        res.offer(elems, tags, PathProvenance::replaced);
      }
    }
  }
  return res.finish();
}

PathCorpus augment_concatenation(const PathCorpus& first, const PathCorpus& second,
                                 const AlignmentIndex& index, const AugmentConfig& config) {
  if (config.cap_multiplier < 0) throw ConfigError("cap_multiplier must be non-negative");
  for (const PathCorpus* c : {&first, &second})
    for (std::size_t p = 0; p < c->size(); ++p)
      if (c->provenance(p) != PathProvenance::raw)
        throw DataError("augment_concatenation takes raw corpora (single augmentation round)");

  // Second corpus paths grouped by (tag, start entity).
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_start;
  auto key = [](std::uint8_t tag, std::int32_t idx) {
    return (static_cast<std::uint64_t>(tag) << 32) | static_cast<std::uint32_t>(idx);
  };
  for (std::size_t p = 0; p < second.size(); ++p)
    by_start[key(second.tag(p, 0), second.element(p, 0))].push_back(p);

  std::int32_t out_len = first.length() + second.length() - 1;
  Rng rng(derive_seed(config.seed, 0xca7));
  auto cap = static_cast<std::size_t>(config.cap_multiplier * static_cast<double>(first.size()));
  PathReservoir res(out_len, cap, rng);

  std::vector<std::int32_t> elems(static_cast<std::size_t>(out_len));
  std::vector<std::uint8_t> tags(static_cast<std::size_t>(out_len));
  std::int32_t last = first.length() - 1;
  for (std::size_t p = 0; p < first.size(); ++p) {
    std::uint8_t end_tag = first.tag(p, last);
    std::int32_t end_ent = first.element(p, last);
    for (std::int32_t cp : index.counterparts(end_tag, first.element(p, last))) {
      std::uint8_t cp_tag = index.other(end_tag);
      auto it = by_start.find(key(cp_tag, cp));
      if (it == by_start.end()) continue;
      for (std::size_t q : it->second) {
        for (std::int32_t j = 0; j < first.length(); ++j) {
          elems[static_cast<std::size_t>(j)] = first.element(p, j);
          tags[static_cast<std::size_t>(j)] = first.tag(p, j);
        }
        for (std::int32_t j = 1; j < second.length(); ++j) {
          elems[static_cast<std::size_t>(last + j)] = second.element(q, j);
          tags[static_cast<std::size_t>(last + j)] = second.tag(q, j);
        }
        // Junction spelled as the first path's end entity...
        res.offer(elems, tags, PathProvenance::concatenated);
        // ...and as the second path's start entity, unless identical.
        if (cp_tag != end_tag || cp != end_ent) {
          elems[static_cast<std::size_t>(last)] = cp;
          tags[static_cast<std::size_t>(last)] = cp_tag;
          res.offer(elems, tags, PathProvenance::concatenated);
        }
      }
    }
  }
  return res.finish();
}

PathValidation validate_corpus(const PathCorpus& corpus,
                               const std::vector<const KnowledgeGraph*>& kg_by_tag,
                               const std::vector<const AlignmentIndex*>& alignments) {
  auto resolve = [&](std::uint8_t from_tag, std::int32_t idx, std::uint8_t to_tag,
                     std::vector<std::int32_t>& out) {
    out.clear();
    if (from_tag == to_tag) {
      out.push_back(idx);
      return;
    }
    for (const auto* a : alignments) {
      if ((a->left_tag() == from_tag && a->right_tag() == to_tag) ||
          (a->right_tag() == from_tag && a->left_tag() == to_tag))
        for (std::int32_t c : a->counterparts(from_tag, idx)) out.push_back(c);
    }
  };

  std::vector<std::int32_t> subs, objs;
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    for (std::int32_t pos = 0; pos + 2 < corpus.length(); pos += 2) {
      std::uint8_t rel_tag = corpus.tag(p, pos + 1);
      if (rel_tag >= kg_by_tag.size() || !kg_by_tag[rel_tag])
        return {false, "path " + std::to_string(p) + ": unknown graph tag"};
      const KnowledgeGraph& kg = *kg_by_tag[rel_tag];
      std::int32_t rel = corpus.element(p, pos + 1);
      resolve(corpus.tag(p, pos), corpus.element(p, pos), rel_tag, subs);
      resolve(corpus.tag(p, pos + 2), corpus.element(p, pos + 2), rel_tag, objs);
      if (subs.empty() || objs.empty())
        return {false, "path " + std::to_string(p) + ": junction entity has no counterpart in graph '" +
                           kg.name + "'"};
      bool found = false;
      for (std::int32_t s : subs) {
        for (std::int32_t o : objs)
          if (kg.has_triplet({s, rel, o})) {
            found = true;
            break;
          }
        if (found) break;
      }
      if (!found)
        return {false, "path " + std::to_string(p) + ": window at position " + std::to_string(pos + 1) +
                           " is not a triplet of graph '" + kg.name + "'"};
    }
  }
  return {};
}

void save_corpus(const PathCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write corpus: " + path);
  const char magic[4] = {'K', 'G', 'T', 'P'};
  out.write(magic, 4);
  std::uint32_t version = 1, length = static_cast<std::uint32_t>(corpus.length());
  std::uint64_t count = corpus.size();
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&length), 4);
  out.write(reinterpret_cast<const char*>(&count), 8);
  out.write(reinterpret_cast<const char*>(corpus.elements().data()),
            static_cast<std::streamsize>(corpus.elements().size() * 4));
  out.write(reinterpret_cast<const char*>(corpus.tags().data()),
            static_cast<std::streamsize>(corpus.tags().size()));
  out.write(reinterpret_cast<const char*>(corpus.provenance_bytes().data()),
            static_cast<std::streamsize>(corpus.provenance_bytes().size()));
}

PathCorpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus: " + path);
  char magic[4];
  std::uint32_t version = 0, length = 0;
  std::uint64_t count = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&length), 4);
  in.read(reinterpret_cast<char*>(&count), 8);
  if (!in || std::string(magic, 4) != "KGTP") throw DataError(path + ": not a corpus file");
  if (version != 1) throw DataError(path + ": unsupported corpus version");
  PathCorpus corpus(static_cast<std::int32_t>(length));
  std::vector<std::int32_t> elems(count * length);
  std::vector<std::uint8_t> tags(count * length);
  std::vector<std::uint8_t> prov(count);
  in.read(reinterpret_cast<char*>(elems.data()), static_cast<std::streamsize>(elems.size() * 4));
  in.read(reinterpret_cast<char*>(tags.data()), static_cast<std::streamsize>(tags.size()));
  in.read(reinterpret_cast<char*>(prov.data()), static_cast<std::streamsize>(prov.size()));
  if (!in) throw DataError(path + " is truncated");
  for (std::uint64_t p = 0; p < count; ++p)
    corpus.append(elems.data() + p * length, tags.data() + p * length,
                  static_cast<PathProvenance>(prov[p]));
  return corpus;
}

void dump_corpus_text(const PathCorpus& corpus,
                      const std::vector<const KnowledgeGraph*>& kg_by_tag,
                      const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    for (std::int32_t j = 0; j < corpus.length(); ++j) {
      const KnowledgeGraph& kg = *kg_by_tag.at(corpus.tag(p, j));
      const std::string& name = j % 2 == 0 ? kg.entities.name(corpus.element(p, j))
                                           : kg.relations.name(corpus.element(p, j));
      out << (j ? "\t" : "") << kg.name << ':' << name;
    }
    out << '\n';
  }
}

}  // namespace kgt
