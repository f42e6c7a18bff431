#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "kgt/kg.hpp"
#include "kgt/paths.hpp"
#include "testutil.hpp"

using namespace kgt;
using testutil::make_kg;
using testutil::random_graph;
using testutil::TempDir;

namespace {

KnowledgeGraph closed_chain() {
  return add_reverse_triplets(make_kg("g", {{"a", "r1", "b"}, {"b", "r2", "c"}}));
}

Triplet path_head(const PathCorpus& c, std::size_t p) {
  return {c.element(p, 0), c.element(p, 1), c.element(p, 2)};
}

}  // namespace

TEST_CASE("every triplet seeds exactly walks_per_start paths") {
  KnowledgeGraph kg = add_reverse_triplets(random_graph(12, 3, 10, 9));
  WalkConfig cfg;
  cfg.path_length = 5;
  cfg.walks_per_start = 3;
  cfg.seed = 4;
  PathCorpus corpus = sample_paths(kg, 0, cfg);
  CHECK(corpus.size() == 3 * kg.triplets.size());
  std::map<std::tuple<int, int, int>, int> starts;
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    Triplet h = path_head(corpus, p);
    starts[{h.s, h.r, h.o}] += 1;
    CHECK(kg.has_triplet(h));
    CHECK(corpus.provenance(p) == PathProvenance::raw);
    for (std::int32_t j = 0; j < corpus.length(); ++j) CHECK(corpus.tag(p, j) == 0);
  }
  CHECK(starts.size() == kg.triplets.size());
  for (const auto& [key, n] : starts) CHECK(n == 3);
  PathValidation v = validate_corpus(corpus, {&kg}, {});
  CHECK(v.ok);
  CHECK(v.message.empty());
}

TEST_CASE("length-3 walks are the triplets themselves") {
  KnowledgeGraph kg = closed_chain();
  WalkConfig cfg;
  cfg.path_length = 3;
  cfg.walks_per_start = 2;
  PathCorpus corpus = sample_paths(kg, 0, cfg);
  CHECK(corpus.size() == 2 * kg.triplets.size());
  for (std::size_t p = 0; p < corpus.size(); ++p) CHECK(kg.has_triplet(path_head(corpus, p)));
}

TEST_CASE("longer walks take (length - 3) / 2 extra hops") {
  KnowledgeGraph kg = closed_chain();
  WalkConfig cfg;
  cfg.path_length = 7;
  cfg.walks_per_start = 1;
  PathCorpus corpus = sample_paths(kg, 0, cfg);
  CHECK(corpus.length() == 7);
  // Each consecutive window must chain: window objects feed the next subject.
  for (std::size_t p = 0; p < corpus.size(); ++p)
    for (std::int32_t pos = 0; pos + 2 < 7; pos += 2)
      CHECK(kg.has_triplet({corpus.element(p, pos), corpus.element(p, pos + 1),
                            corpus.element(p, pos + 2)}));
}

TEST_CASE("a binary branch is drawn uniformly") {
  KnowledgeGraph kg = closed_chain();
  WalkConfig cfg;
  cfg.path_length = 5;
  cfg.walks_per_start = 100000;
  cfg.seed = 123;
  PathCorpus corpus = sample_paths(kg, 0, cfg);
  std::int32_t r1 = kg.relations.find("r1").value();
  std::int32_t b = kg.entities.find("b").value();
  // Walks seeded by (a, r1, b) continue from b, which offers exactly two
  // outgoing triplets: (b, r2, c) and (b, r1[reverse], a).
  std::int64_t n = 0, r2_picks = 0;
  std::int32_t r2 = kg.relations.find("r2").value();
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    if (corpus.element(p, 1) != r1 || corpus.element(p, 0) != kg.entities.find("a").value())
      continue;
    CHECK(corpus.element(p, 2) == b);
    ++n;
    if (corpus.element(p, 3) == r2) ++r2_picks;
  }
  CHECK(n == 100000);
  double p_hat = static_cast<double>(r2_picks) / static_cast<double>(n);
  CHECK(p_hat == doctest::Approx(0.5).epsilon(0.02));
  // Chi-squared against the uniform draw, 1 dof, 1% critical value 6.635.
  double expected = static_cast<double>(n) / 2.0;
  double chi2 = (static_cast<double>(r2_picks) - expected) * (static_cast<double>(r2_picks) - expected) / expected +
                (static_cast<double>(n - r2_picks) - expected) * (static_cast<double>(n - r2_picks) - expected) / expected;
  CHECK(chi2 < 6.635);
}

TEST_CASE("inverse-frequency weighting prefers rare successors") {
  // From b both h and u are reachable; h is inflated by three fan-out edges,
  // so in the closed graph freq(h) = 8 and freq(u) = 2, giving
  // P(u) = (1/2) / (1/2 + 1/8) = 0.8 on b's binary choice.
  KnowledgeGraph kg = add_reverse_triplets(make_kg(
      "g", {{"b", "r", "h"}, {"b", "r", "u"}, {"h", "s", "x1"}, {"h", "s", "x2"}, {"h", "s", "x3"}}));
  WalkConfig cfg;
  cfg.path_length = 5;
  cfg.walks_per_start = 20000;
  cfg.weighting = NeighborWeighting::inverse_frequency;
  cfg.seed = 17;
  PathCorpus corpus = sample_paths(kg, 0, cfg);
  std::int32_t b = kg.entities.find("b").value();
  std::int32_t u = kg.entities.find("u").value();
  std::int64_t n = 0, picked_u = 0;
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    if (corpus.element(p, 2) != b) continue;  // walks whose choice happens at b
    ++n;
    if (corpus.element(p, 4) == u) ++picked_u;
  }
  CHECK(n == 2 * 20000);
  double p_hat = static_cast<double>(picked_u) / static_cast<double>(n);
  CHECK(p_hat == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("sampling is byte-identical for a fixed seed") {
  KnowledgeGraph kg = add_reverse_triplets(random_graph(15, 3, 12, 31));
  WalkConfig cfg;
  cfg.path_length = 7;
  cfg.walks_per_start = 4;
  cfg.seed = 99;
  PathCorpus a = sample_paths(kg, 0, cfg);
  PathCorpus b = sample_paths(kg, 0, cfg);
  CHECK(a.elements() == b.elements());
  CHECK(a.tags() == b.tags());
  CHECK(a.provenance_bytes() == b.provenance_bytes());
  cfg.seed = 100;
  PathCorpus c = sample_paths(kg, 0, cfg);
  CHECK(a.elements() != c.elements());
}

TEST_CASE("walk configs are validated") {
  KnowledgeGraph kg = closed_chain();
  WalkConfig cfg;
  cfg.path_length = 4;
  CHECK_THROWS_AS(sample_paths(kg, 0, cfg), ConfigError);
  cfg.path_length = 1;
  CHECK_THROWS_AS(sample_paths(kg, 0, cfg), ConfigError);
  cfg.path_length = 5;
  cfg.walks_per_start = 0;
  CHECK_THROWS_AS(sample_paths(kg, 0, cfg), ConfigError);
  CHECK_THROWS_AS(validate_walk_config(WalkConfig{4, 1, NeighborWeighting::uniform, 0}),
                  ConfigError);
  KnowledgeGraph open = make_kg("g", {{"a", "r", "b"}});
  WalkConfig ok;
  CHECK_THROWS_WITH_AS(sample_paths(open, 0, ok), doctest::Contains("reverse-closed"), DataError);
}

TEST_CASE("corpus length must be odd and at least three") {
  CHECK_THROWS_AS(PathCorpus(2), ConfigError);
  CHECK_THROWS_AS(PathCorpus(4), ConfigError);
  CHECK_THROWS_AS(PathCorpus(1), ConfigError);
  CHECK_NOTHROW(PathCorpus(3));
}

// ---- entity replacement --------------------------------------------------------

namespace {

struct TwoGraphs {
  KnowledgeGraph k1 = add_reverse_triplets(make_kg("K1", {{"a", "r", "b"}}));
  KnowledgeGraph k2 = add_reverse_triplets(make_kg("K2", {{"x", "s", "y"}}));
  AlignmentSet set;
  TwoGraphs(const std::string& left_name, const std::string& right_name) {
    set.left_kg = "K1";
    set.right_kg = "K2";
    set.add(k1.entities.find(left_name).value(), k2.entities.find(right_name).value());
  }
};

PathCorpus raw3(const KnowledgeGraph& kg, std::uint8_t tag) {
  WalkConfig cfg;
  cfg.path_length = 3;
  cfg.walks_per_start = 1;
  return sample_paths(kg, tag, cfg);
}

}  // namespace

TEST_CASE("each aligned occurrence spawns one replaced path") {
  TwoGraphs g("a", "x");  // a ~ x
  AlignmentIndex idx(g.set, 0, 1);
  PathCorpus raw = raw3(g.k1, 0);  // [a r b], [b r[reverse] a]
  REQUIRE(raw.size() == 2);
  PathCorpus rep = augment_entity_replacement(raw, idx, {1.0, 7});
  CHECK(rep.size() == 2);  // one occurrence of a in each raw path
  std::int32_t x = g.k2.entities.find("x").value();
  for (std::size_t p = 0; p < rep.size(); ++p) {
    CHECK(rep.provenance(p) == PathProvenance::replaced);
    bool found = false;
    for (std::int32_t pos = 0; pos < rep.length(); pos += 2)
      if (rep.tag(p, pos) == 1) {
        CHECK(rep.element(p, pos) == x);
        found = true;
      }
    CHECK(found);
  }
  PathValidation v = validate_corpus(rep, {&g.k1, &g.k2}, {&idx});
  CHECK(v.ok);
}

TEST_CASE("replacement works from either side of the alignment") {
  TwoGraphs g("b", "y");
  AlignmentIndex idx(g.set, 0, 1);
  PathCorpus raw = raw3(g.k2, 1);  // [x s y], [y s[reverse] x]
  PathCorpus rep = augment_entity_replacement(raw, idx, {1.0, 7});
  CHECK(rep.size() == 2);
  std::int32_t b = g.k1.entities.find("b").value();
  for (std::size_t p = 0; p < rep.size(); ++p) {
    bool found = false;
    for (std::int32_t pos = 0; pos < rep.length(); pos += 2)
      if (rep.tag(p, pos) == 0) {
        CHECK(rep.element(p, pos) == b);
        found = true;
      }
    CHECK(found);
  }
  CHECK(validate_corpus(rep, {&g.k1, &g.k2}, {&idx}).ok);
}

TEST_CASE("an unaligned corpus yields no replacements") {
  TwoGraphs g("a", "x");
  AlignmentSet empty;
  empty.left_kg = "K1";
  empty.right_kg = "K2";
  AlignmentIndex idx(empty, 0, 1);
  PathCorpus rep = augment_entity_replacement(raw3(g.k1, 0), idx, {1.0, 7});
  CHECK(rep.size() == 0);
}

TEST_CASE("the multiplier caps replacement output") {
  TwoGraphs g("a", "x");
  AlignmentIndex idx(g.set, 0, 1);
  PathCorpus raw = raw3(g.k1, 0);
  CHECK(augment_entity_replacement(raw, idx, {0.5, 7}).size() == 1);
  CHECK(augment_entity_replacement(raw, idx, {0.0, 7}).size() == 0);
  CHECK_THROWS_AS(augment_entity_replacement(raw, idx, {-1.0, 7}), ConfigError);
}

TEST_CASE("replacement is deterministic in the seed") {
  KnowledgeGraph k1 = add_reverse_triplets(random_graph(10, 2, 10, 3, "K1"));
  KnowledgeGraph k2 = add_reverse_triplets(random_graph(10, 2, 10, 4, "K2"));
  AlignmentSet set;
  set.left_kg = "K1";
  set.right_kg = "K2";
  for (std::int32_t i = 0; i < 5; ++i) set.add(i, i);
  AlignmentIndex idx(set, 0, 1);
  WalkConfig w;
  w.path_length = 5;
  w.walks_per_start = 2;
  w.seed = 8;
  PathCorpus raw = sample_paths(k1, 0, w);
  PathCorpus a = augment_entity_replacement(raw, idx, {0.4, 11});
  PathCorpus b = augment_entity_replacement(raw, idx, {0.4, 11});
  CHECK(a.elements() == b.elements());
  CHECK(a.tags() == b.tags());
  CHECK(a.size() == static_cast<std::size_t>(0.4 * static_cast<double>(raw.size())));
  CHECK(validate_corpus(a, {&k1, &k2}, {&idx}).ok);
}

// ---- concatenation ---------------------------------------------------------------

TEST_CASE("concatenation joins at the alignment and spells both junctions") {
  TwoGraphs g("b", "x");  // K1 paths ending at b join K2 paths starting at x
  AlignmentIndex idx(g.set, 0, 1);
  PathCorpus first = raw3(g.k1, 0);
  PathCorpus second = raw3(g.k2, 1);
  PathCorpus cc = augment_concatenation(first, second, idx, {2.0, 5});
  REQUIRE(cc.size() == 2);
  CHECK(cc.length() == 5);
  std::int32_t b = g.k1.entities.find("b").value();
  std::int32_t x = g.k2.entities.find("x").value();
  bool spelled_b = false, spelled_x = false;
  for (std::size_t p = 0; p < cc.size(); ++p) {
    CHECK(cc.provenance(p) == PathProvenance::concatenated);
    if (cc.tag(p, 2) == 0 && cc.element(p, 2) == b) spelled_b = true;
    if (cc.tag(p, 2) == 1 && cc.element(p, 2) == x) spelled_x = true;
  }
  CHECK(spelled_b);
  CHECK(spelled_x);
  CHECK(validate_corpus(cc, {&g.k1, &g.k2}, {&idx}).ok);
}

TEST_CASE("an identity junction is emitted once") {
  KnowledgeGraph k1 = add_reverse_triplets(make_kg("K1", {{"a", "r", "b"}}));
  AlignmentSet self;
  self.left_kg = "K1";
  self.right_kg = "K1";
  self.add(k1.entities.find("b").value(), k1.entities.find("b").value());
  AlignmentIndex idx(self, 0, 0);
  PathCorpus raw = raw3(k1, 0);
  PathCorpus cc = augment_concatenation(raw, raw, idx, {4.0, 5});
  CHECK(cc.size() == 1);  // [a r b] + [b r[reverse] a], single spelling
  CHECK(cc.element(0, 0) == k1.entities.find("a").value());
  CHECK(cc.element(0, 4) == k1.entities.find("a").value());
}

TEST_CASE("an empty alignment concatenates nothing") {
  TwoGraphs g("b", "x");
  AlignmentSet empty;
  empty.left_kg = "K1";
  empty.right_kg = "K2";
  AlignmentIndex idx(empty, 0, 1);
  PathCorpus cc = augment_concatenation(raw3(g.k1, 0), raw3(g.k2, 1), idx, {1.0, 5});
  CHECK(cc.size() == 0);
}

TEST_CASE("concatenation takes raw corpora only") {
  TwoGraphs g("b", "x");
  AlignmentIndex idx(g.set, 0, 1);
  PathCorpus first = raw3(g.k1, 0);
  PathCorpus second = raw3(g.k2, 1);
  PathCorpus cc = augment_concatenation(first, second, idx, {2.0, 5});
  CHECK_THROWS_WITH_AS(augment_concatenation(cc, second, idx, {1.0, 5}),
                       doctest::Contains("raw corpora"), DataError);
}

TEST_CASE("corrupted paths fail validation with the offending window") {
  KnowledgeGraph kg = closed_chain();
  WalkConfig w;
  w.path_length = 5;
  w.walks_per_start = 1;
  PathCorpus good = sample_paths(kg, 0, w);
  PathCorpus bad(5);
  std::vector<std::int32_t> elems(5);
  std::vector<std::uint8_t> tags(5, 0);
  for (std::int32_t j = 0; j < 5; ++j) elems[static_cast<std::size_t>(j)] = good.element(0, j);
  elems[4] = elems[4] == 0 ? 1 : 0;  // break the final window's object
  bad.append(elems.data(), tags.data(), PathProvenance::raw);
  PathValidation v = validate_corpus(bad, {&kg}, {});
  bool broke_last = !kg.has_triplet({elems[2], elems[3], elems[4]});
  if (broke_last) {
    CHECK_FALSE(v.ok);
    CHECK(v.message.find("position 3") != std::string::npos);
  } else {
    CHECK(v.ok);  // flipping happened to land on another valid triplet
  }
}

TEST_CASE("corpus files roundtrip and reject corruption") {
  TempDir tmp("corpus-io");
  KnowledgeGraph kg = add_reverse_triplets(random_graph(10, 2, 8, 13));
  WalkConfig w;
  w.path_length = 5;
  w.walks_per_start = 2;
  w.seed = 3;
  PathCorpus corpus = sample_paths(kg, 0, w);
  save_corpus(corpus, tmp.file("c.bin"));
  PathCorpus back = load_corpus(tmp.file("c.bin"));
  CHECK(back.length() == corpus.length());
  CHECK(back.elements() == corpus.elements());
  CHECK(back.tags() == corpus.tags());
  CHECK(back.provenance_bytes() == corpus.provenance_bytes());

  std::string bytes = testutil::read_text(tmp.file("c.bin"));
  testutil::write_text(tmp.file("short.bin"), bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_WITH_AS(load_corpus(tmp.file("short.bin")), doctest::Contains("truncated"),
                       DataError);
  testutil::write_text(tmp.file("junk.bin"), "not a corpus at all");
  CHECK_THROWS_AS(load_corpus(tmp.file("junk.bin")), DataError);
}

TEST_CASE("the text dump names elements graph-qualified") {
  TempDir tmp("corpus-dump");
  KnowledgeGraph kg = add_reverse_triplets(make_kg("g", {{"a", "r", "b"}}));
  WalkConfig w;
  w.path_length = 3;
  w.walks_per_start = 1;
  PathCorpus corpus = sample_paths(kg, 0, w);
  dump_corpus_text(corpus, {&kg}, tmp.file("c.txt"));
  std::string text = testutil::read_text(tmp.file("c.txt"));
  CHECK(text.find("g:a\tg:r\tg:b") != std::string::npos);
  CHECK(text.find("g:b\tg:r[reverse]\tg:a") != std::string::npos);
}
