#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <unordered_set>

#include "kgt/kg.hpp"
#include "kgt/kg_io.hpp"
#include "testutil.hpp"

using namespace kgt;
using testutil::make_kg;
using testutil::random_graph;
using testutil::TempDir;
using testutil::write_text;

TEST_CASE("loading deduplicates repeated lines") {
  TempDir tmp("load-dedup");
  write_text(tmp.file("t.tsv"), "a\tr\tb\na\tr\tb\n");
  KnowledgeGraph kg = load_triplets(tmp.file("t.tsv"), "g");
  CHECK(kg.triplets.size() == 1);
  CHECK(kg.entities.size() == 2);
  CHECK(kg.relations.size() == 1);
}

TEST_CASE("a self-loop names one entity") {
  TempDir tmp("load-selfloop");
  write_text(tmp.file("t.tsv"), "a\tr\ta\n");
  KnowledgeGraph kg = load_triplets(tmp.file("t.tsv"), "g");
  CHECK(kg.triplets.size() == 1);
  CHECK(kg.entities.size() == 1);
  CHECK(kg.relations.size() == 1);
}

TEST_CASE("an empty file loads as an empty graph") {
  TempDir tmp("load-empty");
  write_text(tmp.file("t.tsv"), "");
  KnowledgeGraph kg = load_triplets(tmp.file("t.tsv"), "g");
  CHECK(kg.triplets.empty());
  CHECK(kg.entities.size() == 0);
  CHECK(kg.relations.size() == 0);
}

TEST_CASE("blank lines are skipped, not counted") {
  TempDir tmp("load-blank");
  write_text(tmp.file("t.tsv"), "\na\tr\tb\n   \nb\tr\tc\n");
  KnowledgeGraph kg = load_triplets(tmp.file("t.tsv"), "g");
  CHECK(kg.triplets.size() == 2);
}

TEST_CASE("malformed lines report the 1-based line number") {
  TempDir tmp("load-malformed");
  write_text(tmp.file("t.tsv"), "a\tr\tb\na\tb\n");
  CHECK_THROWS_WITH_AS(load_triplets(tmp.file("t.tsv"), "g"),
                       doctest::Contains(":2: expected 3 tab-separated fields"), DataError);
}

TEST_CASE("empty fields report the line number") {
  TempDir tmp("load-emptyfield");
  write_text(tmp.file("t.tsv"), "a\tr\tb\nc\t \td\n");
  CHECK_THROWS_WITH_AS(load_triplets(tmp.file("t.tsv"), "g"),
                       doctest::Contains(":2: empty field"), DataError);
}

TEST_CASE("surrounding whitespace is trimmed from fields") {
  TempDir tmp("load-trim");
  write_text(tmp.file("t.tsv"), " a \tr\t b\n");
  KnowledgeGraph kg = load_triplets(tmp.file("t.tsv"), "g");
  CHECK(kg.entities.find("a").has_value());
  CHECK(kg.entities.find("b").has_value());
}

TEST_CASE("vocabulary ids follow first appearance") {
  TempDir tmp("load-order");
  write_text(tmp.file("t.tsv"), "b\ts\ta\na\tr\tc\n");
  KnowledgeGraph kg = load_triplets(tmp.file("t.tsv"), "g");
  CHECK(kg.entities.name(0) == "b");
  CHECK(kg.entities.name(1) == "a");
  CHECK(kg.entities.name(2) == "c");
  CHECK(kg.relations.name(0) == "s");
  CHECK(kg.relations.name(1) == "r");
}

TEST_CASE("missing files are data errors") {
  CHECK_THROWS_AS(load_triplets("/nonexistent/nowhere.tsv", "g"), DataError);
}

TEST_CASE("dataset loading unions the parts and keeps train vocabulary first") {
  TempDir tmp("dataset");
  write_text(tmp.file("train.tsv"), "a\tr\tb\nb\tr\tc\nc\ts\ta\n");
  write_text(tmp.file("valid.tsv"), "a\tr\tc\n");
  write_text(tmp.file("test.tsv"), "b\ts\ta\n");
  Dataset d = load_dataset("g", tmp.file("train.tsv"), tmp.file("valid.tsv"), tmp.file("test.tsv"));
  CHECK(d.split.train.size() == 3);
  CHECK(d.split.valid.size() == 1);
  CHECK(d.split.test.size() == 1);
  CHECK(d.kg.triplets.size() == 5);
  CHECK(d.kg.entities.name(0) == "a");  // train introduces the ids
  for (const auto& t : d.split.valid) CHECK(d.kg.has_triplet(t));
}

TEST_CASE("dataset loading rejects validation entities unseen in train") {
  TempDir tmp("dataset-cover");
  write_text(tmp.file("train.tsv"), "a\tr\tb\n");
  write_text(tmp.file("valid.tsv"), "a\tr\tz\n");
  write_text(tmp.file("test.tsv"), "b\tr\ta\n");
  CHECK_THROWS_WITH_AS(
      load_dataset("g", tmp.file("train.tsv"), tmp.file("valid.tsv"), tmp.file("test.tsv")),
      doctest::Contains("absent from train"), DataError);
}

TEST_CASE("alignment loading resolves names and rejects unknown ones") {
  TempDir tmp("alignment");
  KnowledgeGraph l = make_kg("L", {{"a", "r", "b"}});
  KnowledgeGraph r = make_kg("R", {{"x", "s", "y"}});
  write_text(tmp.file("ok.tsv"), "a\tx\nb\ty\na\tx\n");
  AlignmentSet a = load_alignment(tmp.file("ok.tsv"), l, r);
  CHECK(a.pairs.size() == 2);  // duplicate pair dropped
  CHECK(a.pairs[0] == std::pair<std::int32_t, std::int32_t>(0, 0));
  write_text(tmp.file("bad.tsv"), "a\tzz\n");
  CHECK_THROWS_WITH_AS(load_alignment(tmp.file("bad.tsv"), l, r),
                       doctest::Contains("unknown entity 'zz'"), DataError);
}

TEST_CASE("relation maps resolve relation names") {
  TempDir tmp("relmap");
  KnowledgeGraph l = make_kg("L", {{"a", "r", "b"}});
  KnowledgeGraph r = make_kg("R", {{"x", "s", "y"}});
  write_text(tmp.file("map.tsv"), "r\ts\n");
  auto m = load_relation_map(tmp.file("map.tsv"), l, r);
  REQUIRE(m.size() == 1);
  CHECK(m[0] == std::pair<std::int32_t, std::int32_t>(0, 0));
  write_text(tmp.file("bad.tsv"), "q\ts\n");
  CHECK_THROWS_WITH_AS(load_relation_map(tmp.file("bad.tsv"), l, r),
                       doctest::Contains("unknown relation 'q'"), DataError);
}

// ---- reverse closure ---------------------------------------------------------

TEST_CASE("closing a single triplet doubles triplets and relations") {
  KnowledgeGraph kg = make_kg("g", {{"a", "r", "b"}});
  KnowledgeGraph closed = add_reverse_triplets(kg);
  CHECK(closed.triplets.size() == 2);
  CHECK(closed.relations.size() == 2);
  CHECK(closed.relations.name(1) == "r[reverse]");
  CHECK(closed.relation_is_reverse[1]);
  CHECK_FALSE(closed.relation_is_reverse[0]);
  CHECK(closed.has_triplet({1, 1, 0}));
  CHECK(closed.reverse_closed);
}

TEST_CASE("closing a self-loop keeps both spellings distinct") {
  KnowledgeGraph kg = make_kg("g", {{"a", "r", "a"}});
  KnowledgeGraph closed = add_reverse_triplets(kg);
  CHECK(closed.triplets.size() == 2);  // (a, r, a) and (a, r[reverse], a)
}

TEST_CASE("closure doubles counts and reaches minimum out-degree one") {
  KnowledgeGraph kg = random_graph(20, 3, 15, 11);
  KnowledgeGraph closed = add_reverse_triplets(kg);
  CHECK(closed.triplets.size() == 2 * kg.triplets.size());
  CHECK(closed.relations.size() == 2 * kg.relations.size());
  OutgoingIndex idx = build_outgoing_index(closed);
  for (const auto& outgoing : idx.by_subject) CHECK(outgoing.size() >= 1);
  std::size_t listed = 0;
  for (const auto& outgoing : idx.by_subject) listed += outgoing.size();
  CHECK(listed == closed.triplets.size());
}

TEST_CASE("reverse_relation maps between the two halves") {
  KnowledgeGraph closed = add_reverse_triplets(make_kg("g", {{"a", "r", "b"}, {"a", "s", "b"}}));
  CHECK(closed.reverse_relation(0) == 2);
  CHECK(closed.reverse_relation(2) == 0);
  CHECK(closed.reverse_relation(1) == 3);
  KnowledgeGraph open = make_kg("g", {{"a", "r", "b"}});
  CHECK_THROWS_AS(open.reverse_relation(0), DataError);
}

TEST_CASE("closing an already-closed graph is an error") {
  KnowledgeGraph closed = add_reverse_triplets(make_kg("g", {{"a", "r", "b"}}));
  CHECK_THROWS_WITH_AS(add_reverse_triplets(closed), doctest::Contains("already reverse-closed"),
                       DataError);
}

// ---- frequencies -------------------------------------------------------------

TEST_CASE("entity frequencies count subject and object occurrences") {
  KnowledgeGraph kg = make_kg("g", {{"a", "r", "b"}, {"a", "r", "c"}});
  FrequencyTable f = entity_frequencies(kg);
  CHECK(f.entity_counts[0] == 2);  // a
  CHECK(f.entity_counts[1] == 1);  // b
  CHECK(f.entity_counts[2] == 1);  // c
  CHECK(f.relation_counts[0] == 2);
}

TEST_CASE("closure equalizes the single-edge frequencies") {
  KnowledgeGraph closed = add_reverse_triplets(make_kg("g", {{"a", "r", "b"}}));
  FrequencyTable f = entity_frequencies(closed);
  CHECK(f.entity_counts[0] == 2);
  CHECK(f.entity_counts[1] == 2);
}

TEST_CASE("entity counts always sum to twice the triplet count") {
  KnowledgeGraph kg = random_graph(30, 4, 40, 5);
  FrequencyTable f = entity_frequencies(kg);
  std::int64_t total = 0;
  for (auto c : f.entity_counts) total += c;
  CHECK(total == 2 * static_cast<std::int64_t>(kg.triplets.size()));
  std::int64_t rel_total = 0;
  for (auto c : f.relation_counts) rel_total += c;
  CHECK(rel_total == static_cast<std::int64_t>(kg.triplets.size()));
}

// ---- collection validation ----------------------------------------------------

TEST_CASE("single-graph collections need the exemption") {
  MultiSourceCollection c;
  c.kgs.push_back(make_kg("only", {{"a", "r", "b"}}));
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("single-graph exemption"), DataError);
  CHECK_NOTHROW(c.validate(true));
}

TEST_CASE("every graph must share an alignment") {
  MultiSourceCollection c;
  c.kgs.push_back(make_kg("K1", {{"a", "r", "b"}}));
  c.kgs.push_back(make_kg("K2", {{"x", "s", "y"}}));
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("shares no alignment"), DataError);
  AlignmentSet a;
  a.left_kg = "K1";
  a.right_kg = "K2";
  a.add(0, 0);
  c.alignments.push_back(a);
  CHECK_NOTHROW(c.validate());
}

// ---- merge -------------------------------------------------------------------

namespace {

MultiSourceCollection two_graphs_one_pair() {
  MultiSourceCollection c;
  c.kgs.push_back(make_kg("K1", {{"a", "r", "b"}}));
  c.kgs.push_back(make_kg("K2", {{"x", "s", "y"}}));
  AlignmentSet a;
  a.left_kg = "K1";
  a.right_kg = "K2";
  a.add(1, 0);  // b ~ x
  c.alignments.push_back(a);
  return c;
}

}  // namespace

TEST_CASE("merging one aligned pair collapses it into a shared node") {
  MergeResult m = merge_aligned(two_graphs_one_pair());
  CHECK(m.merged.entities.size() == 3);
  CHECK(m.merged.relations.size() == 2);
  CHECK(m.merged.relations.name(0) == "K1:r");
  CHECK(m.merged.relations.name(1) == "K2:s");
  CHECK(m.entity_class[0][1] == m.entity_class[1][0]);  // b and x coincide
  CHECK(m.merged.entities.name(m.entity_class[0][1]) == "K1:b");  // first member names the class
  CHECK(m.merged.triplets.size() == 2);
  CHECK(m.mapped_triplets == 2);
  // The chain a -r-> b=x -s-> y exists in the merged graph.
  CHECK(m.merged.has_triplet({m.entity_class[0][0], 0, m.entity_class[0][1]}));
  CHECK(m.merged.has_triplet({m.entity_class[1][0], 1, m.entity_class[1][1]}));
}

TEST_CASE("an empty alignment merges to the disjoint union") {
  MultiSourceCollection c = two_graphs_one_pair();
  c.alignments.clear();
  MergeResult m = merge_aligned(c);
  CHECK(m.merged.entities.size() == 4);
  CHECK(m.merged.relations.size() == 2);
  CHECK(m.merged.triplets.size() == 2);
}

TEST_CASE("alignment classes are transitive across sets") {
  MultiSourceCollection c;
  c.kgs.push_back(make_kg("K1", {{"a", "r", "b"}}));
  c.kgs.push_back(make_kg("K2", {{"x", "s", "y"}}));
  c.kgs.push_back(make_kg("K3", {{"p", "t", "q"}}));
  AlignmentSet a12, a23;
  a12.left_kg = "K1";
  a12.right_kg = "K2";
  a12.add(0, 0);  // a ~ x
  a23.left_kg = "K2";
  a23.right_kg = "K3";
  a23.add(0, 0);  // x ~ p
  c.alignments = {a12, a23};
  MergeResult m = merge_aligned(c);
  CHECK(m.entity_class[0][0] == m.entity_class[1][0]);
  CHECK(m.entity_class[1][0] == m.entity_class[2][0]);
  CHECK(m.merged.entities.size() == 4);  // {a,x,p}, b, y, q
}

TEST_CASE("two pairs sharing a counterpart merge three entities") {
  MultiSourceCollection c;
  c.kgs.push_back(make_kg("K1", {{"a", "r", "b"}}));
  c.kgs.push_back(make_kg("K2", {{"x", "s", "y"}}));
  AlignmentSet a;
  a.left_kg = "K1";
  a.right_kg = "K2";
  a.add(0, 0);  // a ~ x
  a.add(1, 0);  // b ~ x  -> a, b, x all one class
  c.alignments.push_back(a);
  MergeResult m = merge_aligned(c);
  CHECK(m.entity_class[0][0] == m.entity_class[0][1]);
  CHECK(m.entity_class[0][0] == m.entity_class[1][0]);
  CHECK(m.merged.entities.size() == 2);
}

TEST_CASE("merging preserves the pre-deduplication triplet count") {
  KnowledgeGraph g1 = random_graph(15, 2, 10, 3, "K1");
  KnowledgeGraph g2 = random_graph(12, 3, 8, 4, "K2");
  MultiSourceCollection c;
  c.kgs = {g1, g2};
  AlignmentSet a;
  a.left_kg = "K1";
  a.right_kg = "K2";
  for (std::int32_t i = 0; i < 6; ++i) a.add(i, i);
  c.alignments.push_back(a);
  MergeResult m = merge_aligned(c);
  CHECK(m.mapped_triplets ==
        static_cast<std::int64_t>(g1.triplets.size() + g2.triplets.size()));
  CHECK(m.merged.triplets.size() <= static_cast<std::size_t>(m.mapped_triplets));
  CHECK(m.merged.entities.size() == g1.entities.size() + g2.entities.size() - 6);
}

TEST_CASE("merging rejects alignments that name unknown entities") {
  MultiSourceCollection c = two_graphs_one_pair();
  AlignmentSet bad;
  bad.left_kg = "K1";
  bad.right_kg = "K2";
  bad.add(99, 0);
  c.alignments.push_back(bad);
  CHECK_THROWS_WITH_AS(merge_aligned(c), doctest::Contains("unknown entity"), DataError);
}

// ---- leakage removal ----------------------------------------------------------

namespace {

// Background b0..b3 aligned to target t0..t3 one-to-one; target holds out
// (t0, q, t1) as a test triplet.
struct LeakFixture {
  KnowledgeGraph background = make_kg("bg", {{"b0", "r", "b1"},    // forward leak
                                             {"b1", "r", "b0"},    // reverse-orientation leak
                                             {"b0", "u", "b1"},    // leak only in strict mode
                                             {"b2", "r", "b3"},    // harmless
                                             {"b0", "r", "b2"}});  // harmless
  KnowledgeGraph target = make_kg("tg", {{"t0", "p", "t2"}, {"t2", "p", "t1"}, {"t0", "q", "t1"}});
  DatasetSplit split;
  AlignmentSet alignment;

  LeakFixture() {
    split.train = {target.triplets[0], target.triplets[1]};
    split.test = {target.triplets[2]};
    alignment.left_kg = "bg";
    alignment.right_kg = "tg";
    for (std::int32_t i = 0; i < 3; ++i)
      alignment.add(background.entities.find("b" + std::to_string(i)).value(),
                    target.entities.find("t" + std::to_string(i)).value());
  }
};

}  // namespace

TEST_CASE("strict leakage removal deletes every matching entity pair") {
  LeakFixture fx;
  LeakageResult res = remove_leakage(fx.background, fx.split, fx.alignment);
  CHECK(res.report.deleted == 3);
  CHECK(res.kg.triplets.size() == 2);
  CHECK(res.kg.has_triplet(
      {fx.background.entities.find("b2").value(), 0, fx.background.entities.find("b3").value()}));
  for (const auto& t : res.kg.triplets) CHECK(fx.background.has_triplet(t));
  CHECK(res.kg.triplets.size() + static_cast<std::size_t>(res.report.deleted) ==
        fx.background.triplets.size());
}

TEST_CASE("a relation map narrows leakage to mapped relations") {
  LeakFixture fx;
  // Only background r corresponds to held-out q; u survives.
  std::vector<std::pair<std::int32_t, std::int32_t>> rel_map = {
      {fx.background.relations.find("r").value(), fx.target.relations.find("q").value()}};
  LeakageResult res = remove_leakage(fx.background, fx.split, fx.alignment, &rel_map);
  CHECK(res.report.deleted == 2);  // both orientations of r, but not u
  CHECK(res.kg.has_triplet(
      {fx.background.entities.find("b0").value(), fx.background.relations.find("u").value(),
       fx.background.entities.find("b1").value()}));
}

TEST_CASE("audit mode reports deletions without changing the graph") {
  LeakFixture fx;
  LeakageResult res = remove_leakage(fx.background, fx.split, fx.alignment, nullptr, true);
  CHECK(res.report.deleted == 3);
  CHECK(res.kg.triplets.size() == fx.background.triplets.size());
}

TEST_CASE("training triplets never trigger leakage removal") {
  LeakFixture fx;
  fx.split.test.clear();  // held-out set empty -> nothing to protect
  LeakageResult res = remove_leakage(fx.background, fx.split, fx.alignment);
  CHECK(res.report.deleted == 0);
  CHECK(res.kg.triplets.size() == fx.background.triplets.size());
}

TEST_CASE("leakage removal matches an exhaustive oracle on a random instance") {
  KnowledgeGraph background = random_graph(10, 2, 14, 21, "bg");
  KnowledgeGraph target = random_graph(8, 2, 10, 22, "tg");
  DatasetSplit split;
  for (std::size_t i = 0; i < target.triplets.size(); ++i)
    (i % 3 == 0 ? split.test : (i % 3 == 1 ? split.valid : split.train))
        .push_back(target.triplets[i]);
  AlignmentSet alignment;
  alignment.left_kg = "bg";
  alignment.right_kg = "tg";
  // Non-injective on purpose: background 0..5 map to target id/2.
  for (std::int32_t i = 0; i < 6; ++i) alignment.add(i, i / 2);

  for (bool strict : {true, false}) {
    std::vector<std::pair<std::int32_t, std::int32_t>> rel_map = {{0, 0}, {1, 1}};
    LeakageResult res =
        remove_leakage(background, split, alignment, strict ? nullptr : &rel_map);

    auto counterparts = [&](std::int32_t bg_e) {
      std::vector<std::int32_t> out;
      for (auto [l, r] : alignment.pairs)
        if (l == bg_e) out.push_back(r);
      return out;
    };
    auto held_matches = [&](std::int32_t sub, std::int32_t obj, std::int32_t bg_rel) {
      for (const auto* part : {&split.valid, &split.test})
        for (const auto& h : *part)
          for (std::int32_t ts : counterparts(sub))
            for (std::int32_t to : counterparts(obj)) {
              if (h.s != ts || h.o != to) continue;
              if (strict) return true;
              for (auto [br, tr] : rel_map)
                if (br == bg_rel && tr == h.r) return true;
            }
      return false;
    };
    std::int64_t expected_deleted = 0;
    std::unordered_set<Triplet, TripletHash> expected_kept;
    for (const auto& t : background.triplets) {
      bool leak = held_matches(t.s, t.o, t.r) || held_matches(t.o, t.s, t.r);
      if (leak)
        ++expected_deleted;
      else
        expected_kept.insert(t);
    }
    CHECK(res.report.deleted == expected_deleted);
    CHECK(res.kg.triplets.size() == expected_kept.size());
    for (const auto& t : res.kg.triplets) CHECK(expected_kept.contains(t));
    CHECK(expected_deleted > 0);  // the instance actually exercises deletion
  }
}

// ---- split validation ----------------------------------------------------------

TEST_CASE("split validation rejects structural violations") {
  KnowledgeGraph kg = make_kg("g", {{"a", "r", "b"}, {"b", "r", "c"}, {"c", "s", "a"}});
  DatasetSplit good;
  good.train = {kg.triplets[0], kg.triplets[2]};
  good.valid = {kg.triplets[1]};
  CHECK_NOTHROW(validate_split(kg, good));

  DatasetSplit absent = good;
  absent.valid = {{0, 1, 2}};  // (a, s, c) is not a graph triplet
  CHECK_THROWS_WITH_AS(validate_split(kg, absent), doctest::Contains("absent from the graph"),
                       DataError);

  DatasetSplit overlap = good;
  overlap.valid = good.train;
  CHECK_THROWS_WITH_AS(validate_split(kg, overlap), doctest::Contains("both train and valid"),
                       DataError);

  DatasetSplit uncovered;
  uncovered.train = {kg.triplets[0]};  // only a, b, r seen
  uncovered.valid = {kg.triplets[1]};  // c unseen
  CHECK_THROWS_WITH_AS(validate_split(kg, uncovered), doctest::Contains("entity absent from train"),
                       DataError);

  DatasetSplit no_rel;
  no_rel.train = {kg.triplets[0], kg.triplets[1]};  // relation s unseen
  no_rel.valid = {kg.triplets[2]};
  CHECK_THROWS_WITH_AS(validate_split(kg, no_rel),
                       doctest::Contains("relation absent from train"), DataError);
}

// ---- binary graph serialization -------------------------------------------------

TEST_CASE("graph directories roundtrip exactly") {
  TempDir tmp("kg-roundtrip");
  KnowledgeGraph kg = add_reverse_triplets(random_graph(25, 3, 30, 77));
  save_kg(kg, tmp.file("g"));
  KnowledgeGraph back = load_kg(tmp.file("g"));
  CHECK(back.name == kg.name);
  CHECK(back.entities.names() == kg.entities.names());
  CHECK(back.relations.names() == kg.relations.names());
  CHECK(back.triplets.size() == kg.triplets.size());
  for (std::size_t i = 0; i < kg.triplets.size(); ++i) CHECK(back.triplets[i] == kg.triplets[i]);
  CHECK(back.reverse_closed == kg.reverse_closed);
  CHECK(back.relation_is_reverse == kg.relation_is_reverse);
  save_kg(back, tmp.file("g2"));
  CHECK(testutil::read_text(tmp.file("g/triplets.bin")) ==
        testutil::read_text(tmp.file("g2/triplets.bin")));
}

TEST_CASE("a corrupted triplet file fails its checksum") {
  TempDir tmp("kg-corrupt");
  save_kg(make_kg("g", {{"a", "r", "b"}, {"b", "r", "c"}}), tmp.file("g"));
  std::string bytes = testutil::read_text(tmp.file("g/triplets.bin"));
  bytes[0] = static_cast<char>(bytes[0] ^ 0x1);
  testutil::write_text(tmp.file("g/triplets.bin"), bytes);
  CHECK_THROWS_WITH_AS(load_kg(tmp.file("g")), doctest::Contains("checksum mismatch"), DataError);
}

TEST_CASE("foreign directories are rejected as graphs") {
  TempDir tmp("kg-foreign");
  Manifest m;
  m.set("format", "something.else");
  m.set("version", "1");
  std::filesystem::create_directories(tmp.file("g"));
  save_manifest(m, tmp.file("g/manifest.txt"));
  CHECK_THROWS_WITH_AS(load_kg(tmp.file("g")), doctest::Contains("not a graph directory"),
                       DataError);
}
