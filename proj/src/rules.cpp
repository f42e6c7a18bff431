#include "kgt/rules.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

namespace kgt {

namespace {

using PairKey = std::uint64_t;
inline PairKey pk(std::int32_t a, std::int32_t b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

struct RelationIndex {
  std::unordered_set<PairKey> pairs;                                  // distinct (s,o)
  std::map<std::int32_t, std::vector<std::int32_t>> by_subject;       // s -> objects
  std::map<std::int32_t, std::vector<std::int32_t>> by_object;        // o -> subjects
};

// Distinct (X,Y) pairs produced by joining two endpoint maps on the middle
// variable: out = { (x, y) : x in left[z], y in right[z] }.
void join_pairs(const std::map<std::int32_t, std::vector<std::int32_t>>& left,
                const std::map<std::int32_t, std::vector<std::int32_t>>& right,
                std::unordered_set<PairKey>& out) {
  out.clear();
  for (const auto& [z, xs] : left) {
    auto it = right.find(z);
    if (it == right.end()) continue;
    for (std::int32_t x : xs)
      for (std::int32_t y : it->second) out.insert(pk(x, y));
  }
}

}  // namespace

std::string rule_namespace(const std::string& relation_label) {
  auto pos = relation_label.find(':');
  return pos == std::string::npos ? std::string() : relation_label.substr(0, pos);
}

std::vector<Rule> mine_rules(const KnowledgeGraph& joint, const RuleMinerConfig& config) {
  if (joint.triplets.empty()) throw DataError("mine_rules: the graph has no triplets");
  if (config.min_support < 1) throw ConfigError("min_support must be positive");
  if (config.min_confidence < 0 || config.min_confidence > 1)
    throw ConfigError("min_confidence must lie in [0, 1]");
  if (config.max_body != 1 && config.max_body != 2)
    throw ConfigError("max_body must be 1 or 2");

  std::int32_t nr = joint.relations.size();
  std::vector<RelationIndex> idx(static_cast<std::size_t>(nr));
  for (const auto& t : joint.triplets) {
    auto& ri = idx[static_cast<std::size_t>(t.r)];
    if (ri.pairs.insert(pk(t.s, t.o)).second) {
      ri.by_subject[t.s].push_back(t.o);
      ri.by_object[t.o].push_back(t.s);
    }
  }
  std::vector<std::string> ns(static_cast<std::size_t>(nr));
  for (std::int32_t r = 0; r < nr; ++r) ns[static_cast<std::size_t>(r)] = rule_namespace(joint.relations.name(r));

  std::vector<Rule> rules;
  auto emit = [&](std::int32_t head, RuleShape shape, std::int32_t b1, std::int32_t b2,
                  const std::unordered_set<PairKey>& body_pairs) {
    if (body_pairs.empty()) return;
    const auto& head_pairs = idx[static_cast<std::size_t>(head)].pairs;
    std::int64_t support = 0;
    const auto& small = head_pairs.size() < body_pairs.size() ? head_pairs : body_pairs;
    const auto& large = head_pairs.size() < body_pairs.size() ? body_pairs : head_pairs;
    for (PairKey k : small)
      if (large.contains(k)) ++support;
    if (support < config.min_support) return;
    double conf = static_cast<double>(support) / static_cast<double>(body_pairs.size());
    if (conf < config.min_confidence) return;
    rules.push_back({head, shape, b1, b2, support, static_cast<std::int64_t>(body_pairs.size()), conf});
  };

  // 1-hop bodies.
  std::unordered_set<PairKey> body;
  for (std::int32_t b = 0; b < nr; ++b) {
    if (idx[static_cast<std::size_t>(b)].pairs.empty()) continue;
    std::unordered_set<PairKey> transposed;
    for (PairKey k : idx[static_cast<std::size_t>(b)].pairs)
      transposed.insert(pk(static_cast<std::int32_t>(k & 0xffffffffULL),
                           static_cast<std::int32_t>(k >> 32)));
    for (std::int32_t h = 0; h < nr; ++h) {
      if (ns[static_cast<std::size_t>(h)] == ns[static_cast<std::size_t>(b)]) continue;
      emit(h, RuleShape::direct, b, -1, idx[static_cast<std::size_t>(b)].pairs);
      emit(h, RuleShape::inverse, b, -1, transposed);
    }
  }

  // 2-hop bodies: both atoms share a namespace different from the head's.
  for (std::int32_t b1 = 0; config.max_body >= 2 && b1 < nr; ++b1) {
    if (idx[static_cast<std::size_t>(b1)].pairs.empty()) continue;
    for (std::int32_t b2 = 0; b2 < nr; ++b2) {
      if (idx[static_cast<std::size_t>(b2)].pairs.empty()) continue;
      if (ns[static_cast<std::size_t>(b1)] != ns[static_cast<std::size_t>(b2)]) continue;
      const auto& i1 = idx[static_cast<std::size_t>(b1)];
      const auto& i2 = idx[static_cast<std::size_t>(b2)];
      for (auto [shape, left, right] :
           {std::tuple{RuleShape::chain, &i1.by_object, &i2.by_subject},
            std::tuple{RuleShape::inverse_chain, &i1.by_subject, &i2.by_object},
            std::tuple{RuleShape::common_parent, &i1.by_subject, &i2.by_subject},
            std::tuple{RuleShape::common_child, &i1.by_object, &i2.by_object}}) {
        join_pairs(*left, *right, body);
        for (std::int32_t h = 0; h < nr; ++h) {
          if (ns[static_cast<std::size_t>(h)] == ns[static_cast<std::size_t>(b1)]) continue;
          emit(h, shape, b1, b2, body);
        }
      }
    }
  }

  std::sort(rules.begin(), rules.end(), [&](const Rule& a, const Rule& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.support != b.support) return a.support > b.support;
    return format_rule(a, joint) < format_rule(b, joint);
  });
  return rules;
}

std::string format_rule(const Rule& rule, const KnowledgeGraph& joint) {
  const std::string& h = joint.relations.name(rule.head);
  const std::string& b1 = joint.relations.name(rule.body1);
  std::string body;
  switch (rule.shape) {
    case RuleShape::direct: body = b1 + "(X,Y)"; break;
    case RuleShape::inverse: body = b1 + "(Y,X)"; break;
    case RuleShape::chain:
      body = b1 + "(X,Z) ^ " + joint.relations.name(rule.body2) + "(Z,Y)";
      break;
    case RuleShape::inverse_chain:
      body = b1 + "(Z,X) ^ " + joint.relations.name(rule.body2) + "(Y,Z)";
      break;
    case RuleShape::common_parent:
      body = b1 + "(Z,X) ^ " + joint.relations.name(rule.body2) + "(Z,Y)";
      break;
    case RuleShape::common_child:
      body = b1 + "(X,Z) ^ " + joint.relations.name(rule.body2) + "(Y,Z)";
      break;
  }
  return h + "(X,Y) <= " + body;
}

void write_rule_report(const std::vector<Rule>& rules, const KnowledgeGraph& joint,
                       const std::string& path, bool tsv) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  if (tsv) {
    out << "rule\tconfidence\tsupport\tbody_support\n";
    for (const auto& r : rules) {
      char conf[32];
      std::snprintf(conf, sizeof(conf), "%.12g", r.confidence);
      out << format_rule(r, joint) << '\t' << conf << '\t' << r.support << '\t'
          << r.body_support << '\n';
    }
    return;
  }
  std::size_t width = 4;
  for (const auto& r : rules) width = std::max(width, format_rule(r, joint).size());
  for (const auto& r : rules) {
    std::string f = format_rule(r, joint);
    f.resize(width, ' ');
    char line[64];
    std::snprintf(line, sizeof(line), "  conf=%.2f support=%lld body=%lld", r.confidence,
                  static_cast<long long>(r.support), static_cast<long long>(r.body_support));
    out << f << line << '\n';
  }
}

}  // namespace kgt
