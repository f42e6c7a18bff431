#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <future>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "kgt/kg.hpp"
#include "kgt/nn.hpp"
#include "kgt/tape.hpp"

namespace kgt {

struct LinkQuery {
  std::int32_t subject = 0;
  std::int32_t relation = 0;
  std::int32_t gold = 0;
};

struct MetricsReport {
  std::string setting;  // lp | joint-lp | pr4lp (free-form tag)
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits10 = 0.0;
  double mean_candidates = 0.0;  // after filtering
  std::vector<std::int64_t> ranks;
  std::size_t query_count = 0;
};

// Rank of the gold candidate among the unfiltered ones: one plus the count of
// strictly higher scores, with the gold placed at the ceiling of the mean
// position of its tie group. `excluded[i]` drops candidate i; the gold entry
// is never excluded.
inline std::int64_t rank_from_scores(const std::vector<double>& scores, std::size_t gold,
                                     const std::vector<char>& excluded) {
  double g = scores[gold];
  std::int64_t higher = 0, ties = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == gold || excluded[i]) continue;
    if (scores[i] > g)
      ++higher;
    else if (scores[i] == g)
      ++ties;
  }
  return higher + 1 + (ties + 1) / 2;
}

// (s, r, o) -> for each direction a query whose answer set is read off the
// filter graph: known triplets other than the gold leave the candidate list.
inline std::uint64_t pair_key(std::int32_t s, std::int32_t r) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)) << 32) |
         static_cast<std::uint32_t>(r);
}

using FilterIndex = std::unordered_map<std::uint64_t, std::vector<std::int32_t>>;

inline FilterIndex build_filter_index(const std::vector<const std::vector<Triplet>*>& parts) {
  FilterIndex index;
  for (const auto* triplets : parts)
    for (const auto& t : *triplets) index[pair_key(t.s, t.r)].push_back(t.o);
  return index;
}

namespace detail {

template <typename S>
void rank_queries(const EncoderConfig& encoder, const ParameterSet<S>& params,
                  const std::vector<LinkQuery>& queries, std::size_t begin, std::size_t end,
                  const FilterIndex& filter, std::int32_t cand_begin, std::int32_t cand_end,
                  std::int64_t* ranks_out, std::int64_t* candidates_out) {
  if (begin >= end) return;
  std::vector<std::int32_t> subjects, relations;
  subjects.reserve(end - begin);
  relations.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    subjects.push_back(queries[i].subject);
    relations.push_back(queries[i].relation);
  }
  Tape<S> tape;
  ParamBinding<S> binding(tape, params, false);
  Var<S> ctx = encode_query_contexts(tape, binding, encoder, subjects, relations);
  Eigen::Index m = cand_end - cand_begin;
  typename Tape<S>::Mat scores =
      ctx.val() * params.at("entity_embeddings").middleRows(cand_begin, m).transpose();

  std::vector<double> row(static_cast<std::size_t>(m));
  std::vector<char> excluded(static_cast<std::size_t>(m));
  for (std::size_t i = begin; i < end; ++i) {
    const LinkQuery& q = queries[i];
    if (q.gold < cand_begin || q.gold >= cand_end)
      throw DataError("evaluation: gold entity outside the candidate range");
    auto gold = static_cast<std::size_t>(q.gold - cand_begin);
    auto r = static_cast<Eigen::Index>(i - begin);
    for (Eigen::Index c = 0; c < m; ++c)
      row[static_cast<std::size_t>(c)] = static_cast<double>(scores(r, c));
    std::fill(excluded.begin(), excluded.end(), 0);
    std::int64_t kept = m;
    auto it = filter.find(pair_key(q.subject, q.relation));
    if (it != filter.end()) {
      for (std::int32_t o : it->second) {
        if (o == q.gold || o < cand_begin || o >= cand_end) continue;
        auto idx = static_cast<std::size_t>(o - cand_begin);
        if (!excluded[idx]) {
          excluded[idx] = 1;
          --kept;
        }
      }
    }
    ranks_out[i] = rank_from_scores(row, gold, excluded);
    candidates_out[i] = kept;
  }
}

}  // namespace detail

inline MetricsReport report_from_ranks(std::vector<std::int64_t> ranks,
                                       const std::vector<std::int64_t>& candidates,
                                       const std::string& setting) {
  MetricsReport rep;
  rep.setting = setting;
  rep.query_count = ranks.size();
  double mrr = 0.0, h1 = 0.0, h10 = 0.0, cand = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    mrr += 1.0 / static_cast<double>(ranks[i]);
    h1 += ranks[i] <= 1 ? 1.0 : 0.0;
    h10 += ranks[i] <= 10 ? 1.0 : 0.0;
    cand += static_cast<double>(candidates[i]);
  }
  auto n = static_cast<double>(ranks.size());
  rep.mrr = mrr / n;
  rep.hits1 = h1 / n;
  rep.hits10 = h10 / n;
  rep.mean_candidates = cand / n;
  rep.ranks = std::move(ranks);
  return rep;
}

// Filtered link prediction over both directions: each triplet asks (s, r, ?)
// and (o, r[reverse], ?). Candidates are the contiguous entity-id range
// [cand_begin, cand_end); the filter graph must be reverse-closed and share
// the model's ids. Threading splits queries into chunks; results are merged
// by index, so the report is identical for any thread count.
template <typename S>
MetricsReport evaluate(const EncoderConfig& encoder, const ParameterSet<S>& params,
                       const std::vector<Triplet>& triplets, const KnowledgeGraph& filter_kg,
                       std::int32_t cand_begin, std::int32_t cand_end, const std::string& setting,
                       int threads = 1) {
  if (triplets.empty()) throw DataError("evaluation: empty query split");
  if (cand_end <= cand_begin) throw DataError("evaluation: empty candidate range");
  std::vector<LinkQuery> queries;
  queries.reserve(triplets.size() * 2);
  for (const auto& t : triplets) {
    queries.push_back({t.s, t.r, t.o});
    queries.push_back({t.o, filter_kg.reverse_relation(t.r), t.s});
  }
  FilterIndex filter = build_filter_index({&filter_kg.triplets});

  std::vector<std::int64_t> ranks(queries.size()), kept(queries.size());
  int workers = std::max(1, threads);
  if (workers == 1) {
    detail::rank_queries(encoder, params, queries, 0, queries.size(), filter, cand_begin,
                         cand_end, ranks.data(), kept.data());
  } else {
    std::size_t chunk = (queries.size() + static_cast<std::size_t>(workers) - 1) /
                        static_cast<std::size_t>(workers);
    std::vector<std::future<void>> futs;
    for (std::size_t b = 0; b < queries.size(); b += chunk) {
      std::size_t e = std::min(queries.size(), b + chunk);
      futs.push_back(std::async(std::launch::async, [&, b, e] {
        detail::rank_queries(encoder, params, queries, b, e, filter, cand_begin, cand_end,
                             ranks.data(), kept.data());
      }));
    }
    for (auto& f : futs) f.get();
  }
  return report_from_ranks(std::move(ranks), kept, setting);
}

inline void write_metrics(const MetricsReport& rep, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  char buf[64];
  out << "setting " << rep.setting << '\n';
  out << "queries " << rep.query_count << '\n';
  std::snprintf(buf, sizeof buf, "%.12g", rep.mrr);
  out << "mrr " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.12g", rep.hits1);
  out << "hits1 " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.12g", rep.hits10);
  out << "hits10 " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.12g", rep.mean_candidates);
  out << "mean_candidates " << buf << '\n';
}

inline void write_ranks(const MetricsReport& rep, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << "query\trank\n";
  for (std::size_t i = 0; i < rep.ranks.size(); ++i) out << i << '\t' << rep.ranks[i] << '\n';
}

struct ProjectionRow {
  std::string label;
  double x = 0.0;
  double y = 0.0;
};

// Mean-centered PCA onto the top two components. Sign convention: within each
// component, the coordinate of largest magnitude is made positive, so the
// output is deterministic across eigensolver sign choices.
inline std::vector<ProjectionRow> project_embeddings(const Eigen::MatrixXd& embeddings,
                                                     const std::vector<std::string>& labels) {
  if (embeddings.rows() < 2) throw DataError("projection needs at least two rows");
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size())
    throw DataError("projection: label count mismatch");
  Eigen::MatrixXd x = embeddings;
  if (x.cols() < 2) {
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(x.rows(), 2);
    padded.leftCols(x.cols()) = x;
    x = padded;
  }
  x.rowwise() -= x.colwise().mean();
  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::Index d = x.cols();
  Eigen::MatrixXd top(d, 2);  // eigenvalues ascend, so take the last two
  top.col(0) = eig.eigenvectors().col(d - 1);
  top.col(1) = eig.eigenvectors().col(d - 2);
  Eigen::MatrixXd coords = x * top;
  for (int j = 0; j < 2; ++j) {
    Eigen::Index imax = 0;
    coords.col(j).cwiseAbs().maxCoeff(&imax);
    if (coords(imax, j) < 0) coords.col(j) = -coords.col(j);
  }
  std::vector<ProjectionRow> rows;
  rows.reserve(labels.size());
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    rows.push_back({labels[static_cast<std::size_t>(i)], coords(i, 0), coords(i, 1)});
  return rows;
}

inline void write_projection(const std::vector<ProjectionRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << "label\tx\ty\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.label << '\t';
    std::snprintf(buf, sizeof buf, "%.12g", r.x);
    out << buf << '\t';
    std::snprintf(buf, sizeof buf, "%.12g", r.y);
    out << buf << '\n';
  }
}

}  // namespace kgt
