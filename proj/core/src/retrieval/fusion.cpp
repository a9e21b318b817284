#include "came/retrieval/fusion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace came::retrieval {

std::string_view to_string(FusionMethod m) {
  switch (m) {
    case FusionMethod::kSum: return "sum";
    case FusionMethod::kNormSum: return "normsum";
    case FusionMethod::kNormMax: return "normmax";
    case FusionMethod::kSumRR: return "sumrr";
    case FusionMethod::kMaxRR: return "maxrr";
    case FusionMethod::kLinear: return "linear";
  }
  throw std::invalid_argument("unknown fusion method");
}

FusionMethod parse_fusion_method(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto m : {FusionMethod::kSum, FusionMethod::kNormSum, FusionMethod::kNormMax, FusionMethod::kSumRR,
                 FusionMethod::kMaxRR, FusionMethod::kLinear}) {
    if (to_string(m) == lower) return m;
  }
  if (lower == "linearlayer") return FusionMethod::kLinear;
  throw std::invalid_argument("unknown fusion method '" + std::string(name) +
                              "' (expected sum, normsum, normmax, sumrr, maxrr or linear)");
}

namespace {

// Candidate pool: doc id -> per-expert position in the list (or -1).
using Pool = std::map<std::string, std::array<long, kNumExperts>>;

Pool pool_of(const ExpertLists& lists) {
  const std::string& qid = lists[0].query_id;
  for (const auto& l : lists) {
    if (l.query_id != qid) {
      throw std::invalid_argument("fusion: lists for different queries ('" + qid + "' vs '" + l.query_id + "')");
    }
  }
  Pool pool;
  for (std::size_t e = 0; e < kNumExperts; ++e) {
    for (std::size_t r = 0; r < lists[e].entries.size(); ++r) {
      auto [it, fresh] = pool.try_emplace(lists[e].entries[r].doc_id);
      if (fresh) it->second.fill(-1);
      it->second[e] = static_cast<long>(r);
    }
  }
  return pool;
}

double raw_or_fallback(const RankedList& l, long pos) {
  return pos >= 0 ? l.entries[static_cast<std::size_t>(pos)].score : l.kth_score;
}

}  // namespace

RankedList fuse_sum(const ExpertLists& lists, std::size_t k) { return fuse(FusionMethod::kSum, lists, k); }

RankedList fuse(FusionMethod method, const ExpertLists& lists, std::size_t k,
                const std::optional<FusionWeights>& weights) {
  if (method == FusionMethod::kLinear && !weights) throw std::invalid_argument("fusion: linear fusion needs weights");
  const Pool pool = pool_of(lists);

  std::array<double, kNumExperts> lo{}, hi{};
  for (std::size_t e = 0; e < kNumExperts; ++e) {
    if (lists[e].entries.empty()) continue;
    lo[e] = hi[e] = lists[e].entries.front().score;
    for (const auto& d : lists[e].entries) {
      lo[e] = std::min(lo[e], d.score);
      hi[e] = std::max(hi[e], d.score);
    }
  }

  std::vector<ScoredDoc> fused;
  fused.reserve(pool.size());
  for (const auto& [doc, pos] : pool) {
    double s = 0.0;
    for (std::size_t e = 0; e < kNumExperts; ++e) {
      const RankedList& l = lists[e];
      double c = 0.0;
      switch (method) {
        case FusionMethod::kSum: c = raw_or_fallback(l, pos[e]); break;
        case FusionMethod::kLinear: c = (*weights)[e] * raw_or_fallback(l, pos[e]); break;
        case FusionMethod::kNormSum:
        case FusionMethod::kNormMax:
          if (pos[e] >= 0) {
            const double v = l.entries[static_cast<std::size_t>(pos[e])].score;
            c = hi[e] > lo[e] ? (v - lo[e]) / (hi[e] - lo[e]) : 0.5;
          }
          break;
        case FusionMethod::kSumRR:
        case FusionMethod::kMaxRR:
          if (pos[e] >= 0) c = 1.0 / static_cast<double>(pos[e] + 1);
          break;
      }
      const bool take_max = method == FusionMethod::kNormMax || method == FusionMethod::kMaxRR;
      s = take_max ? (e == 0 ? c : std::max(s, c)) : s + c;
    }
    fused.push_back({doc, s});
  }
  return make_ranked_list(lists[0].query_id, std::move(fused), k);
}

FusionWeights fit_linear_fusion(std::span<const ExpertLists> dev, const eval::Qrels& qrels) {
  // Per query: candidate fallback-filled scores, doc ids, and relevance flags.
  struct Prepared {
    std::vector<std::array<double, kNumExperts>> values;
    std::vector<std::string> ids;
    std::vector<char> relevant;
  };
  std::vector<Prepared> prepared;
  for (const ExpertLists& lists : dev) {
    const auto rel = qrels.find(lists[0].query_id);
    if (rel == qrels.end()) continue;
    Prepared p;
    const Pool pool = pool_of(lists);
    bool any = false;
    for (const auto& [doc, pos] : pool) {
      std::array<double, kNumExperts> v{};
      for (std::size_t e = 0; e < kNumExperts; ++e) v[e] = raw_or_fallback(lists[e], pos[e]);
      p.values.push_back(v);
      p.ids.push_back(doc);
      const auto g = rel->second.find(doc);
      const bool is_rel = g != rel->second.end() && g->second > 0;
      p.relevant.push_back(is_rel ? 1 : 0);
      any = any || is_rel;
    }
    if (any) prepared.push_back(std::move(p));
  }
  if (prepared.empty()) throw std::invalid_argument("fit_linear_fusion: no dev query has relevance labels");

  constexpr int kSteps = 100;
  FusionWeights best{1.0 / 3, 1.0 / 3, 1.0 / 3};
  double best_mrr = -1.0, best_dist = 0.0;
  std::vector<double> fused;
  for (int a = 0; a <= kSteps; ++a) {
    for (int b = 0; a + b <= kSteps; ++b) {
      const FusionWeights w{a / static_cast<double>(kSteps), b / static_cast<double>(kSteps),
                            (kSteps - a - b) / static_cast<double>(kSteps)};
      double mrr = 0.0;
      for (const Prepared& p : prepared) {
        fused.resize(p.values.size());
        long top = -1;
        for (std::size_t i = 0; i < p.values.size(); ++i) {
          double s = 0.0;
          for (std::size_t e = 0; e < kNumExperts; ++e) s += w[e] * p.values[i][e];
          fused[i] = s;
          if (p.relevant[i] != 0) {
            const auto t = static_cast<std::size_t>(top);
            if (top < 0 || s > fused[t] || (s == fused[t] && p.ids[i] < p.ids[t])) top = static_cast<long>(i);
          }
        }
        if (top < 0) continue;
        const auto t = static_cast<std::size_t>(top);
        std::size_t rank = 1;
        for (std::size_t i = 0; i < fused.size() && rank <= 10; ++i) {
          if (fused[i] > fused[t] || (fused[i] == fused[t] && p.ids[i] < p.ids[t])) ++rank;
        }
        if (rank <= 10) mrr += 1.0 / static_cast<double>(rank);
      }
      mrr /= static_cast<double>(prepared.size());
      double dist = 0.0;
      for (double x : w) dist += (x - 1.0 / 3) * (x - 1.0 / 3);
      if (mrr > best_mrr || (mrr == best_mrr && dist < best_dist)) {
        best_mrr = mrr;
        best_dist = dist;
        best = w;
      }
    }
  }
  return best;
}

}  // namespace came::retrieval
