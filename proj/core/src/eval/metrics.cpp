#include "came/eval/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_set>

namespace came::eval {

namespace {

const std::map<std::string, int>* judged(const Qrels& qrels, const std::string& qid) {
  const auto it = qrels.find(qid);
  return it == qrels.end() ? nullptr : &it->second;
}

std::size_t num_relevant(const std::map<std::string, int>& rels) {
  std::size_t n = 0;
  for (const auto& [doc, g] : rels) n += g > 0 ? 1 : 0;
  return n;
}

int grade(const std::map<std::string, int>& rels, const std::string& doc) {
  const auto it = rels.find(doc);
  return it == rels.end() ? 0 : it->second;
}

void finish(MetricReport& r) {
  double s = 0.0;
  for (const auto& [q, v] : r.per_query) s += v;
  r.mean = r.per_query.empty() ? 0.0 : s / static_cast<double>(r.per_query.size());
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

MetricReport mrr_at_k(std::span<const RankedList> run, const Qrels& qrels, std::size_t k) {
  if (k == 0) throw std::invalid_argument("mrr: k must be positive");
  MetricReport r{"mrr", k, {}, 0.0, {}};
  for (const RankedList& l : run) {
    const auto* rels = judged(qrels, l.query_id);
    if (rels == nullptr || num_relevant(*rels) == 0) {
      r.warnings.push_back(l.query_id + ": no relevance judgments, excluded");
      continue;
    }
    double v = 0.0;
    for (std::size_t i = 0; i < l.entries.size() && i < k; ++i) {
      if (grade(*rels, l.entries[i].doc_id) > 0) {
        v = 1.0 / static_cast<double>(i + 1);
        break;
      }
    }
    r.per_query.emplace_back(l.query_id, v);
  }
  finish(r);
  return r;
}

MetricReport recall_at_k(std::span<const RankedList> run, const Qrels& qrels, std::size_t k) {
  if (k == 0) throw std::invalid_argument("recall: k must be positive");
  MetricReport r{"recall", k, {}, 0.0, {}};
  for (const RankedList& l : run) {
    const auto* rels = judged(qrels, l.query_id);
    const std::size_t nrel = rels == nullptr ? 0 : num_relevant(*rels);
    if (nrel == 0) {
      r.warnings.push_back(l.query_id + ": no relevant documents, excluded");
      continue;
    }
    std::size_t found = 0;
    for (std::size_t i = 0; i < l.entries.size() && i < k; ++i) found += grade(*rels, l.entries[i].doc_id) > 0 ? 1 : 0;
    r.per_query.emplace_back(l.query_id, static_cast<double>(found) / static_cast<double>(nrel));
  }
  finish(r);
  return r;
}

MetricReport ndcg_at_k(std::span<const RankedList> run, const Qrels& qrels, std::size_t k) {
  if (k == 0) throw std::invalid_argument("ndcg: k must be positive");
  MetricReport r{"ndcg", k, {}, 0.0, {}};
  const auto gain = [](int g) { return std::exp2(static_cast<double>(g)) - 1.0; };
  const auto discount = [](std::size_t rank) { return std::log2(static_cast<double>(rank) + 1.0); };
  for (const RankedList& l : run) {
    const auto* rels = judged(qrels, l.query_id);
    std::vector<int> ideal;
    if (rels != nullptr) {
      for (const auto& [doc, g] : *rels) {
        if (g > 0) ideal.push_back(g);
      }
    }
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < ideal.size() && i < k; ++i) idcg += gain(ideal[i]) / discount(i + 1);
    if (idcg == 0.0) {
      r.warnings.push_back(l.query_id + ": zero ideal DCG, excluded");
      continue;
    }
    double dcg = 0.0;
    for (std::size_t i = 0; i < l.entries.size() && i < k; ++i) {
      dcg += gain(grade(*rels, l.entries[i].doc_id)) / discount(i + 1);
    }
    r.per_query.emplace_back(l.query_id, dcg / idcg);
  }
  finish(r);
  return r;
}

MetricReport top_n_hit(std::span<const RankedList> run, const Answers& answers, const retrieval::Corpus& corpus,
                       std::size_t n) {
  if (n == 0) throw std::invalid_argument("top-n: n must be positive");
  MetricReport r{"top", n, {}, 0.0, {}};
  for (const RankedList& l : run) {
    const auto it = answers.find(l.query_id);
    if (it == answers.end() || it->second.empty()) {
      r.warnings.push_back(l.query_id + ": no answers, excluded");
      continue;
    }
    std::vector<std::string> needles;
    for (const auto& a : it->second) needles.push_back(lower(a));
    double v = 0.0;
    for (std::size_t i = 0; i < l.entries.size() && i < n && v == 0.0; ++i) {
      const std::string hay = lower(corpus.text(l.entries[i].doc_id));
      for (const auto& needle : needles) {
        if (hay.find(needle) != std::string::npos) {
          v = 1.0;
          break;
        }
      }
    }
    r.per_query.emplace_back(l.query_id, v);
  }
  finish(r);
  return r;
}

double rbo(std::span<const std::string> a, std::span<const std::string> b, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("rbo: p must lie in (0, 1)");
  if (a.empty() || b.empty()) return 0.0;
  const auto shorter = a.size() <= b.size() ? a : b;
  const auto longer = a.size() <= b.size() ? b : a;
  const std::size_t s = shorter.size(), l = longer.size();

  std::unordered_set<std::string_view> seen_s, seen_l;
  double overlap = 0.0, x_s = 0.0;
  double sum = 0.0, pd = 1.0;
  for (std::size_t d = 1; d <= l; ++d) {
    pd *= p;
    const std::string_view from_l = longer[d - 1];
    if (d <= s) {
      const std::string_view from_s = shorter[d - 1];
      if (from_s == from_l) {
        overlap += 1.0;
      } else {
        overlap += (seen_l.count(from_s) ? 1.0 : 0.0) + (seen_s.count(from_l) ? 1.0 : 0.0);
      }
      seen_s.insert(from_s);
      seen_l.insert(from_l);
      if (d == s) x_s = overlap;
    } else {
      overlap += seen_s.count(from_l) ? 1.0 : 0.0;
      seen_l.insert(from_l);
      const double dd = static_cast<double>(d);
      sum += x_s * (dd - static_cast<double>(s)) / (static_cast<double>(s) * dd) * pd;
    }
    sum += overlap / static_cast<double>(d) * pd;
  }
  const double x_l = overlap;
  const double tail = ((x_l - x_s) / static_cast<double>(l) + x_s / static_cast<double>(s)) * pd;
  return (1.0 - p) / p * sum + tail;
}

std::vector<std::string> doc_ids(const RankedList& list, std::size_t depth) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < list.entries.size() && i < depth; ++i) out.push_back(list.entries[i].doc_id);
  return out;
}

std::string reports_to_csv(std::span<const MetricReport> reports, bool per_query) {
  std::string out = "metric,cutoff,qid,value\n";
  char buf[64];
  for (const auto& r : reports) {
    if (per_query) {
      for (const auto& [q, v] : r.per_query) {
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        out += r.metric + "," + std::to_string(r.cutoff) + "," + q + "," + buf + "\n";
      }
    }
    std::snprintf(buf, sizeof(buf), "%.6f", r.mean);
    out += r.metric + "," + std::to_string(r.cutoff) + ",all," + buf + "\n";
  }
  return out;
}

std::string reports_to_table(std::span<const MetricReport> reports) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-12s %8s %8s\n", "metric", "queries", "mean");
  out += buf;
  for (const auto& r : reports) {
    const std::string name = r.metric + "@" + std::to_string(r.cutoff);
    std::snprintf(buf, sizeof(buf), "%-12s %8zu %8.4f\n", name.c_str(), r.per_query.size(), r.mean);
    out += buf;
  }
  return out;
}

}  // namespace came::eval
