#include "came/retrieval/run_io.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "came/util/binary_io.hpp"

namespace came::retrieval {

namespace {

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, std::string_view source, std::size_t lineno) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error(std::string(source) + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
  }
  return v;
}

std::map<std::string, std::size_t> position_by_query(const std::vector<RankedList>& lists) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < lists.size(); ++i) pos[lists[i].query_id] = i;
  return pos;
}

}  // namespace

std::string format_run(std::span<const RankedList> lists, std::string_view tag) {
  std::string out;
  char buf[64];
  for (const auto& l : lists) {
    for (std::size_t i = 0; i < l.entries.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.6f", l.entries[i].score);
      out += l.query_id + " Q0 " + l.entries[i].doc_id + " " + std::to_string(i + 1) + " " + buf + " ";
      out += tag;
      out += '\n';
    }
  }
  return out;
}

std::vector<RankedList> parse_run(std::string_view text, std::string_view source) {
  std::vector<RankedList> lists;
  std::map<std::string, std::size_t> pos;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string qid, q0, doc, rank, score, tag, extra;
    if (!(ls >> qid >> q0 >> doc >> rank >> score >> tag) || (ls >> extra)) {
      throw std::runtime_error(std::string(source) + ":" + std::to_string(lineno) +
                               ": expected 'qid Q0 docid rank score tag'");
    }
    auto [it, fresh] = pos.try_emplace(qid, lists.size());
    if (fresh) lists.push_back(RankedList{qid, {}, 0, 0.0});
    RankedList& l = lists[it->second];
    if (std::to_string(l.entries.size() + 1) != rank) {
      throw std::runtime_error(std::string(source) + ":" + std::to_string(lineno) + ": rank " + rank +
                               " out of sequence for query " + qid);
    }
    l.entries.push_back({doc, parse_double(score, source, lineno)});
  }
  for (auto& l : lists) {
    l.k = l.entries.size();
    l.kth_score = l.entries.empty() ? 0.0 : l.entries.back().score;
  }
  return lists;
}

std::string format_kth_sidecar(std::span<const RankedList> lists) {
  std::string out;
  for (const auto& l : lists) out += l.query_id + '\t' + exact(l.kth_score) + '\n';
  return out;
}

void apply_kth_sidecar(std::vector<RankedList>& lists, std::string_view text, std::string_view source) {
  auto pos = position_by_query(lists);
  std::vector<char> seen(lists.size(), 0);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(std::string(source) + ":" + std::to_string(lineno) + ": expected qid<TAB>s_K");
    }
    auto it = pos.find(line.substr(0, tab));
    if (it == pos.end()) {
      // Empty lists leave no lines in the run file.
      it = pos.emplace(line.substr(0, tab), lists.size()).first;
      lists.push_back(RankedList{it->first, {}, 0, 0.0});
      seen.push_back(0);
    }
    lists[it->second].kth_score = parse_double(line.substr(tab + 1), source, lineno);
    seen[it->second] = 1;
  }
  for (std::size_t i = 0; i < lists.size(); ++i) {
    if (seen[i] == 0) throw std::runtime_error(std::string(source) + ": no K-th score for query " + lists[i].query_id);
  }
}

std::string format_exact_scores(std::span<const RankedList> lists) {
  std::string out;
  for (const auto& l : lists) {
    for (const auto& d : l.entries) out += l.query_id + '\t' + d.doc_id + '\t' + exact(d.score) + '\n';
  }
  return out;
}

void apply_exact_scores(std::vector<RankedList>& lists, std::string_view text, std::string_view source) {
  const auto pos = position_by_query(lists);
  std::map<std::string, std::size_t> cursor;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw std::runtime_error(std::string(source) + ":" + std::to_string(lineno) + ": expected qid<TAB>docid<TAB>score");
    }
    const std::string qid = line.substr(0, t1);
    const auto it = pos.find(qid);
    if (it == pos.end()) throw std::runtime_error(std::string(source) + ": query " + qid + " not in the run file");
    RankedList& l = lists[it->second];
    std::size_t& c = cursor[qid];
    if (c >= l.entries.size() || l.entries[c].doc_id != line.substr(t1 + 1, t2 - t1 - 1)) {
      throw std::runtime_error(std::string(source) + ":" + std::to_string(lineno) + ": does not match the run file");
    }
    l.entries[c++].score = parse_double(line.substr(t2 + 1), source, lineno);
  }
  for (auto& l : lists) {
    if (cursor[l.query_id] != l.entries.size()) {
      throw std::runtime_error(std::string(source) + ": missing scores for query " + l.query_id);
    }
  }
}

std::string run_tag(std::string_view what, std::string_view hash8) {
  return "CAME-" + std::string(what) + "-" + std::string(hash8);
}

std::filesystem::path kth_sidecar_path(const std::filesystem::path& run) {
  auto p = run;
  p += ".sk.tsv";
  return p;
}

std::filesystem::path exact_scores_path(const std::filesystem::path& run) {
  auto p = run;
  p += ".scores.tsv";
  return p;
}

void write_run_files(const std::filesystem::path& run, std::span<const RankedList> lists, std::string_view tag) {
  write_file_atomic(run, format_run(lists, tag));
  write_file_atomic(kth_sidecar_path(run), format_kth_sidecar(lists));
  write_file_atomic(exact_scores_path(run), format_exact_scores(lists));
}

std::vector<RankedList> read_run_files(const std::filesystem::path& run) {
  auto lists = parse_run(read_file(run), run.string());
  if (const auto sc = exact_scores_path(run); std::filesystem::exists(sc)) {
    apply_exact_scores(lists, read_file(sc), sc.string());
  }
  if (const auto sk = kth_sidecar_path(run); std::filesystem::exists(sk)) {
    apply_kth_sidecar(lists, read_file(sk), sk.string());
  }
  return lists;
}

}  // namespace came::retrieval
