#include "came/eval/qrels.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "came/util/binary_io.hpp"

namespace came::eval {

Qrels parse_qrels(std::string_view text, std::string_view source) {
  Qrels out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string qid, iter, doc;
    long rel = 0;
    std::string extra;
    if (!(ls >> qid >> iter >> doc >> rel) || (ls >> extra)) {
      throw std::runtime_error(std::string(source) + ":" + std::to_string(lineno) + ": expected 'qid 0 docid rel'");
    }
    if (rel < 0) throw std::runtime_error(std::string(source) + ":" + std::to_string(lineno) + ": negative grade");
    out[qid][doc] = static_cast<int>(rel);
  }
  return out;
}

Qrels load_qrels(const std::filesystem::path& path) { return parse_qrels(read_file(path), path.string()); }

std::string qrels_to_string(const Qrels& qrels) {
  std::string out;
  for (const auto& [qid, docs] : qrels) {
    for (const auto& [doc, rel] : docs) out += qid + " 0 " + doc + " " + std::to_string(rel) + "\n";
  }
  return out;
}

Answers load_answers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open answers " + path.string());
  Answers out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected qid<TAB>answer");
    }
    out[line.substr(0, tab)].push_back(line.substr(tab + 1));
  }
  return out;
}

std::string answers_to_string(const Answers& answers) {
  std::string out;
  for (const auto& [qid, list] : answers) {
    for (const auto& a : list) out += qid + '\t' + a + '\n';
  }
  return out;
}

}  // namespace came::eval
