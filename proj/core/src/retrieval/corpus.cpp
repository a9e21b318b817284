#include "came/retrieval/corpus.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace came::retrieval {

void Corpus::add(std::string id, std::string text) {
  if (id.empty()) throw std::invalid_argument("corpus: empty document id");
  if (text.empty()) throw std::invalid_argument("corpus: document '" + id + "' has empty text");
  if (index_.count(id) != 0) throw std::invalid_argument("corpus: duplicate document id '" + id + "'");
  index_.emplace(id, docs_.size());
  docs_.push_back({std::move(id), std::move(text)});
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Corpus::text(std::string_view id) const {
  const auto i = find(id);
  if (!i) throw std::out_of_range("corpus: unknown document id '" + std::string(id) + "'");
  return docs_[*i].text;
}

Corpus Corpus::load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  Corpus c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      c.add(j.at("id").get<std::string>(), j.at("text").get<std::string>());
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

std::string Corpus::to_jsonl() const {
  std::string out;
  for (const Document& d : docs_) {
    nlohmann::ordered_json j;
    j["id"] = d.id;
    j["text"] = d.text;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Query> load_queries_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open queries " + path.string());
  std::vector<Query> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected qid<TAB>text");
    }
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

std::string queries_to_tsv(const std::vector<Query>& queries) {
  std::string out;
  for (const Query& q : queries) out += q.id + '\t' + q.text + '\n';
  return out;
}

}  // namespace came::retrieval
