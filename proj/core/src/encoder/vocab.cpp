#include "came/encoder/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <stdexcept>

namespace came::encoder {
namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c == '_' || c >= 0x80; }

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_word_char(c)) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (c == '-' && !cur.empty() && i + 1 < text.size() &&
               is_word_char(static_cast<unsigned char>(text[i + 1]))) {
      cur.push_back('-');
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw std::invalid_argument("Vocab: empty token at line " + std::to_string(i + 1));
    const auto [it, inserted] = ids_.emplace(tokens_[i], static_cast<TokenId>(i) + kNumReserved);
    if (!inserted) throw std::invalid_argument("Vocab: duplicate token '" + tokens_[i] + "'");
  }
}

Vocab Vocab::build(std::span<const std::string> texts) {
  std::set<std::string> seen;
  for (const auto& t : texts) {
    for (auto& w : split_words(t)) seen.insert(std::move(w));
  }
  return Vocab(std::vector<std::string>(seen.begin(), seen.end()));
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocab file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocab file " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

TokenId Vocab::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

std::string_view Vocab::token(TokenId id) const {
  switch (id) {
    case kPad: return "[PAD]";
    case kCls: return "[CLS]";
    case kUnk: return "[UNK]";
    default: break;
  }
  if (id < kNumReserved || static_cast<std::size_t>(id) >= size()) {
    throw std::out_of_range("Vocab: token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id - kNumReserved)];
}

TokenSeq tokenize(std::string_view text, std::size_t max_len, const Vocab& vocab) {
  if (max_len < 2) throw std::invalid_argument("tokenize: max_len must be at least 2");
  TokenSeq seq;
  seq.ids.push_back(kCls);
  for (const auto& w : split_words(text)) {
    if (seq.ids.size() >= max_len) break;
    seq.ids.push_back(vocab.id(w));
  }
  seq.length = seq.ids.size();
  seq.mask.assign(seq.length, 1);
  return seq;
}

TokenSeq pad_to(TokenSeq seq, std::size_t padded_length) {
  while (seq.ids.size() < padded_length) {
    seq.ids.push_back(kPad);
    seq.mask.push_back(0);
  }
  return seq;
}

}  // namespace came::encoder
