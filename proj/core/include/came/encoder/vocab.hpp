#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace came::encoder {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kCls = 1;
inline constexpr TokenId kUnk = 2;
inline constexpr TokenId kNumReserved = 3;

/// Lowercased words: maximal runs of letters, digits, '_' and non-ASCII bytes,
/// with '-' kept when it joins two such characters. Everything else separates.
std::vector<std::string> split_words(std::string_view text);

/// Token string <-> id map with reserved ids PAD=0, CLS=1, UNK=2.
class Vocab {
 public:
  Vocab() = default;
  /// Takes the non-reserved tokens in id order (id = position + 3). Throws on duplicates.
  explicit Vocab(std::vector<std::string> tokens);

  /// Sorted, deduplicated vocabulary over the words of `texts`.
  static Vocab build(std::span<const std::string> texts);

  /// One token per line; line i holds id i + 3.
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size() + kNumReserved; }
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  std::string_view token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Token ids with CLS first. PAD entries only ever form a tail.
struct TokenSeq {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;
  std::size_t length = 0;  ///< non-PAD length including CLS

  std::size_t padded_length() const { return ids.size(); }
};

/// CLS + words truncated to `max_len` total tokens; out-of-vocabulary words map
/// to UNK. Empty text yields the CLS-only sequence. Requires max_len >= 2.
TokenSeq tokenize(std::string_view text, std::size_t max_len, const Vocab& vocab);

/// Appends PAD tokens until the sequence has `padded_length` entries.
TokenSeq pad_to(TokenSeq seq, std::size_t padded_length);

}  // namespace came::encoder
