#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace fieldmatch {

// Reserved token ids, fixed in this order.
enum ReservedToken : int {
  kPad = 0,
  kCls = 1,
  kSep = 2,
  kEos = 3,
  kTokenMask = 4,
  kFieldMask = 5,
  kUnk = 6,
};
constexpr int kNumReserved = 7;

extern const char* const kReservedNames[kNumReserved];

// Whitespace tokens, lowercased.
std::vector<std::string> tokenize(const std::string& text);

class Vocab {
 public:
  Vocab();  // reserved tokens only

  // Adds a token (no-op if present). Returns its id.
  int add(const std::string& token);

  int id(const std::string& token) const;   // [UNK] id for unknown tokens
  const std::string& token(int id) const;   // throws on out-of-range ids
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  void save(const std::string& path) const;  // one token per line, line = id
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// All whitespace-lowercased tokens from the given texts with count >=
// min_count, ordered by (count desc, token asc) after the reserved block.
Vocab build_vocab(const std::vector<std::string>& texts, int min_count);

}  // namespace fieldmatch
