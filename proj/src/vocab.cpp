#include "fieldmatch/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fieldmatch {

const char* const kReservedNames[kNumReserved] = {
    "[PAD]", "[CLS]", "[SEP]", "[EOS]", "[token_mask]", "[field_mask]", "[UNK]"};

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    std::transform(tok.begin(), tok.end(), tok.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(tok);
  }
  return out;
}

Vocab::Vocab() {
  for (int i = 0; i < kNumReserved; ++i) {
    tokens_.emplace_back(kReservedNames[i]);
    index_[kReservedNames[i]] = i;
  }
}

int Vocab::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_[token] = id;
  return id;
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= static_cast<int>(tokens_.size())) {
    throw std::out_of_range("Vocab: token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(const std::string& token) const {
  return index_.find(token) != index_.end();
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> out;
  for (const auto& tok : tokenize(text)) out.push_back(id(tok));
  return out;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocab file '" + path + "'");
  for (const auto& tok : tokens_) out << tok << "\n";
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocab file '" + path + "'");
  Vocab vocab;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    if (line_no < kNumReserved) {
      if (line != kReservedNames[line_no]) {
        throw std::runtime_error("vocab file '" + path + "': line " + std::to_string(line_no) +
                                 " must be the reserved token " +
                                 std::string(kReservedNames[line_no]));
      }
    } else {
      if (vocab.contains(line)) {
        throw std::runtime_error("vocab file '" + path + "': duplicate token '" + line + "'");
      }
      vocab.add(line);
    }
    ++line_no;
  }
  if (line_no < kNumReserved) throw std::runtime_error("vocab file '" + path + "': truncated");
  return vocab;
}

Vocab build_vocab(const std::vector<std::string>& texts, int min_count) {
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  std::map<std::string, std::int64_t> counts;
  for (const auto& text : texts) {
    for (const auto& tok : tokenize(text)) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::int64_t>> entries(counts.begin(), counts.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab vocab;
  for (const auto& [tok, count] : entries) {
    if (count >= min_count) vocab.add(tok);
  }
  return vocab;
}

}  // namespace fieldmatch
