#include "fieldmatch/augment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace fieldmatch {

int content_token_count(const TokenSequence& seq) {
  int w = 0;
  for (int p = 0; p < seq.real_len; ++p) {
    if (seq.is_content(p)) ++w;
  }
  return w;
}

TokenSequence token_mask(const TokenSequence& seq, double r_t, Rng& rng) {
  if (r_t < 0.0 || r_t > 1.0) throw std::invalid_argument("token_mask: ratio must lie in [0,1]");
  std::vector<int> content_positions;
  for (int p = 0; p < seq.real_len; ++p) {
    if (seq.is_content(p)) content_positions.push_back(p);
  }
  const int W = static_cast<int>(content_positions.size());
  const int M = static_cast<int>(std::floor(r_t * W));
  TokenSequence out = seq;
  const auto chosen = rng.sample_without_replacement(static_cast<std::size_t>(W),
                                                     static_cast<std::size_t>(M));
  for (std::size_t i : chosen) {
    out.token_ids[static_cast<std::size_t>(content_positions[i])] = kTokenMask;
  }
  return out;
}

TokenSequence field_mask(const TokenSequence& seq, double r_f, Rng& rng) {
  if (r_f < 0.0 || r_f > 1.0) throw std::invalid_argument("field_mask: ratio must lie in [0,1]");
  const int F = seq.n_fields;
  const int K = static_cast<int>(std::floor(r_f * F));
  const auto chosen = rng.sample_without_replacement(static_cast<std::size_t>(F),
                                                     static_cast<std::size_t>(K));
  std::vector<int> indices(chosen.begin(), chosen.end());
  std::sort(indices.begin(), indices.end());
  return collapse_fields(seq, indices);
}

namespace {

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

using TrigramVector = std::unordered_map<std::string, double>;

TrigramVector trigram_vector(const std::string& raw) {
  const std::string name = lowercase(raw);
  TrigramVector grams;
  if (name.empty()) return grams;
  if (name.size() < 3) {
    grams[name] = 1.0;
  } else {
    for (std::size_t i = 0; i + 3 <= name.size(); ++i) grams[name.substr(i, 3)] += 1.0;
  }
  double sq = 0.0;
  for (const auto& [g, c] : grams) sq += c * c;
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& [g, c] : grams) c *= inv;
  return grams;
}

double trigram_cosine(const TrigramVector& a, const TrigramVector& b) {
  if (a.empty() || b.empty()) return 0.0;
  const TrigramVector& small = a.size() <= b.size() ? a : b;
  const TrigramVector& large = a.size() <= b.size() ? b : a;
  double dot = 0.0;
  for (const auto& [g, c] : small) {
    auto it = large.find(g);
    if (it != large.end()) dot += c * it->second;
  }
  return dot;
}

std::string record_name(const CompanyRecord& c) {
  auto it = c.desc.find("name");
  return it == c.desc.end() ? std::string() : it->second;
}

}  // namespace

double name_similarity(const std::string& a, const std::string& b) {
  return trigram_cosine(trigram_vector(a), trigram_vector(b));
}

SimilarityIndex build_similarity_index(const std::vector<CompanyRecord>& companies) {
  if (companies.size() < 2) {
    throw std::invalid_argument("build_similarity_index: need at least 2 companies");
  }
  std::vector<TrigramVector> vectors;
  vectors.reserve(companies.size());
  for (const auto& c : companies) vectors.push_back(trigram_vector(record_name(c)));

  SimilarityIndex index;
  for (std::size_t i = 0; i < companies.size(); ++i) {
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(companies.size() - 1);
    for (std::size_t j = 0; j < companies.size(); ++j) {
      if (j == i) continue;
      scored.emplace_back(companies[j].id, trigram_cosine(vectors[i], vectors[j]));
    }
    const std::size_t keep = std::min<std::size_t>(5, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                      scored.end(), [](const auto& x, const auto& y) {
                        if (x.second != y.second) return x.second > y.second;
                        return x.first < y.first;
                      });
    scored.resize(keep);
    index.neighbors.emplace(companies[i].id, std::move(scored));
  }
  return index;
}

const std::string& company_replace(const std::string& company_id, const SimilarityIndex& index,
                                   Rng& rng) {
  auto it = index.neighbors.find(company_id);
  if (it == index.neighbors.end()) {
    throw std::out_of_range("company_replace: index does not cover company '" + company_id + "'");
  }
  const auto& list = it->second;
  if (list.empty()) {
    throw std::out_of_range("company_replace: no neighbors for company '" + company_id + "'");
  }
  const auto k = rng.uniform_int(0, static_cast<std::int64_t>(list.size()) - 1);
  return list[static_cast<std::size_t>(k)].first;
}

std::string augment_strategy_name(AugmentStrategy s) {
  switch (s) {
    case AugmentStrategy::token_mask: return "token_mask";
    case AugmentStrategy::field_mask: return "field_mask";
    case AugmentStrategy::company_replace: return "company_replace";
  }
  throw std::logic_error("augment_strategy_name: bad strategy");
}

Augmenter::Augmenter(GroupSpec spec, const Vocab& vocab, int max_len, double r_t, double r_f,
                     const SimilarityIndex* index,
                     const std::map<std::string, const CompanyRecord*>* companies_by_id,
                     bool use_token_mask, bool use_field_mask, bool use_company_replace)
    : spec_(std::move(spec)),
      vocab_(vocab),
      max_len_(max_len),
      r_t_(r_t),
      r_f_(r_f),
      index_(index),
      companies_(companies_by_id),
      use_token_mask_(use_token_mask),
      use_field_mask_(use_field_mask),
      use_company_replace_(use_company_replace && index != nullptr &&
                           companies_by_id != nullptr) {}

std::vector<AugmentStrategy> Augmenter::available(bool positive) const {
  std::vector<AugmentStrategy> out;
  if (use_token_mask_) out.push_back(AugmentStrategy::token_mask);
  if (use_field_mask_) out.push_back(AugmentStrategy::field_mask);
  if (positive && use_company_replace_) out.push_back(AugmentStrategy::company_replace);
  return out;
}

Augmenter::View Augmenter::apply(AugmentStrategy strategy, const SolutionRecord& solution,
                                 const CompanyRecord& company, const TokenSequence& base,
                                 Rng& rng) const {
  switch (strategy) {
    case AugmentStrategy::token_mask:
      return {token_mask(base, r_t_, rng), strategy};
    case AugmentStrategy::field_mask:
      return {field_mask(base, r_f_, rng), strategy};
    case AugmentStrategy::company_replace: {
      const std::string& replacement_id = company_replace(company.id, *index_, rng);
      auto it = companies_->find(replacement_id);
      if (it == companies_->end()) {
        throw std::out_of_range("Augmenter: replacement company '" + replacement_id +
                                "' not in the corpus");
      }
      return {assemble_sequence(spec_, solution, *it->second, vocab_, max_len_), strategy};
    }
  }
  throw std::logic_error("Augmenter::apply: bad strategy");
}

std::pair<Augmenter::View, Augmenter::View> Augmenter::views(const SolutionRecord& solution,
                                                             const CompanyRecord& company,
                                                             bool positive,
                                                             const TokenSequence& base,
                                                             Rng& rng) const {
  const auto strategies = available(positive);
  if (strategies.empty()) {
    throw std::logic_error("Augmenter: no augmentation strategies available");
  }
  AugmentStrategy first, second;
  if (strategies.size() == 1) {
    first = second = strategies[0];
  } else {
    const auto chosen = rng.sample_without_replacement(strategies.size(), 2);
    first = strategies[chosen[0]];
    second = strategies[chosen[1]];
  }
  auto v1 = apply(first, solution, company, base, rng);
  auto v2 = apply(second, solution, company, base, rng);
  return {std::move(v1), std::move(v2)};
}

}  // namespace fieldmatch
