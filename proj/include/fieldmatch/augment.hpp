#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fieldmatch/rng.hpp"
#include "fieldmatch/schema.hpp"
#include "fieldmatch/sequence.hpp"
#include "fieldmatch/vocab.hpp"

namespace fieldmatch {

// Replaces exactly floor(r_t * W) content tokens with [token_mask], where W
// counts content tokens only (structural [CLS]/[SEP]/[EOS]/[PAD] and mask
// tokens excluded). Positions are uniform without replacement; field ids are
// untouched.
TokenSequence token_mask(const TokenSequence& seq, double r_t, Rng& rng);

// Collapses exactly floor(r_f * F) uniformly chosen fields to [field_mask].
TokenSequence field_mask(const TokenSequence& seq, double r_f, Rng& rng);

// Count of maskable content tokens (the W above).
int content_token_count(const TokenSequence& seq);

// Top-5 most name-similar companies per company, self excluded, sorted by
// (similarity desc, id asc). Similarity is the cosine of L2-normalized
// character-trigram count vectors of the lowercased names (whole-string gram
// for names shorter than 3 characters; empty names match nothing).
struct SimilarityIndex {
  std::map<std::string, std::vector<std::pair<std::string, double>>> neighbors;
};

SimilarityIndex build_similarity_index(const std::vector<CompanyRecord>& companies);

double name_similarity(const std::string& a, const std::string& b);

// Uniform draw from the company's neighbor list; errors if the index does
// not cover the company or the list is empty.
const std::string& company_replace(const std::string& company_id, const SimilarityIndex& index,
                                   Rng& rng);

enum class AugmentStrategy { token_mask, field_mask, company_replace };

std::string augment_strategy_name(AugmentStrategy s);

// Produces the two augmented views of a pair for contrastive pretraining.
// Two distinct strategies are drawn uniformly without replacement from the
// available set ({token_mask, field_mask}, plus company_replace for positive
// pairs); when ablations leave a single strategy it is applied to both views
// independently.
class Augmenter {
 public:
  Augmenter(GroupSpec spec, const Vocab& vocab, int max_len, double r_t, double r_f,
            const SimilarityIndex* index,
            const std::map<std::string, const CompanyRecord*>* companies_by_id,
            bool use_token_mask = true, bool use_field_mask = true,
            bool use_company_replace = true);

  struct View {
    TokenSequence sequence;
    AugmentStrategy strategy;
  };

  std::pair<View, View> views(const SolutionRecord& solution, const CompanyRecord& company,
                              bool positive, const TokenSequence& base, Rng& rng) const;

  std::vector<AugmentStrategy> available(bool positive) const;

 private:
  View apply(AugmentStrategy strategy, const SolutionRecord& solution,
             const CompanyRecord& company, const TokenSequence& base, Rng& rng) const;

  GroupSpec spec_;
  const Vocab& vocab_;
  int max_len_;
  double r_t_;
  double r_f_;
  const SimilarityIndex* index_;
  const std::map<std::string, const CompanyRecord*>* companies_;
  bool use_token_mask_;
  bool use_field_mask_;
  bool use_company_replace_;
};

}  // namespace fieldmatch
