#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fieldmatch/augment.hpp"
#include "fieldmatch/dataset.hpp"
#include "fieldmatch/match_model.hpp"
#include "fieldmatch/tape.hpp"

namespace fieldmatch {

// A pair queued for contrastive pretraining, with its pre-assembled clean
// sequence for the group being pretrained.
struct ContrastivePair {
  const SolutionRecord* solution = nullptr;
  const CompanyRecord* company = nullptr;
  bool positive = false;
  const TokenSequence* base = nullptr;
};

// 2M augmented views; views 2i and 2i+1 derive from pair i.
struct ContrastiveBatch {
  std::vector<TokenSequence> views;
  std::vector<int> pair_index;
};

ContrastiveBatch build_contrastive_batch(const std::vector<ContrastivePair>& pairs,
                                         const Augmenter& augmenter, Rng& rng);

// In-batch InfoNCE over cosine similarities at temperature tau. For view i
// with partner j the denominator is phi(i,j) plus phi against every view of
// every other pair (self excluded); the loss is the mean over all 2M views.
int info_nce_loss(Tape& tape, int representations, const std::vector<int>& pair_index,
                  double tau);

struct PretrainConfig {
  double tau = 0.2;      // 0.2 for the description encoder, 0.05 for attributes
  double r_t = 0.2;
  double r_f = 0.5;
  int epochs = 3;
  int batch_pairs = 16;  // M
  double learning_rate = 5e-5;
  std::uint64_t seed = 1;
};

struct PretrainResult {
  std::vector<std::pair<int, double>> loss_history;  // (step, loss)
  std::vector<double> epoch_mean_loss;
};

// Contrastive pretraining of one group's token encoder over the training
// pairs. Only token-level parameters receive updates.
PretrainResult pretrain_encoder(MatchModel& model, std::size_t group_index,
                                const std::vector<MatchExample>& pairs,
                                const std::map<std::string, const SolutionRecord*>& solutions,
                                const std::map<std::string, const CompanyRecord*>& companies,
                                const Vocab& vocab, const SimilarityIndex* index,
                                const PretrainConfig& config);

}  // namespace fieldmatch
