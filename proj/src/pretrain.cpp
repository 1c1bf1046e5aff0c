#include "fieldmatch/pretrain.hpp"

#include <algorithm>
#include <stdexcept>

namespace fieldmatch {

ContrastiveBatch build_contrastive_batch(const std::vector<ContrastivePair>& pairs,
                                         const Augmenter& augmenter, Rng& rng) {
  if (pairs.empty()) throw std::invalid_argument("build_contrastive_batch: no pairs");
  ContrastiveBatch batch;
  batch.views.reserve(pairs.size() * 2);
  batch.pair_index.reserve(pairs.size() * 2);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    auto [v1, v2] = augmenter.views(*p.solution, *p.company, p.positive, *p.base, rng);
    batch.views.push_back(std::move(v1.sequence));
    batch.views.push_back(std::move(v2.sequence));
    batch.pair_index.push_back(static_cast<int>(i));
    batch.pair_index.push_back(static_cast<int>(i));
  }
  return batch;
}

int info_nce_loss(Tape& tape, int representations, const std::vector<int>& pair_index,
                  double tau) {
  if (tau <= 0.0) throw std::invalid_argument("info_nce_loss: temperature must be positive");
  const Tensor& reps = tape.value(representations);
  if (reps.rank() != 2) throw std::invalid_argument("info_nce_loss: representations must be 2-D");
  const int n = reps.rows();
  if (static_cast<int>(pair_index.size()) != n) {
    throw std::invalid_argument("info_nce_loss: pair_index must cover every view");
  }
  if (n % 2 != 0) throw std::invalid_argument("info_nce_loss: view count must be even");

  // Partner of view i is the other view of its pair.
  std::vector<int> partner(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j != i && pair_index[static_cast<std::size_t>(j)] == pair_index[static_cast<std::size_t>(i)]) {
        if (partner[static_cast<std::size_t>(i)] != -1) {
          throw std::invalid_argument("info_nce_loss: pair has more than two views");
        }
        partner[static_cast<std::size_t>(i)] = j;
      }
    }
    if (partner[static_cast<std::size_t>(i)] < 0) {
      throw std::invalid_argument("info_nce_loss: view " + std::to_string(i) + " has no partner");
    }
  }

  const int normalized = tape.row_l2_normalize(representations);
  const int logits = tape.scale(tape.matmul_nt(normalized, normalized), 1.0 / tau);

  // Valid denominator entries for view i: everything except i itself (the
  // partner is the positive; views of other pairs are the negatives).
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * n, 1);
  for (int i = 0; i < n; ++i) mask[static_cast<std::size_t>(i) * n + i] = 0;

  const int probs = tape.masked_softmax_full(logits, mask);
  const int positive_probs = tape.pick(probs, partner);
  return tape.scale(tape.mean_all(tape.log(positive_probs)), -1.0);
}

PretrainResult pretrain_encoder(MatchModel& model, std::size_t group_index,
                                const std::vector<MatchExample>& pairs,
                                const std::map<std::string, const SolutionRecord*>& solutions,
                                const std::map<std::string, const CompanyRecord*>& companies,
                                const Vocab& vocab, const SimilarityIndex* index,
                                const PretrainConfig& config) {
  if (config.epochs < 0 || config.batch_pairs < 1) {
    throw std::invalid_argument("PretrainConfig: bad epochs or batch size");
  }
  if (pairs.empty()) throw std::invalid_argument("pretrain_encoder: no pairs");

  const GroupSpec& spec = model.groups().at(group_index);
  const AblationFlags& flags = model.flags();
  const Augmenter augmenter(spec, vocab, model.config().max_len, config.r_t, config.r_f, index,
                            &companies, !flags.no_token_masking, !flags.no_field_masking,
                            !flags.no_company_replacing);

  // Clean sequences assembled once per distinct pair.
  std::vector<TokenSequence> bases;
  std::vector<ContrastivePair> queue;
  bases.reserve(pairs.size());
  queue.reserve(pairs.size());
  for (const auto& ex : pairs) {
    auto sit = solutions.find(ex.solution_id);
    auto cit = companies.find(ex.company_id);
    if (sit == solutions.end() || cit == companies.end()) {
      throw std::invalid_argument("pretrain_encoder: example references unknown record '" +
                                  ex.solution_id + "'/'" + ex.company_id + "'");
    }
    bases.push_back(
        assemble_sequence(spec, *sit->second, *cit->second, vocab, model.config().max_len));
    queue.push_back({sit->second, cit->second, ex.label == 1, nullptr});
  }
  for (std::size_t i = 0; i < queue.size(); ++i) queue[i].base = &bases[i];

  const std::map<ParamGroup, double> rates = {{ParamGroup::token_level, config.learning_rate},
                                              {ParamGroup::scale, 0.0},
                                              {ParamGroup::field_level, 0.0}};

  Rng rng(config.seed);
  PretrainResult result;
  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(queue.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    double epoch_loss = 0.0;
    int epoch_steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_pairs) {
      const std::size_t end = std::min(order.size(), begin + config.batch_pairs);
      std::vector<ContrastivePair> batch_pairs;
      for (std::size_t k = begin; k < end; ++k) batch_pairs.push_back(queue[order[k]]);

      auto batch = build_contrastive_batch(batch_pairs, augmenter, rng);

      Tape tape;
      std::vector<int> cls_nodes;
      for (const auto& view : batch.views) {
        cls_nodes.push_back(model.encode_cls(tape, group_index, view));
      }
      const int reps = tape.concat_rows(cls_nodes);
      const int loss = info_nce_loss(tape, reps, batch.pair_index, config.tau);

      model.store().zero_grads();
      tape.backward(loss);
      adam_step(model.store(), rates);

      const double loss_value = tape.value(loss).item();
      result.loss_history.emplace_back(step, loss_value);
      epoch_loss += loss_value;
      ++epoch_steps;
      ++step;
    }
    result.epoch_mean_loss.push_back(epoch_steps > 0 ? epoch_loss / epoch_steps : 0.0);
  }
  return result;
}

}  // namespace fieldmatch
