#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fieldmatch/dataset.hpp"
#include "fieldmatch/schema.hpp"

namespace fieldmatch {

struct SynthConfig {
  int n_solutions = 20;
  int n_companies = 2000;
  int n_industries = 8;
  int vocab_seed_words = 2000;
  int positives_per_solution = 8;
  double text_signal_strength = 0.9;
  double scale_signal_strength = 0.6;
  double missing_field_rate = 0.0;
  double missing_token_rate = 0.0;
  std::uint64_t seed = 1;

  void check() const;
};

// Latent structure behind the generated corpus. Exposed so tests can probe
// recoverability directly: the planted positive-sampling weight is an exact
// function of these.
struct CorpusLatents {
  // Sparse industry mixtures: (industry index, weight) pairs per entity.
  std::vector<std::vector<std::pair<int, double>>> solution_industries;
  std::vector<std::vector<std::pair<int, double>>> company_industries;
  std::vector<int> solution_bands;  // target scale band, in {0,1,2}
  std::vector<int> company_bands;
};

struct SynthCorpus {
  FieldSchema schema;
  std::vector<SolutionRecord> solutions;
  std::vector<CompanyRecord> companies;
  std::vector<std::pair<std::string, std::string>> positives;  // (solution_id, company_id)
  CorpusLatents latents;
};

// Cosine overlap of two sparse industry mixtures, in [0,1].
double industry_overlap(const std::vector<std::pair<int, double>>& a,
                        const std::vector<std::pair<int, double>>& b);

// 1 for same band, 0.5 for adjacent, 0 otherwise.
double band_compatibility(int solution_band, int company_band);

// The planted (unnormalized) probability weight that a pair is positive.
// Monotone non-decreasing in both signal strengths by construction.
double planted_weight(const SynthConfig& config, double overlap, double compatibility);

SynthCorpus generate_corpus(const SynthConfig& config);

// Drops text fields with probability field_rate and surviving whitespace
// tokens with probability token_rate. Categorical and numeric fields are
// never touched. A field whose tokens are all dropped stays present but
// empty (downstream rendering treats it like a missing field).
void inject_missingness(std::vector<SolutionRecord>& records, double field_rate,
                        double token_rate, std::uint64_t seed);
void inject_missingness(std::vector<CompanyRecord>& records, double field_rate,
                        double token_rate, std::uint64_t seed);

}  // namespace fieldmatch
