#include "fieldmatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fieldmatch/rng.hpp"

namespace fieldmatch {

void SynthConfig::check() const {
  if (n_solutions < 1 || n_companies < 1 || n_industries < 1 || vocab_seed_words < 1 ||
      positives_per_solution < 1) {
    throw std::invalid_argument("SynthConfig: all counts must be >= 1");
  }
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(text_signal_strength) || !in_unit(scale_signal_strength) ||
      !in_unit(missing_field_rate) || !in_unit(missing_token_rate)) {
    throw std::invalid_argument("SynthConfig: rates and strengths must lie in [0,1]");
  }
  if (positives_per_solution > n_companies) {
    throw std::invalid_argument("SynthConfig: positives_per_solution exceeds n_companies");
  }
  if (vocab_seed_words < n_industries * 6 + 60) {
    throw std::invalid_argument("SynthConfig: vocab_seed_words too small for the industry count");
  }
}

double industry_overlap(const std::vector<std::pair<int, double>>& a,
                        const std::vector<std::pair<int, double>>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [ia, wa] : a) {
    na += wa * wa;
    for (const auto& [ib, wb] : b) {
      if (ia == ib) dot += wa * wb;
    }
  }
  for (const auto& [ib, wb] : b) nb += wb * wb;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double band_compatibility(int solution_band, int company_band) {
  const int d = std::abs(solution_band - company_band);
  return d == 0 ? 1.0 : (d == 1 ? 0.5 : 0.0);
}

double planted_weight(const SynthConfig& config, double overlap, double compatibility) {
  // Convex response concentrates positives on compatible pairs so the
  // structure is recoverable; the base keeps zero-signal corpora uniformly
  // random instead of degenerate.
  const double signal = config.text_signal_strength * overlap +
                        config.scale_signal_strength * compatibility;
  return 0.05 + std::expm1(6.0 * signal);
}

namespace {

constexpr int kBands = 3;

// Closed pseudo-word vocabulary built from syllables.
std::vector<std::string> make_words(int count, Rng rng) {
  static const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                  "p", "r", "s", "t", "v", "z", "ch", "st"};
  static const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  static const char* kCodas[] = {"", "n", "r", "s", "x", "l"};
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (static_cast<int>(words.size()) < count) {
    const int syllables = static_cast<int>(rng.uniform_int(2, 3));
    std::string w;
    for (int s = 0; s < syllables; ++s) {
      w += kOnsets[rng.uniform_int(0, 15)];
      w += kVowels[rng.uniform_int(0, 6)];
    }
    w += kCodas[rng.uniform_int(0, 5)];
    if (seen.insert(w).second) words.push_back(w);
  }
  return words;
}

struct WordPools {
  std::vector<std::vector<std::string>> industry_keywords;  // per industry
  std::vector<std::vector<std::string>> band_words;         // solution-side band hints
  std::vector<std::string> filler;
  std::vector<std::string> generic;  // product-ish words for solution names
  std::vector<std::string> suffix;   // company name suffixes
};

WordPools partition_words(const std::vector<std::string>& words, int n_industries) {
  WordPools pools;
  const int per_industry = std::max(
      4, std::min(10, static_cast<int>(words.size()) * 2 / (3 * std::max(1, n_industries))));
  std::size_t cursor = 0;
  for (int i = 0; i < n_industries; ++i) {
    pools.industry_keywords.emplace_back(words.begin() + cursor,
                                         words.begin() + cursor + per_industry);
    cursor += per_industry;
  }
  for (int b = 0; b < kBands; ++b) {
    pools.band_words.emplace_back(words.begin() + cursor, words.begin() + cursor + 3);
    cursor += 3;
  }
  const std::size_t rest = words.size() - cursor;
  const std::size_t generic_n = std::max<std::size_t>(4, std::min<std::size_t>(12, rest / 4));
  const std::size_t suffix_n = std::max<std::size_t>(8, std::min<std::size_t>(40, rest / 4));
  pools.generic.assign(words.begin() + cursor, words.begin() + cursor + generic_n);
  cursor += generic_n;
  pools.suffix.assign(words.begin() + cursor, words.begin() + cursor + suffix_n);
  cursor += suffix_n;
  pools.filler.assign(words.begin() + cursor, words.end());
  if (pools.filler.empty()) pools.filler.push_back(words.back());
  return pools;
}

std::vector<std::pair<int, double>> draw_industry_mixture(Rng& rng, int n_industries) {
  std::vector<std::pair<int, double>> mix;
  const int primary = static_cast<int>(rng.uniform_int(0, n_industries - 1));
  mix.emplace_back(primary, 1.0);
  if (n_industries > 1 && rng.bernoulli(0.3)) {
    int secondary = primary;
    while (secondary == primary) {
      secondary = static_cast<int>(rng.uniform_int(0, n_industries - 1));
    }
    mix.emplace_back(secondary, 0.4);
  }
  return mix;
}

const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[rng.uniform_int(0, static_cast<std::int64_t>(v.size()) - 1)];
}

// Draws one industry from the mixture, weighted.
int pick_industry(const std::vector<std::pair<int, double>>& mix, Rng& rng) {
  if (mix.size() == 1) return mix[0].first;
  const double total = mix[0].second + mix[1].second;
  return rng.uniform() * total < mix[0].second ? mix[0].first : mix[1].first;
}

// Word salad mixing the entity's industry keywords with filler; `extra`
// (when given) is sprinkled in at a fixed rate.
std::string make_sentence(const WordPools& pools,
                          const std::vector<std::pair<int, double>>& mix, Rng& rng,
                          int min_len, int max_len, const std::vector<std::string>* extra) {
  const int len = static_cast<int>(rng.uniform_int(min_len, max_len));
  std::ostringstream out;
  for (int t = 0; t < len; ++t) {
    if (t > 0) out << ' ';
    const double r = rng.uniform();
    if (extra != nullptr && r < 0.2) {
      out << pick(*extra, rng);
    } else if (r < 0.62) {
      out << pick(pools.industry_keywords[pick_industry(mix, rng)], rng);
    } else {
      out << pick(pools.filler, rng);
    }
  }
  return out.str();
}

std::string level1_tag(const WordPools& pools, int industry) {
  return pools.industry_keywords[industry][0];
}

std::string level2_tag(const WordPools& pools, int industry) {
  return pools.industry_keywords[industry][0] + " " + pools.industry_keywords[industry][1];
}

std::string level3_tag(const WordPools& pools, int industry, Rng& rng) {
  const auto& kws = pools.industry_keywords[industry];
  const auto i = rng.uniform_int(2, static_cast<std::int64_t>(kws.size()) - 1);
  return kws[i];
}

std::string zero_pad(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

template <typename Record>
void drop_fields_and_tokens(Record& record, double field_rate, double token_rate, Rng& rng) {
  // Map iteration order is sorted by field name, so the draw sequence is
  // stable for a given record content.
  std::vector<std::string> drop_desc;
  for (auto& [name, text] : record.desc) {
    if (rng.bernoulli(field_rate)) {
      drop_desc.push_back(name);
      continue;
    }
    if (token_rate > 0.0) {
      std::istringstream in(text);
      std::ostringstream kept;
      std::string tok;
      bool first = true;
      while (in >> tok) {
        if (rng.bernoulli(token_rate)) continue;
        if (!first) kept << ' ';
        kept << tok;
        first = false;
      }
      text = kept.str();
    }
  }
  for (const auto& name : drop_desc) record.desc.erase(name);

  std::vector<std::string> drop_attr;
  for (auto& [name, tags] : record.attr) {
    if (rng.bernoulli(field_rate)) {
      drop_attr.push_back(name);
      continue;
    }
    if (token_rate > 0.0) {
      std::vector<std::string> kept_tags;
      for (const auto& tag : tags) {
        std::istringstream in(tag);
        std::ostringstream kept;
        std::string tok;
        bool first = true;
        while (in >> tok) {
          if (rng.bernoulli(token_rate)) continue;
          if (!first) kept << ' ';
          kept << tok;
          first = false;
        }
        if (!kept.str().empty()) kept_tags.push_back(kept.str());
      }
      tags = kept_tags;
    }
  }
  for (const auto& name : drop_attr) record.attr.erase(name);
}

}  // namespace

SynthCorpus generate_corpus(const SynthConfig& config) {
  config.check();

  SynthCorpus corpus;
  corpus.schema.desc_fields_solution = {"name", "introduction"};
  corpus.schema.desc_fields_company = {"name", "introduction", "business_scope"};
  corpus.schema.attr_fields_solution = {"first_level_industry", "second_level_industry",
                                        "third_level_industry", "target_industry"};
  corpus.schema.attr_fields_company = {"first_level_industry", "second_level_industry",
                                       "third_level_industry", "copyright_name",
                                       "key_project_category"};
  corpus.schema.categorical_fields = {{"status", 2}, {"listed", 2}, {"size_class", 3}};
  corpus.schema.numeric_fields = {"app_count", "registered_capital", "employee_count"};
  corpus.schema.check();

  Rng root(config.seed);
  const auto words = make_words(config.vocab_seed_words, root.fork(1));
  const WordPools pools = partition_words(words, config.n_industries);

  const int id_width = 5;

  // Solutions: industry mixture + target band; the band shows up as hint
  // words in the introduction so the target scale is recoverable from text.
  for (int s = 0; s < config.n_solutions; ++s) {
    Rng rng = root.fork(2).fork(static_cast<std::uint64_t>(s));
    const auto mix = draw_industry_mixture(rng, config.n_industries);
    const int band = static_cast<int>(rng.uniform_int(0, kBands - 1));
    corpus.latents.solution_industries.push_back(mix);
    corpus.latents.solution_bands.push_back(band);

    SolutionRecord rec;
    rec.id = "S" + zero_pad(s, id_width);
    rec.desc["name"] = pick(pools.industry_keywords[mix[0].first], rng) + " " +
                       pick(pools.generic, rng);
    rec.desc["introduction"] =
        make_sentence(pools, mix, rng, 10, 16, &pools.band_words[band]);

    rec.attr["first_level_industry"] = {level1_tag(pools, mix[0].first)};
    if (mix.size() > 1) {
      rec.attr["first_level_industry"].push_back(level1_tag(pools, mix[1].first));
    }
    rec.attr["second_level_industry"] = {level2_tag(pools, mix[0].first)};
    rec.attr["third_level_industry"] = {level3_tag(pools, mix[0].first, rng)};
    if (rng.bernoulli(0.5)) {
      rec.attr["third_level_industry"].push_back(level3_tag(pools, mix[0].first, rng));
    }
    rec.attr["target_industry"] = {level1_tag(pools, mix[0].first)};
    corpus.solutions.push_back(std::move(rec));
  }

  // Companies: industry mixture in the text fields, scale band only in the
  // categorical/numeric features.
  static const double kAppMean[kBands] = {3.0, 12.0, 40.0};
  static const double kCapitalMean[kBands] = {50.0, 500.0, 5000.0};
  static const double kEmployeeMean[kBands] = {10.0, 120.0, 1500.0};
  static const double kStatusP[kBands] = {0.2, 0.5, 0.8};
  static const double kListedP[kBands] = {0.05, 0.3, 0.7};

  for (int c = 0; c < config.n_companies; ++c) {
    Rng rng = root.fork(3).fork(static_cast<std::uint64_t>(c));
    const auto mix = draw_industry_mixture(rng, config.n_industries);
    const int band = static_cast<int>(rng.uniform_int(0, kBands - 1));
    corpus.latents.company_industries.push_back(mix);
    corpus.latents.company_bands.push_back(band);

    CompanyRecord rec;
    rec.id = "C" + zero_pad(c, id_width);
    rec.desc["name"] = pick(pools.industry_keywords[mix[0].first], rng) + " " +
                       pick(pools.suffix, rng) + " " + pick(pools.suffix, rng);
    rec.desc["introduction"] = make_sentence(pools, mix, rng, 10, 16, nullptr);
    rec.desc["business_scope"] = make_sentence(pools, mix, rng, 8, 14, nullptr);

    rec.attr["first_level_industry"] = {level1_tag(pools, mix[0].first)};
    if (mix.size() > 1) {
      rec.attr["first_level_industry"].push_back(level1_tag(pools, mix[1].first));
    }
    rec.attr["second_level_industry"] = {level2_tag(pools, mix[0].first)};
    rec.attr["third_level_industry"] = {level3_tag(pools, mix[0].first, rng)};
    if (rng.bernoulli(0.5)) {
      rec.attr["third_level_industry"].push_back(level3_tag(pools, mix[0].first, rng));
    }
    rec.attr["copyright_name"] = {level3_tag(pools, mix[0].first, rng) + " " +
                                  pick(pools.filler, rng)};
    rec.attr["key_project_category"] = {level3_tag(pools, mix[0].first, rng)};

    rec.categorical["status"] = rng.bernoulli(kStatusP[band]) ? 1 : 0;
    rec.categorical["listed"] = rng.bernoulli(kListedP[band]) ? 1 : 0;
    rec.categorical["size_class"] =
        rng.bernoulli(0.85) ? band : static_cast<int>(rng.uniform_int(0, kBands - 1));

    rec.numeric["app_count"] = std::round(kAppMean[band] * std::exp(0.3 * rng.normal()));
    rec.numeric["registered_capital"] = kCapitalMean[band] * std::exp(0.4 * rng.normal());
    rec.numeric["employee_count"] = std::round(kEmployeeMean[band] * std::exp(0.3 * rng.normal()));
    corpus.companies.push_back(std::move(rec));
  }

  // Positive pairs: weighted sampling without replacement per solution.
  Rng pair_rng = root.fork(4);
  for (int s = 0; s < config.n_solutions; ++s) {
    std::vector<double> weights(config.n_companies);
    for (int c = 0; c < config.n_companies; ++c) {
      const double overlap = industry_overlap(corpus.latents.solution_industries[s],
                                              corpus.latents.company_industries[c]);
      const double compat = band_compatibility(corpus.latents.solution_bands[s],
                                               corpus.latents.company_bands[c]);
      weights[c] = planted_weight(config, overlap, compat);
    }
    std::set<int> drawn;
    while (static_cast<int>(drawn.size()) < config.positives_per_solution) {
      const auto c = pair_rng.weighted_index(weights);
      weights[c] = 0.0;
      drawn.insert(static_cast<int>(c));
    }
    for (int c : drawn) {
      corpus.positives.emplace_back(corpus.solutions[s].id, corpus.companies[c].id);
    }
  }

  if (config.missing_field_rate > 0.0 || config.missing_token_rate > 0.0) {
    inject_missingness(corpus.solutions, config.missing_field_rate, config.missing_token_rate,
                       root.fork(5).next_u64());
    inject_missingness(corpus.companies, config.missing_field_rate, config.missing_token_rate,
                       root.fork(6).next_u64());
  }
  return corpus;
}

void inject_missingness(std::vector<SolutionRecord>& records, double field_rate,
                        double token_rate, std::uint64_t seed) {
  if (field_rate < 0.0 || field_rate > 1.0 || token_rate < 0.0 || token_rate > 1.0) {
    throw std::invalid_argument("inject_missingness: rates must lie in [0,1]");
  }
  Rng root(seed);
  for (std::size_t i = 0; i < records.size(); ++i) {
    Rng rng = root.fork(i);
    drop_fields_and_tokens(records[i], field_rate, token_rate, rng);
  }
}

void inject_missingness(std::vector<CompanyRecord>& records, double field_rate,
                        double token_rate, std::uint64_t seed) {
  if (field_rate < 0.0 || field_rate > 1.0 || token_rate < 0.0 || token_rate > 1.0) {
    throw std::invalid_argument("inject_missingness: rates must lie in [0,1]");
  }
  Rng root(seed);
  for (std::size_t i = 0; i < records.size(); ++i) {
    Rng rng = root.fork(i);
    drop_fields_and_tokens(records[i], field_rate, token_rate, rng);
  }
}

}  // namespace fieldmatch
