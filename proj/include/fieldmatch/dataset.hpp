#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "fieldmatch/schema.hpp"

namespace fieldmatch {

struct MatchExample {
  std::string solution_id;
  std::string company_id;
  int label = 0;  // binary
};

enum class Split { train, validation, test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct Dataset {
  std::vector<SolutionRecord> solutions;
  std::vector<CompanyRecord> companies;
  std::vector<MatchExample> examples;
  std::optional<Split> split_tag;
};

bool operator==(const MatchExample& a, const MatchExample& b);
bool operator==(const Dataset& a, const Dataset& b);

// Line-delimited records: one JSON object per line carrying a "kind"
// discriminator in {solution, company, example, meta}. Unknown top-level keys
// and malformed lines raise errors naming the line number.
Dataset load_dataset(const std::string& path);
void store_dataset(const Dataset& dataset, const std::string& path);

FieldSchema load_schema(const std::string& path);
void store_schema(const FieldSchema& schema, const std::string& path);

// Labels every positive pair 1 and samples `negatives_per_positive` distinct
// companies (uniform, without replacement, never a known positive of the same
// solution) labelled 0. Output order: each positive followed by its negatives.
std::vector<MatchExample> build_examples(
    const std::vector<std::pair<std::string, std::string>>& positives,
    const std::vector<CompanyRecord>& companies, int negatives_per_positive,
    std::uint64_t seed);

// Splits by positive pair; each positive's negatives follow it into the same
// split. Sizes are largest-remainder allocations of ratio * positive count.
std::tuple<std::vector<MatchExample>, std::vector<MatchExample>, std::vector<MatchExample>>
split_dataset(const std::vector<MatchExample>& examples, double train_ratio,
              double validation_ratio, double test_ratio, std::uint64_t seed);

}  // namespace fieldmatch
