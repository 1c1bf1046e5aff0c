#pragma once

#include <map>
#include <string>
#include <vector>

namespace fieldmatch {

// Declares every field of the multi-field records. Ordering of the lists is
// meaningful: sequence assembly and field-aware embeddings index fields by
// their position here.
struct FieldSchema {
  std::vector<std::string> desc_fields_solution;
  std::vector<std::string> desc_fields_company;
  std::vector<std::string> attr_fields_solution;
  std::vector<std::string> attr_fields_company;
  std::vector<std::pair<std::string, int>> categorical_fields;  // (name, cardinality)
  std::vector<std::string> numeric_fields;

  // Throws std::invalid_argument on duplicate names, empty groups, or
  // cardinalities below 2.
  void check() const;

  int categorical_cardinality(const std::string& name) const;
  bool has_categorical(const std::string& name) const;
  bool has_numeric(const std::string& name) const;
};

struct SolutionRecord {
  std::string id;
  std::map<std::string, std::string> desc;               // absent key = missing field
  std::map<std::string, std::vector<std::string>> attr;  // tag lists
};

struct CompanyRecord {
  std::string id;
  std::map<std::string, std::string> desc;
  std::map<std::string, std::vector<std::string>> attr;
  std::map<std::string, int> categorical;     // category index in [0, cardinality)
  std::map<std::string, double> numeric;
};

struct ValidationReport {
  std::vector<std::string> missing;  // schema fields absent from the record (allowed)
  std::vector<std::string> errors;   // out-of-schema fields, bad indices, non-finite values
  bool ok() const { return errors.empty(); }
};

ValidationReport validate_record(const SolutionRecord& record, const FieldSchema& schema);
ValidationReport validate_record(const CompanyRecord& record, const FieldSchema& schema);

bool operator==(const SolutionRecord& a, const SolutionRecord& b);
bool operator==(const CompanyRecord& a, const CompanyRecord& b);
bool operator==(const FieldSchema& a, const FieldSchema& b);

}  // namespace fieldmatch
