#include "fieldmatch/schema.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace fieldmatch {

namespace {

void check_unique(const std::vector<std::string>& names, const std::string& group) {
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw std::invalid_argument("FieldSchema: empty field name in " + group);
    if (!seen.insert(n).second) {
      throw std::invalid_argument("FieldSchema: duplicate field '" + n + "' in " + group);
    }
  }
}

}  // namespace

void FieldSchema::check() const {
  if (desc_fields_solution.empty() || desc_fields_company.empty() ||
      attr_fields_solution.empty() || attr_fields_company.empty() ||
      categorical_fields.empty() || numeric_fields.empty()) {
    throw std::invalid_argument("FieldSchema: every field group must be non-empty");
  }
  check_unique(desc_fields_solution, "desc_fields_solution");
  check_unique(desc_fields_company, "desc_fields_company");
  check_unique(attr_fields_solution, "attr_fields_solution");
  check_unique(attr_fields_company, "attr_fields_company");
  check_unique(numeric_fields, "numeric_fields");
  std::vector<std::string> cat_names;
  for (const auto& [name, cardinality] : categorical_fields) {
    cat_names.push_back(name);
    if (cardinality < 2) {
      throw std::invalid_argument("FieldSchema: cardinality of '" + name + "' must be >= 2");
    }
  }
  check_unique(cat_names, "categorical_fields");
}

int FieldSchema::categorical_cardinality(const std::string& name) const {
  for (const auto& [n, c] : categorical_fields) {
    if (n == name) return c;
  }
  throw std::invalid_argument("FieldSchema: unknown categorical field '" + name + "'");
}

bool FieldSchema::has_categorical(const std::string& name) const {
  for (const auto& [n, c] : categorical_fields) {
    if (n == name) return true;
  }
  return false;
}

bool FieldSchema::has_numeric(const std::string& name) const {
  for (const auto& n : numeric_fields) {
    if (n == name) return true;
  }
  return false;
}

namespace {

template <typename Map>
void report_text_group(const Map& present, const std::vector<std::string>& declared,
                       const std::string& group, ValidationReport& report) {
  std::set<std::string> declared_set(declared.begin(), declared.end());
  for (const auto& name : declared) {
    if (present.find(name) == present.end()) report.missing.push_back(name);
  }
  for (const auto& [name, value] : present) {
    if (declared_set.find(name) == declared_set.end()) {
      report.errors.push_back("out-of-schema " + group + " field '" + name + "'");
    }
  }
}

}  // namespace

ValidationReport validate_record(const SolutionRecord& record, const FieldSchema& schema) {
  ValidationReport report;
  if (record.id.empty()) report.errors.push_back("empty solution id");
  report_text_group(record.desc, schema.desc_fields_solution, "desc", report);
  report_text_group(record.attr, schema.attr_fields_solution, "attr", report);
  return report;
}

ValidationReport validate_record(const CompanyRecord& record, const FieldSchema& schema) {
  ValidationReport report;
  if (record.id.empty()) report.errors.push_back("empty company id");
  report_text_group(record.desc, schema.desc_fields_company, "desc", report);
  report_text_group(record.attr, schema.attr_fields_company, "attr", report);

  for (const auto& [name, cardinality] : schema.categorical_fields) {
    auto it = record.categorical.find(name);
    if (it == record.categorical.end()) {
      report.missing.push_back(name);
    } else if (it->second < 0 || it->second >= cardinality) {
      report.errors.push_back("categorical '" + name + "' index " + std::to_string(it->second) +
                              " out of range [0," + std::to_string(cardinality) + ")");
    }
  }
  for (const auto& [name, value] : record.categorical) {
    if (!schema.has_categorical(name)) {
      report.errors.push_back("out-of-schema categorical field '" + name + "'");
    }
  }

  for (const auto& name : schema.numeric_fields) {
    auto it = record.numeric.find(name);
    if (it == record.numeric.end()) {
      report.missing.push_back(name);
    } else if (!std::isfinite(it->second)) {
      report.errors.push_back("numeric '" + name + "' is not finite");
    }
  }
  for (const auto& [name, value] : record.numeric) {
    if (!schema.has_numeric(name)) {
      report.errors.push_back("out-of-schema numeric field '" + name + "'");
    }
  }
  return report;
}

bool operator==(const SolutionRecord& a, const SolutionRecord& b) {
  return a.id == b.id && a.desc == b.desc && a.attr == b.attr;
}

bool operator==(const CompanyRecord& a, const CompanyRecord& b) {
  return a.id == b.id && a.desc == b.desc && a.attr == b.attr &&
         a.categorical == b.categorical && a.numeric == b.numeric;
}

bool operator==(const FieldSchema& a, const FieldSchema& b) {
  return a.desc_fields_solution == b.desc_fields_solution &&
         a.desc_fields_company == b.desc_fields_company &&
         a.attr_fields_solution == b.attr_fields_solution &&
         a.attr_fields_company == b.attr_fields_company &&
         a.categorical_fields == b.categorical_fields && a.numeric_fields == b.numeric_fields;
}

}  // namespace fieldmatch
