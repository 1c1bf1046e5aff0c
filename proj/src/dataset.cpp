#include "fieldmatch/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fieldmatch/rng.hpp"

namespace fieldmatch {

using nlohmann::json;

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  throw std::logic_error("split_name: bad tag");
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "validation") return Split::validation;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split tag '" + name + "'");
}

bool operator==(const MatchExample& a, const MatchExample& b) {
  return a.solution_id == b.solution_id && a.company_id == b.company_id && a.label == b.label;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.solutions == b.solutions && a.companies == b.companies && a.examples == b.examples &&
         a.split_tag == b.split_tag;
}

namespace {

void require_keys(const json& obj, const std::set<std::string>& allowed, std::size_t line_no) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": unknown field name '" +
                               it.key() + "'");
    }
  }
}

json text_fields_to_json(const std::map<std::string, std::string>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[k] = v;
  return out;
}

json tag_fields_to_json(const std::map<std::string, std::vector<std::string>>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[k] = v;
  return out;
}

SolutionRecord parse_solution(const json& obj, std::size_t line_no) {
  require_keys(obj, {"kind", "id", "desc", "attr"}, line_no);
  SolutionRecord r;
  r.id = obj.at("id").get<std::string>();
  if (obj.contains("desc")) {
    for (auto it = obj["desc"].begin(); it != obj["desc"].end(); ++it) {
      r.desc[it.key()] = it.value().get<std::string>();
    }
  }
  if (obj.contains("attr")) {
    for (auto it = obj["attr"].begin(); it != obj["attr"].end(); ++it) {
      r.attr[it.key()] = it.value().get<std::vector<std::string>>();
    }
  }
  return r;
}

CompanyRecord parse_company(const json& obj, std::size_t line_no) {
  require_keys(obj, {"kind", "id", "desc", "attr", "categorical", "numeric"}, line_no);
  CompanyRecord r;
  r.id = obj.at("id").get<std::string>();
  if (obj.contains("desc")) {
    for (auto it = obj["desc"].begin(); it != obj["desc"].end(); ++it) {
      r.desc[it.key()] = it.value().get<std::string>();
    }
  }
  if (obj.contains("attr")) {
    for (auto it = obj["attr"].begin(); it != obj["attr"].end(); ++it) {
      r.attr[it.key()] = it.value().get<std::vector<std::string>>();
    }
  }
  if (obj.contains("categorical")) {
    for (auto it = obj["categorical"].begin(); it != obj["categorical"].end(); ++it) {
      r.categorical[it.key()] = it.value().get<int>();
    }
  }
  if (obj.contains("numeric")) {
    for (auto it = obj["numeric"].begin(); it != obj["numeric"].end(); ++it) {
      r.numeric[it.key()] = it.value().get<double>();
    }
  }
  return r;
}

MatchExample parse_example(const json& obj, std::size_t line_no) {
  require_keys(obj, {"kind", "solution_id", "company_id", "label"}, line_no);
  MatchExample e;
  e.solution_id = obj.at("solution_id").get<std::string>();
  e.company_id = obj.at("company_id").get<std::string>();
  e.label = obj.at("label").get<int>();
  if (e.label != 0 && e.label != 1) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": label must be 0 or 1");
  }
  return e;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": malformed record (" +
                               e.what() + ")");
    }
    if (!obj.is_object() || !obj.contains("kind")) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": missing 'kind'");
    }
    const std::string kind = obj["kind"].get<std::string>();
    try {
      if (kind == "solution") {
        ds.solutions.push_back(parse_solution(obj, line_no));
      } else if (kind == "company") {
        ds.companies.push_back(parse_company(obj, line_no));
      } else if (kind == "example") {
        ds.examples.push_back(parse_example(obj, line_no));
      } else if (kind == "meta") {
        require_keys(obj, {"kind", "split"}, line_no);
        if (obj.contains("split")) ds.split_tag = split_from_name(obj["split"].get<std::string>());
      } else {
        throw std::runtime_error("unknown kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": malformed record (" +
                               e.what() + ")");
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ds;
}

void store_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset file '" + path + "'");
  if (dataset.split_tag) {
    json meta{{"kind", "meta"}, {"split", split_name(*dataset.split_tag)}};
    out << meta.dump() << "\n";
  }
  for (const auto& s : dataset.solutions) {
    json obj{{"kind", "solution"}, {"id", s.id}};
    obj["desc"] = text_fields_to_json(s.desc);
    obj["attr"] = tag_fields_to_json(s.attr);
    out << obj.dump() << "\n";
  }
  for (const auto& c : dataset.companies) {
    json obj{{"kind", "company"}, {"id", c.id}};
    obj["desc"] = text_fields_to_json(c.desc);
    obj["attr"] = tag_fields_to_json(c.attr);
    json cat = json::object();
    for (const auto& [k, v] : c.categorical) cat[k] = v;
    obj["categorical"] = cat;
    json num = json::object();
    for (const auto& [k, v] : c.numeric) num[k] = v;
    obj["numeric"] = num;
    out << obj.dump() << "\n";
  }
  for (const auto& e : dataset.examples) {
    json obj{{"kind", "example"},
             {"solution_id", e.solution_id},
             {"company_id", e.company_id},
             {"label", e.label}};
    out << obj.dump() << "\n";
  }
}

FieldSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schema file '" + path + "'");
  FieldSchema schema;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("schema line " + std::to_string(line_no) + ": malformed (" +
                               e.what() + ")");
    }
    require_keys(obj, {"kind", "entity", "group", "name", "cardinality"}, line_no);
    if (obj.at("kind").get<std::string>() != "field") {
      throw std::runtime_error("schema line " + std::to_string(line_no) + ": kind must be 'field'");
    }
    const std::string entity = obj.at("entity").get<std::string>();
    const std::string group = obj.at("group").get<std::string>();
    const std::string name = obj.at("name").get<std::string>();
    if (group == "desc") {
      (entity == "solution" ? schema.desc_fields_solution : schema.desc_fields_company)
          .push_back(name);
    } else if (group == "attr") {
      (entity == "solution" ? schema.attr_fields_solution : schema.attr_fields_company)
          .push_back(name);
    } else if (group == "categorical") {
      schema.categorical_fields.emplace_back(name, obj.at("cardinality").get<int>());
    } else if (group == "numeric") {
      schema.numeric_fields.push_back(name);
    } else {
      throw std::runtime_error("schema line " + std::to_string(line_no) + ": unknown group '" +
                               group + "'");
    }
  }
  schema.check();
  return schema;
}

void store_schema(const FieldSchema& schema, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write schema file '" + path + "'");
  auto field_line = [&](const std::string& entity, const std::string& group,
                        const std::string& name) {
    json obj{{"kind", "field"}, {"entity", entity}, {"group", group}, {"name", name}};
    out << obj.dump() << "\n";
  };
  for (const auto& n : schema.desc_fields_solution) field_line("solution", "desc", n);
  for (const auto& n : schema.desc_fields_company) field_line("company", "desc", n);
  for (const auto& n : schema.attr_fields_solution) field_line("solution", "attr", n);
  for (const auto& n : schema.attr_fields_company) field_line("company", "attr", n);
  for (const auto& [n, card] : schema.categorical_fields) {
    json obj{{"kind", "field"}, {"entity", "company"}, {"group", "categorical"}, {"name", n},
             {"cardinality", card}};
    out << obj.dump() << "\n";
  }
  for (const auto& n : schema.numeric_fields) field_line("company", "numeric", n);
}

std::vector<MatchExample> build_examples(
    const std::vector<std::pair<std::string, std::string>>& positives,
    const std::vector<CompanyRecord>& companies, int negatives_per_positive,
    std::uint64_t seed) {
  if (negatives_per_positive < 0) {
    throw std::invalid_argument("build_examples: negatives_per_positive must be >= 0");
  }
  if (companies.empty()) throw std::invalid_argument("build_examples: no companies");

  std::map<std::string, std::set<std::string>> positive_sets;
  for (const auto& [sid, cid] : positives) positive_sets[sid].insert(cid);

  Rng rng(seed);
  std::vector<MatchExample> out;
  out.reserve(positives.size() * (1 + static_cast<std::size_t>(negatives_per_positive)));
  std::map<std::string, std::set<std::string>> drawn_per_solution;  // keeps pairs unique
  for (const auto& [sid, cid] : positives) {
    out.push_back({sid, cid, 1});
    const auto& known_positive = positive_sets[sid];
    auto& drawn = drawn_per_solution[sid];
    const std::size_t available = companies.size() - known_positive.size() - drawn.size();
    if (static_cast<std::size_t>(negatives_per_positive) > available) {
      throw std::runtime_error("build_examples: solution '" + sid + "' needs " +
                               std::to_string(negatives_per_positive) +
                               " more negatives but only " + std::to_string(available) +
                               " companies remain");
    }
    std::size_t added = 0;
    while (added < static_cast<std::size_t>(negatives_per_positive)) {
      const auto idx =
          static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(companies.size()) - 1));
      const std::string& candidate = companies[idx].id;
      if (known_positive.count(candidate) || drawn.count(candidate)) continue;
      drawn.insert(candidate);
      out.push_back({sid, candidate, 0});
      ++added;
    }
  }
  return out;
}

std::tuple<std::vector<MatchExample>, std::vector<MatchExample>, std::vector<MatchExample>>
split_dataset(const std::vector<MatchExample>& examples, double train_ratio,
              double validation_ratio, double test_ratio, std::uint64_t seed) {
  const double total_ratio = train_ratio + validation_ratio + test_ratio;
  if (std::abs(total_ratio - 1.0) > 1e-9) {
    throw std::invalid_argument("split_dataset: ratios must sum to 1");
  }

  // Blocks: a positive example and the negatives that follow it.
  std::vector<std::pair<std::size_t, std::size_t>> blocks;  // [begin, end)
  std::size_t i = 0;
  while (i < examples.size()) {
    if (examples[i].label != 1) {
      throw std::invalid_argument(
          "split_dataset: expected positives followed by their negatives (example " +
          std::to_string(i) + " is an orphan negative)");
    }
    std::size_t j = i + 1;
    while (j < examples.size() && examples[j].label == 0) ++j;
    blocks.emplace_back(i, j);
    i = j;
  }
  if (blocks.size() < 3) throw std::invalid_argument("split_dataset: fewer than 3 positives");

  const std::size_t n = blocks.size();
  const double ratios[3] = {train_ratio, validation_ratio, test_ratio};
  std::size_t counts[3];
  double fractions[3];
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = ratios[k] * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(exact);
    fractions[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  // Largest remainder for the leftover blocks.
  while (assigned < n) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (fractions[k] > fractions[best]) best = k;
    }
    ++counts[best];
    fractions[best] = -1.0;
    ++assigned;
  }

  std::vector<std::size_t> order(n);
  for (std::size_t b = 0; b < n; ++b) order[b] = b;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<MatchExample> parts[3];
  std::size_t cursor = 0;
  for (int k = 0; k < 3; ++k) {
    for (std::size_t b = 0; b < counts[k]; ++b, ++cursor) {
      const auto [begin, end] = blocks[order[cursor]];
      for (std::size_t e = begin; e < end; ++e) parts[k].push_back(examples[e]);
    }
  }
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

}  // namespace fieldmatch
