#include "fieldmatch/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fieldmatch {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::registry() {
  static const std::map<std::string, std::string> keys = {
      {"seed", "1"},
      // corpus synthesis
      {"n_solutions", "20"},
      {"n_companies", "2000"},
      {"n_industries", "8"},
      {"vocab_seed_words", "2000"},
      {"positives_per_solution", "8"},
      {"text_signal_strength", "0.9"},
      {"scale_signal_strength", "0.6"},
      {"missing_field_rate", "0.05"},
      {"missing_token_rate", "0.02"},
      // pairwise example construction
      {"negatives_per_positive", "4"},
      {"train_ratio", "0.7"},
      {"validation_ratio", "0.1"},
      {"test_ratio", "0.2"},
      // vocabulary
      {"min_count", "1"},
      // model dimensions (reference scale: 768-wide 12-layer encoders,
      // k=6 field layers, d_s=64)
      {"d_e", "64"},
      {"token_layers", "2"},
      {"heads", "4"},
      {"ff", "128"},
      {"max_len", "128"},
      {"field_layers", "2"},
      {"d_s", "32"},
      {"autodis_buckets", "8"},
      {"autodis_alpha", "1.0"},
      // contrastive pretraining
      {"tau_d", "0.2"},
      {"tau_a", "0.05"},
      {"r_t", "0.2"},
      {"r_f", "0.5"},
      {"pretrain_epochs", "3"},
      {"pretrain_batch", "16"},
      {"lr_pretrain", "5e-5"},
      {"use_pretrained", "1"},
      // supervised training
      {"batch_size", "32"},
      {"epochs", "4"},
      {"lr_token", "3e-5"},
      {"lr_scale", "5e-4"},
      {"lr_field", "5e-5"},
  };
  return keys;
}

RunConfig::RunConfig() : values_(registry()) {}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (registry().find(key) == registry().end()) {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  values_[key] = value;
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("config override '" + assignment + "' is not key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig RunConfig::from_file(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config '" + path + "' line " + std::to_string(line_no) +
                               ": expected key=value");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::runtime_error("config '" + path + "' line " + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  for (const auto& o : overrides) cfg.apply_override(o);
  return cfg;
}

RunConfig RunConfig::from_overrides(const std::vector<std::string>& overrides) {
  RunConfig cfg;
  for (const auto& o : overrides) cfg.apply_override(o);
  return cfg;
}

const std::string& RunConfig::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  return it->second;
}

int RunConfig::int_of(const std::string& key) const {
  const std::string& v = raw(key);
  try {
    std::size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' has non-integer value '" + v + "'");
  }
}

double RunConfig::double_of(const std::string& key) const {
  const std::string& v = raw(key);
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' has non-numeric value '" + v + "'");
  }
}

bool RunConfig::bool_of(const std::string& key) const {
  const std::string& v = raw(key);
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw std::invalid_argument("config: key '" + key + "' has non-boolean value '" + v + "'");
}

std::uint64_t RunConfig::seed() const {
  const std::string& v = raw("seed");
  try {
    return static_cast<std::uint64_t>(std::stoull(v));
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad seed '" + v + "'");
  }
}

std::string RunConfig::resolved() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << "=" << v << "\n";
  return out.str();
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

namespace {

std::string hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace

std::string RunConfig::fingerprint() const { return hex16(fnv1a64(resolved())); }

std::string RunConfig::fingerprint_with(const std::string& salt) const {
  return hex16(fnv1a64(resolved() + "salt=" + salt + "\n"));
}

void RunConfig::write_default_config(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write config file '" + path + "'");
  out << "# fieldmatch run configuration (desk-scale defaults)\n";
  out << "# reference-scale values from the deployed system: d_e matches the\n";
  out << "# pretrained encoder width, field_layers=6, d_s=64, batch_size=32,\n";
  out << "# epochs=4, lr_token=3e-5, lr_scale=5e-4, lr_field=5e-5,\n";
  out << "# tau_d=0.2, tau_a=0.05, r_t=0.2, r_f=0.5.\n";
  for (const auto& [k, v] : registry()) out << k << " = " << v << "\n";
}

}  // namespace fieldmatch
