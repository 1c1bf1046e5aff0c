#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fieldmatch {

// Flat key=value run configuration. Every key consumed anywhere in the
// pipeline is declared in a single registry; a file or override mentioning
// anything else is rejected outright.
class RunConfig {
 public:
  // Registry defaults only.
  RunConfig();

  static RunConfig from_file(const std::string& path,
                             const std::vector<std::string>& overrides = {});
  static RunConfig from_overrides(const std::vector<std::string>& overrides);

  // "key=value" form; unknown key or malformed text -> error.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& raw(const std::string& key) const;
  int int_of(const std::string& key) const;
  double double_of(const std::string& key) const;
  bool bool_of(const std::string& key) const;  // 0/1, true/false
  std::uint64_t seed() const;

  // Canonical sorted key=value text of the resolved configuration.
  std::string resolved() const;
  // FNV-1a hash of resolved(), 16 hex digits; stage outputs are addressed
  // by this.
  std::string fingerprint() const;

  // Extra fingerprint salt for derived runs (ablation variants, sweep
  // points) so their artifacts never collide with the base run's.
  std::string fingerprint_with(const std::string& salt) const;

  static const std::map<std::string, std::string>& registry();
  static void write_default_config(const std::string& path);

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(const std::string& text);

}  // namespace fieldmatch
