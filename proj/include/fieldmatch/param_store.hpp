#pragma once

#include <map>
#include <string>

#include "fieldmatch/tensor.hpp"

namespace fieldmatch {

enum class ParamGroup { token_level, scale, field_level };

std::string param_group_name(ParamGroup g);
ParamGroup param_group_from_name(const std::string& name);

// Named, shaped parameters with gradient buffers and Adam state. Single
// writer; forward passes only read values.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    bool trainable = true;
    ParamGroup group = ParamGroup::token_level;
    // Adam state, lives here between steps; not checkpointed.
    Tensor m;
    Tensor v;
    std::int64_t step = 0;
  };

  Entry& create(const std::string& name, Tensor value, ParamGroup group, bool trainable = true);
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  const Tensor& value(const std::string& name) const { return entry(name).value; }
  Tensor& value(const std::string& name) { return entry(name).value; }

  void zero_grads();
  std::size_t size() const { return entries_.size(); }

  // Deterministic (name-sorted) iteration.
  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::int64_t parameter_count() const;

 private:
  std::map<std::string, Entry> entries_;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-group learning rates; defaults follow the reference configuration.
std::map<ParamGroup, double> default_group_learning_rates();

// One Adam update over all trainable parameters using each parameter's
// group learning rate. Throws if a trainable parameter's group has no rate.
void adam_step(ParamStore& store, const std::map<ParamGroup, double>& group_learning_rates,
               const AdamOptions& options = AdamOptions{});

// Checkpoint format: magic, version, parameter count, then per parameter
// (name, group, trainable, shape, raw little-endian float32 payload) in name
// order. Round-trips bit-exactly.
void save_checkpoint(const ParamStore& store, const std::string& path);
ParamStore load_checkpoint(const std::string& path);

}  // namespace fieldmatch
