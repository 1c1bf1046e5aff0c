#include "fieldmatch/param_store.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fieldmatch {

std::string param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::token_level: return "token_level";
    case ParamGroup::scale: return "scale";
    case ParamGroup::field_level: return "field_level";
  }
  throw std::logic_error("param_group_name: bad group");
}

ParamGroup param_group_from_name(const std::string& name) {
  if (name == "token_level") return ParamGroup::token_level;
  if (name == "scale") return ParamGroup::scale;
  if (name == "field_level") return ParamGroup::field_level;
  throw std::invalid_argument("unknown parameter group '" + name + "'");
}

ParamStore::Entry& ParamStore::create(const std::string& name, Tensor value, ParamGroup group,
                                      bool trainable) {
  if (entries_.count(name)) {
    throw std::invalid_argument("ParamStore: parameter '" + name + "' already exists");
  }
  Entry e;
  e.grad = Tensor(value.shape());
  e.m = Tensor(value.shape());
  e.v = Tensor(value.shape());
  e.value = std::move(value);
  e.group = group;
  e.trainable = trainable;
  return entries_.emplace(name, std::move(e)).first->second;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw std::out_of_range("ParamStore: unknown parameter '" + name + "'");
  }
  return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw std::out_of_range("ParamStore: unknown parameter '" + name + "'");
  }
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) e.grad.fill(0.0);
}

std::int64_t ParamStore::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

std::map<ParamGroup, double> default_group_learning_rates() {
  return {{ParamGroup::token_level, 3e-5},
          {ParamGroup::scale, 5e-4},
          {ParamGroup::field_level, 5e-5}};
}

void adam_step(ParamStore& store, const std::map<ParamGroup, double>& group_learning_rates,
               const AdamOptions& options) {
  for (auto& [name, e] : store.entries()) {
    if (!e.trainable) continue;
    auto lr_it = group_learning_rates.find(e.group);
    if (lr_it == group_learning_rates.end()) {
      throw std::invalid_argument("adam_step: no learning rate for group '" +
                                  param_group_name(e.group) + "' (parameter '" + name + "')");
    }
    const double lr = lr_it->second;
    e.step += 1;
    const double bc1 = 1.0 - std::pow(options.beta1, static_cast<double>(e.step));
    const double bc2 = 1.0 - std::pow(options.beta2, static_cast<double>(e.step));
    for (int i = 0; i < e.value.size(); ++i) {
      const double g = e.grad.at(i);
      e.m.at(i) = options.beta1 * e.m.at(i) + (1.0 - options.beta1) * g;
      e.v.at(i) = options.beta2 * e.v.at(i) + (1.0 - options.beta2) * g * g;
      const double m_hat = e.m.at(i) / bc1;
      const double v_hat = e.v.at(i) / bc2;
      e.value.at(i) -= lr * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  }
}

namespace {

constexpr char kMagic[4] = {'F', 'M', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32(std::ofstream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

float read_f32(std::ifstream& in) {
  const std::uint32_t bits = read_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, e] : store.entries()) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    out.put(static_cast<char>(e.trainable ? 1 : 0));
    out.put(static_cast<char>(e.group));
    write_u32(out, static_cast<std::uint32_t>(e.value.rank()));
    for (int d : e.value.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    for (int i = 0; i < e.value.size(); ++i) {
      write_f32(out, static_cast<float>(e.value.at(i)));
    }
  }
  if (!out) throw std::runtime_error("checkpoint write failed for '" + path + "'");
}

ParamStore load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint '" + path + "': bad magic");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint '" + path + "': unsupported version " +
                             std::to_string(version));
  }
  const std::uint32_t count = read_u32(in);
  ParamStore store;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const int trainable = in.get();
    const int group = in.get();
    if (!in || trainable < 0 || trainable > 1 || group < 0 || group > 2) {
      throw std::runtime_error("checkpoint '" + path + "': corrupt entry header");
    }
    const std::uint32_t rank = read_u32(in);
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(read_u32(in)));
    Tensor value(shape);
    for (int i = 0; i < value.size(); ++i) value.at(i) = static_cast<double>(read_f32(in));
    store.create(name, std::move(value), static_cast<ParamGroup>(group), trainable == 1);
  }
  return store;
}

}  // namespace fieldmatch
