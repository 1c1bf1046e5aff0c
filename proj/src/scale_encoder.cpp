#include "fieldmatch/scale_encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace fieldmatch {

namespace {

Tensor random_tensor(std::vector<int> shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (int i = 0; i < t.size(); ++i) t.at(i) = rng.normal(0.0, stddev);
  return t;
}

}  // namespace

void init_scale_encoder(ParamStore& store, const FieldSchema& schema,
                        const ScaleEncoderConfig& config, Rng& rng) {
  if (config.d_s < 1 || config.buckets < 2) {
    throw std::invalid_argument("ScaleEncoderConfig: d_s must be >= 1 and buckets >= 2");
  }
  const int d = config.d_s;
  const int H = config.buckets;
  for (const auto& [name, cardinality] : schema.categorical_fields) {
    store.create("scale.cat." + name + ".E", random_tensor({cardinality, d}, 0.2, rng),
                 ParamGroup::scale);
  }
  for (const auto& name : schema.numeric_fields) {
    store.create("scale.num." + name + ".w", random_tensor({1, H}, 1.0, rng), ParamGroup::scale);
    store.create("scale.num." + name + ".W", random_tensor({H, H}, 0.3, rng), ParamGroup::scale);
    store.create("scale.num." + name + ".ME", random_tensor({H, d}, 0.5, rng), ParamGroup::scale);
  }
  const int G = static_cast<int>(schema.categorical_fields.size());
  const int N = static_cast<int>(schema.numeric_fields.size());
  const int in = (G + N) * d;
  const int hidden = 2 * d;
  store.create("scale.mlp.W1", random_tensor({in, hidden}, 1.0 / std::sqrt(in), rng),
               ParamGroup::scale);
  store.create("scale.mlp.b1", Tensor({hidden}), ParamGroup::scale);
  store.create("scale.mlp.W2", random_tensor({hidden, d}, 1.0 / std::sqrt(hidden), rng),
               ParamGroup::scale);
  store.create("scale.mlp.b2", Tensor({d}), ParamGroup::scale);
  store.create("scale.head.w", random_tensor({d, 1}, 0.2, rng), ParamGroup::scale);
  store.create("scale.head.b", Tensor({1}), ParamGroup::scale);

  Tensor mean({N});
  Tensor stddev({N});
  stddev.fill(1.0);
  store.create("scale.norm.mean", std::move(mean), ParamGroup::scale, /*trainable=*/false);
  store.create("scale.norm.std", std::move(stddev), ParamGroup::scale, /*trainable=*/false);
}

void fit_standardization(ParamStore& store, const FieldSchema& schema,
                         const std::vector<const CompanyRecord*>& companies) {
  if (companies.empty()) throw std::invalid_argument("fit_standardization: no companies");
  Tensor& mean = store.value("scale.norm.mean");
  Tensor& stddev = store.value("scale.norm.std");
  for (std::size_t j = 0; j < schema.numeric_fields.size(); ++j) {
    const auto& name = schema.numeric_fields[j];
    double sum = 0.0;
    double count = 0.0;
    for (const auto* c : companies) {
      auto it = c->numeric.find(name);
      if (it == c->numeric.end()) continue;
      sum += it->second;
      count += 1.0;
    }
    if (count == 0.0) {
      throw std::invalid_argument("fit_standardization: no values for numeric field '" + name +
                                  "'");
    }
    const double mu = sum / count;
    double sq = 0.0;
    for (const auto* c : companies) {
      auto it = c->numeric.find(name);
      if (it == c->numeric.end()) continue;
      sq += (it->second - mu) * (it->second - mu);
    }
    double sigma = std::sqrt(sq / count);
    if (sigma < 1e-12) sigma = 1.0;  // constant feature degenerates to centering
    mean.at(static_cast<int>(j)) = mu;
    stddev.at(static_cast<int>(j)) = sigma;
  }
}

int encode_categorical(Tape& tape, ParamStore& store, const std::string& field, int index,
                       int cardinality) {
  if (index < 0 || index >= cardinality) {
    throw std::out_of_range("encode_categorical: index " + std::to_string(index) +
                            " out of range [0," + std::to_string(cardinality) + ") for field '" +
                            field + "'");
  }
  const int table = tape.param(store, "scale.cat." + field + ".E");
  return tape.embedding_gather(table, {index});
}

int autodis_encode(Tape& tape, ParamStore& store, const std::string& field, int value_node,
                   const ScaleEncoderConfig& config) {
  const int w = tape.param(store, "scale.num." + field + ".w");
  const int W = tape.param(store, "scale.num." + field + ".W");
  const int ME = tape.param(store, "scale.num." + field + ".ME");
  const int pre = tape.matmul(value_node, w);                    // [1,1] x [1,H]
  const int h = tape.leaky_relu(pre, config.leaky_slope);
  const int projected = tape.matmul_nt(h, W);                    // h W^T, column convention
  const int v_tilde = tape.add(projected, tape.scale(h, config.alpha));
  const int v_hat = tape.softmax(v_tilde);
  return tape.matmul(v_hat, ME);                                 // convex combination of rows
}

int fuse_scale(Tape& tape, ParamStore& store, const std::vector<int>& embeddings,
               const ScaleEncoderConfig& config) {
  if (embeddings.empty()) throw std::invalid_argument("fuse_scale: missing embeddings");
  for (int e : embeddings) {
    if (tape.value(e).rank() != 2 || tape.value(e).rows() != 1 ||
        tape.value(e).cols() != config.d_s) {
      throw std::invalid_argument("fuse_scale: every embedding must be [1, d_s]");
    }
  }
  const int joined = embeddings.size() == 1 ? embeddings[0] : tape.concat_cols(embeddings);
  const int h = tape.leaky_relu(
      tape.affine(joined, tape.param(store, "scale.mlp.W1"), tape.param(store, "scale.mlp.b1")),
      config.leaky_slope);
  return tape.affine(h, tape.param(store, "scale.mlp.W2"), tape.param(store, "scale.mlp.b2"));
}

int scale_score(Tape& tape, ParamStore& store, int scale_vector) {
  return tape.logistic(tape.affine(scale_vector, tape.param(store, "scale.head.w"),
                                   tape.param(store, "scale.head.b")));
}

int encode_company_scale(Tape& tape, ParamStore& store, const FieldSchema& schema,
                         const ScaleEncoderConfig& config, const CompanyRecord& company) {
  std::vector<int> embeddings;
  for (const auto& [name, cardinality] : schema.categorical_fields) {
    auto it = company.categorical.find(name);
    if (it == company.categorical.end()) {
      throw std::invalid_argument("encode_company_scale: company '" + company.id +
                                  "' lacks categorical field '" + name + "'");
    }
    embeddings.push_back(encode_categorical(tape, store, name, it->second, cardinality));
  }
  const Tensor& mean = store.value("scale.norm.mean");
  const Tensor& stddev = store.value("scale.norm.std");
  for (std::size_t j = 0; j < schema.numeric_fields.size(); ++j) {
    const auto& name = schema.numeric_fields[j];
    auto it = company.numeric.find(name);
    if (it == company.numeric.end()) {
      throw std::invalid_argument("encode_company_scale: company '" + company.id +
                                  "' lacks numeric field '" + name + "'");
    }
    const double standardized =
        (it->second - mean.at(static_cast<int>(j))) / stddev.at(static_cast<int>(j));
    const int value_node = tape.constant(Tensor({1, 1}, {standardized}));
    embeddings.push_back(autodis_encode(tape, store, name, value_node, config));
  }
  return fuse_scale(tape, store, embeddings, config);
}

}  // namespace fieldmatch
