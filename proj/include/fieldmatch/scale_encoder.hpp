#pragma once

#include <string>
#include <vector>

#include "fieldmatch/param_store.hpp"
#include "fieldmatch/rng.hpp"
#include "fieldmatch/schema.hpp"
#include "fieldmatch/tape.hpp"

namespace fieldmatch {

struct ScaleEncoderConfig {
  int d_s = 32;            // scale embedding size (reference scale uses 64)
  int buckets = 8;         // AutoDis buckets per numeric field
  double alpha = 1.0;      // skip-connection coefficient
  double leaky_slope = 0.01;
};

// Parameters live under "scale." in the store:
//   scale.cat.<field>.E   [cardinality, d_s]   look-up embeddings
//   scale.num.<field>.w   [1, H]               bucket projections
//   scale.num.<field>.W   [H, H]
//   scale.num.<field>.ME  [H, d_s]             meta-embeddings
//   scale.mlp.*, scale.head.*                   fusion MLP and score head
//   scale.norm.mean/std   [N]                  input standardization (frozen)
void init_scale_encoder(ParamStore& store, const FieldSchema& schema,
                        const ScaleEncoderConfig& config, Rng& rng);

// Per-field training-split statistics for numeric standardization.
void fit_standardization(ParamStore& store, const FieldSchema& schema,
                         const std::vector<const CompanyRecord*>& companies);

// Row of the field's embedding matrix; errors on out-of-range indices.
int encode_categorical(Tape& tape, ParamStore& store, const std::string& field, int index,
                       int cardinality);

// Soft discretization: h = LeakyReLU(w v), v~ = W h + alpha h,
// v^ = softmax(v~), e = v^ . ME. `value_node` is a [1,1] tape node carrying
// the (standardized) scalar.
int autodis_encode(Tape& tape, ParamStore& store, const std::string& field, int value_node,
                   const ScaleEncoderConfig& config);

// Two-layer MLP over the concatenated embeddings -> c^s of size d_s.
int fuse_scale(Tape& tape, ParamStore& store, const std::vector<int>& embeddings,
               const ScaleEncoderConfig& config);

// P_scale = logistic(affine(c^s)), a [1,1] node.
int scale_score(Tape& tape, ParamStore& store, int scale_vector);

// Full path for one company: categorical lookups + standardized AutoDis
// embeddings fused into c^s. Throws if the record lacks a declared field.
int encode_company_scale(Tape& tape, ParamStore& store, const FieldSchema& schema,
                         const ScaleEncoderConfig& config, const CompanyRecord& company);

}  // namespace fieldmatch
