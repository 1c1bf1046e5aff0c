#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fieldmatch/param_store.hpp"
#include "fieldmatch/tensor.hpp"

namespace fieldmatch {

// Reverse-mode autodiff over a per-forward-pass tape. Node handles are plain
// ints; values are computed eagerly, gradients on backward(). Every op
// validates shapes and rejects non-finite outputs. All reductions run in a
// fixed left-to-right order, so identical inputs give identical bits.
class Tape {
 public:
  // Leaves.
  int constant(Tensor value);
  int input(Tensor value);  // differentiable leaf (for gradient-w.r.t.-input checks)
  int param(ParamStore& store, const std::string& name);

  // Elementwise and linear algebra.
  int add(int a, int b);                    // same shape
  int add_bias(int matrix, int bias);       // [n,c] + [c] broadcast over rows
  int mul(int a, int b);                    // elementwise
  int scale(int a, double factor);
  int matmul(int a, int b);                 // [n,k]x[k,m]
  int matmul_nt(int a, int b);              // [n,k]x[m,k]^T -> [n,m]
  int affine(int x, int weight, int bias);  // matmul + bias row

  // Lookups and shape plumbing.
  int embedding_gather(int table, const std::vector<int>& indices);  // -1 -> zero row
  int concat_rows(const std::vector<int>& pieces);
  int concat_cols(const std::vector<int>& pieces);
  int pick(int matrix, const std::vector<int>& column_per_row);  // [n,m] -> [n]

  // Nonlinearities and normalizations (softmax over the last axis).
  int softmax(int x);
  int masked_softmax(int scores, const std::vector<std::uint8_t>& key_mask);
  // Row-major [n,m] element mask; every row needs at least one valid entry.
  int masked_softmax_full(int scores, const std::vector<std::uint8_t>& element_mask);
  int leaky_relu(int x, double slope);
  int layer_norm(int x, int gamma, int beta, double epsilon = 1e-5);
  int logistic(int x);
  int log(int x);
  int row_l2_normalize(int x);

  // Reductions and losses.
  int sum_all(int x);
  int mean_all(int x);
  int cosine_similarity(int u, int v);  // vectors (or [1,d]) -> scalar
  // Mean over the batch of -[y log p + (1-y) log(1-p)], p clamped to
  // [1e-7, 1-1e-7].
  int binary_cross_entropy(int p, const std::vector<double>& labels);

  const Tensor& value(int id) const;
  const Tensor& grad(int id) const;  // valid after backward()

  // Seeds d(loss)/d(loss)=1, sweeps the tape in reverse, then accumulates
  // bound parameter leaf gradients into their ParamStore entries.
  void backward(int loss);

  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_ready = false;
    std::function<void(Tape&)> backprop;
    ParamStore::Entry* bound = nullptr;
  };

  int emit(Tensor value, const std::vector<int>& parents, std::function<void(Tape&)> backprop,
           const char* op);
  Tensor& grad_buf(int id);
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  std::vector<Node> nodes_;
};

// Scaled dot-product attention over key-masked positions, one [wq,wk,wv]
// triple per head, concatenated head contexts through an output projection.
// Masked keys receive exactly zero attention weight.
int multi_head_attention(Tape& tape, int x, const std::vector<std::array<int, 3>>& heads,
                         int output_weight, int output_bias,
                         const std::vector<std::uint8_t>& key_mask);

}  // namespace fieldmatch
