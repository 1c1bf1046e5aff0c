#include "fieldmatch/tape.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace fieldmatch {

namespace {

[[noreturn]] void fail(const char* op, const std::string& msg) {
  throw std::invalid_argument(std::string(op) + ": " + msg);
}

void require(bool cond, const char* op, const std::string& msg) {
  if (!cond) fail(op, msg);
}

constexpr double kBceClamp = 1e-7;
constexpr double kNormFloor = 1e-30;

}  // namespace

int Tape::emit(Tensor value, const std::vector<int>& parents, std::function<void(Tape&)> backprop,
               const char* op) {
  if (!value.all_finite()) {
    fail(op, "non-finite value in output of shape " + Tensor::shape_string(value.shape()));
  }
  Node node;
  node.value = std::move(value);
  for (int p : parents) {
    if (nodes_[static_cast<std::size_t>(p)].requires_grad) {
      node.requires_grad = true;
      break;
    }
  }
  if (node.requires_grad) node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad_ready) {
    n.grad = Tensor(n.value.shape());
    n.grad_ready = true;
  }
  return n.grad;
}

const Tensor& Tape::value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

const Tensor& Tape::grad(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad_ready) throw std::logic_error("Tape::grad: no gradient at this node");
  return n.grad;
}

int Tape::constant(Tensor value) {
  if (!value.all_finite()) fail("constant", "non-finite input");
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::input(Tensor value) {
  if (!value.all_finite()) fail("input", "non-finite input");
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::param(ParamStore& store, const std::string& name) {
  auto& entry = store.entry(name);
  Node node;
  node.value = entry.value;
  node.requires_grad = entry.trainable;
  node.bound = &entry;
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::backward(int loss) {
  require(value(loss).size() == 1, "backward", "loss must be a scalar");
  grad_buf(loss).at(0) = 1.0;
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !n.grad_ready || !n.backprop) continue;
    n.backprop(*this);
  }
  for (auto& n : nodes_) {
    if (n.bound != nullptr && n.grad_ready && n.bound->trainable) {
      for (int i = 0; i < n.grad.size(); ++i) n.bound->grad.at(i) += n.grad.at(i);
    }
  }
}

int Tape::add(int a, int b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require(va.same_shape(vb), "add",
          "shape mismatch " + Tensor::shape_string(va.shape()) + " vs " +
              Tensor::shape_string(vb.shape()));
  Tensor out(va.shape());
  for (int i = 0; i < va.size(); ++i) out.at(i) = va.at(i) + vb.at(i);
  const int self = node_count();
  return emit(std::move(out), {a, b},
              [self, a, b](Tape& t) {
                const Tensor& g = t.grad(self);
                Tensor& ga = t.grad_buf(a);
                Tensor& gb = t.grad_buf(b);
                for (int i = 0; i < g.size(); ++i) {
                  ga.at(i) += g.at(i);
                  gb.at(i) += g.at(i);
                }
              },
              "add");
}

int Tape::add_bias(int matrix, int bias) {
  const Tensor& vm = value(matrix);
  const Tensor& vb = value(bias);
  require(vm.rank() == 2, "add_bias", "matrix must be rank 2");
  require(vb.rank() == 1 && vb.size() == vm.cols(), "add_bias",
          "bias length " + std::to_string(vb.size()) + " must equal column count " +
              std::to_string(vm.cols()));
  Tensor out(vm.shape());
  for (int r = 0; r < vm.rows(); ++r) {
    for (int c = 0; c < vm.cols(); ++c) out.at(r, c) = vm.at(r, c) + vb.at(c);
  }
  const int self = node_count();
  return emit(std::move(out), {matrix, bias},
              [self, matrix, bias](Tape& t) {
                const Tensor& g = t.grad(self);
                Tensor& gm = t.grad_buf(matrix);
                Tensor& gb = t.grad_buf(bias);
                for (int r = 0; r < g.rows(); ++r) {
                  for (int c = 0; c < g.cols(); ++c) {
                    gm.at(r, c) += g.at(r, c);
                    gb.at(c) += g.at(r, c);
                  }
                }
              },
              "add_bias");
}

int Tape::mul(int a, int b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require(va.same_shape(vb), "mul",
          "shape mismatch " + Tensor::shape_string(va.shape()) + " vs " +
              Tensor::shape_string(vb.shape()));
  Tensor out(va.shape());
  for (int i = 0; i < va.size(); ++i) out.at(i) = va.at(i) * vb.at(i);
  const int self = node_count();
  return emit(std::move(out), {a, b},
              [self, a, b](Tape& t) {
                const Tensor& g = t.grad(self);
                const Tensor& va = t.value(a);
                const Tensor& vb = t.value(b);
                Tensor& ga = t.grad_buf(a);
                Tensor& gb = t.grad_buf(b);
                for (int i = 0; i < g.size(); ++i) {
                  ga.at(i) += g.at(i) * vb.at(i);
                  gb.at(i) += g.at(i) * va.at(i);
                }
              },
              "mul");
}

int Tape::scale(int a, double factor) {
  const Tensor& va = value(a);
  require(std::isfinite(factor), "scale", "factor must be finite");
  Tensor out(va.shape());
  for (int i = 0; i < va.size(); ++i) out.at(i) = va.at(i) * factor;
  const int self = node_count();
  return emit(std::move(out), {a},
              [self, a, factor](Tape& t) {
                const Tensor& g = t.grad(self);
                Tensor& ga = t.grad_buf(a);
                for (int i = 0; i < g.size(); ++i) ga.at(i) += g.at(i) * factor;
              },
              "scale");
}

int Tape::matmul(int a, int b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require(va.rank() == 2 && vb.rank() == 2, "matmul", "operands must be rank 2");
  require(va.cols() == vb.rows(), "matmul",
          "inner dimensions differ: " + Tensor::shape_string(va.shape()) + " x " +
              Tensor::shape_string(vb.shape()));
  const int n = va.rows(), k = va.cols(), m = vb.cols();
  Tensor out({n, m});
  for (int i = 0; i < n; ++i) {
    for (int p = 0; p < k; ++p) {
      const double aip = va.at(i, p);
      if (aip == 0.0) continue;
      for (int j = 0; j < m; ++j) out.at(i, j) += aip * vb.at(p, j);
    }
  }
  const int self = node_count();
  return emit(std::move(out), {a, b},
              [self, a, b](Tape& t) {
                const Tensor& g = t.grad(self);
                const Tensor& va = t.value(a);
                const Tensor& vb = t.value(b);
                Tensor& ga = t.grad_buf(a);
                Tensor& gb = t.grad_buf(b);
                const int n = va.rows(), k = va.cols(), m = vb.cols();
                // dA += g * B^T
                for (int i = 0; i < n; ++i) {
                  for (int j = 0; j < m; ++j) {
                    const double gij = g.at(i, j);
                    if (gij == 0.0) continue;
                    for (int p = 0; p < k; ++p) ga.at(i, p) += gij * vb.at(p, j);
                  }
                }
                // dB += A^T * g
                for (int i = 0; i < n; ++i) {
                  for (int p = 0; p < k; ++p) {
                    const double aip = va.at(i, p);
                    if (aip == 0.0) continue;
                    for (int j = 0; j < m; ++j) gb.at(p, j) += aip * g.at(i, j);
                  }
                }
              },
              "matmul");
}

int Tape::matmul_nt(int a, int b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require(va.rank() == 2 && vb.rank() == 2, "matmul_nt", "operands must be rank 2");
  require(va.cols() == vb.cols(), "matmul_nt",
          "inner dimensions differ: " + Tensor::shape_string(va.shape()) + " x " +
              Tensor::shape_string(vb.shape()) + "^T");
  const int n = va.rows(), k = va.cols(), m = vb.rows();
  Tensor out({n, m});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += va.at(i, p) * vb.at(j, p);
      out.at(i, j) = acc;
    }
  }
  const int self = node_count();
  return emit(std::move(out), {a, b},
              [self, a, b](Tape& t) {
                const Tensor& g = t.grad(self);
                const Tensor& va = t.value(a);
                const Tensor& vb = t.value(b);
                Tensor& ga = t.grad_buf(a);
                Tensor& gb = t.grad_buf(b);
                const int n = va.rows(), k = va.cols(), m = vb.rows();
                for (int i = 0; i < n; ++i) {
                  for (int j = 0; j < m; ++j) {
                    const double gij = g.at(i, j);
                    if (gij == 0.0) continue;
                    for (int p = 0; p < k; ++p) {
                      ga.at(i, p) += gij * vb.at(j, p);
                      gb.at(j, p) += gij * va.at(i, p);
                    }
                  }
                }
              },
              "matmul_nt");
}

int Tape::affine(int x, int weight, int bias) { return add_bias(matmul(x, weight), bias); }

int Tape::embedding_gather(int table, const std::vector<int>& indices) {
  const Tensor& vt = value(table);
  require(vt.rank() == 2, "embedding_gather", "table must be rank 2");
  require(!indices.empty(), "embedding_gather", "empty index list");
  const int d = vt.cols();
  Tensor out({static_cast<int>(indices.size()), d});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int idx = indices[r];
    if (idx < 0) continue;  // convention: negative index selects a zero row
    require(idx < vt.rows(), "embedding_gather",
            "index " + std::to_string(idx) + " out of range for " +
                Tensor::shape_string(vt.shape()));
    for (int c = 0; c < d; ++c) out.at(static_cast<int>(r), c) = vt.at(idx, c);
  }
  const int self = node_count();
  return emit(std::move(out), {table},
              [self, table, indices](Tape& t) {
                const Tensor& g = t.grad(self);
                Tensor& gt = t.grad_buf(table);
                const int d = g.cols();
                for (std::size_t r = 0; r < indices.size(); ++r) {
                  const int idx = indices[r];
                  if (idx < 0) continue;
                  for (int c = 0; c < d; ++c) gt.at(idx, c) += g.at(static_cast<int>(r), c);
                }
              },
              "embedding_gather");
}

int Tape::concat_rows(const std::vector<int>& pieces) {
  require(!pieces.empty(), "concat_rows", "no pieces");
  int rows = 0;
  const int cols = value(pieces[0]).cols();
  for (int p : pieces) {
    const Tensor& v = value(p);
    require(v.rank() == 2, "concat_rows", "pieces must be rank 2");
    require(v.cols() == cols, "concat_rows", "column counts differ");
    rows += v.rows();
  }
  Tensor out({rows, cols});
  int r0 = 0;
  for (int p : pieces) {
    const Tensor& v = value(p);
    for (int r = 0; r < v.rows(); ++r) {
      for (int c = 0; c < cols; ++c) out.at(r0 + r, c) = v.at(r, c);
    }
    r0 += v.rows();
  }
  const int self = node_count();
  return emit(std::move(out), pieces,
              [self, pieces](Tape& t) {
                const Tensor& g = t.grad(self);
                int r0 = 0;
                for (int p : pieces) {
                  Tensor& gp = t.grad_buf(p);
                  for (int r = 0; r < gp.rows(); ++r) {
                    for (int c = 0; c < gp.cols(); ++c) gp.at(r, c) += g.at(r0 + r, c);
                  }
                  r0 += gp.rows();
                }
              },
              "concat_rows");
}

int Tape::concat_cols(const std::vector<int>& pieces) {
  require(!pieces.empty(), "concat_cols", "no pieces");
  int cols = 0;
  const int rows = value(pieces[0]).rows();
  for (int p : pieces) {
    const Tensor& v = value(p);
    require(v.rank() == 2, "concat_cols", "pieces must be rank 2");
    require(v.rows() == rows, "concat_cols", "row counts differ");
    cols += v.cols();
  }
  Tensor out({rows, cols});
  int c0 = 0;
  for (int p : pieces) {
    const Tensor& v = value(p);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < v.cols(); ++c) out.at(r, c0 + c) = v.at(r, c);
    }
    c0 += v.cols();
  }
  const int self = node_count();
  return emit(std::move(out), pieces,
              [self, pieces](Tape& t) {
                const Tensor& g = t.grad(self);
                int c0 = 0;
                for (int p : pieces) {
                  Tensor& gp = t.grad_buf(p);
                  for (int r = 0; r < gp.rows(); ++r) {
                    for (int c = 0; c < gp.cols(); ++c) gp.at(r, c) += g.at(r, c0 + c);
                  }
                  c0 += gp.cols();
                }
              },
              "concat_cols");
}

int Tape::pick(int matrix, const std::vector<int>& column_per_row) {
  const Tensor& vm = value(matrix);
  require(vm.rank() == 2, "pick", "matrix must be rank 2");
  require(static_cast<int>(column_per_row.size()) == vm.rows(), "pick",
          "need one column per row");
  Tensor out({vm.rows()});
  for (int r = 0; r < vm.rows(); ++r) {
    const int c = column_per_row[static_cast<std::size_t>(r)];
    require(c >= 0 && c < vm.cols(), "pick", "column " + std::to_string(c) + " out of range");
    out.at(r) = vm.at(r, c);
  }
  const int self = node_count();
  return emit(std::move(out), {matrix},
              [self, matrix, column_per_row](Tape& t) {
                const Tensor& g = t.grad(self);
                Tensor& gm = t.grad_buf(matrix);
                for (int r = 0; r < g.size(); ++r) {
                  gm.at(r, column_per_row[static_cast<std::size_t>(r)]) += g.at(r);
                }
              },
              "pick");
}

namespace {

// Shared row-softmax kernel; a null mask means every column is valid.
void softmax_rows(const Tensor& x, const std::vector<std::uint8_t>* mask, Tensor& out) {
  const int rows = x.rank() == 2 ? x.rows() : 1;
  const int cols = x.rank() == 2 ? x.cols() : x.size();
  for (int r = 0; r < rows; ++r) {
    const double* xr = x.data() + static_cast<std::size_t>(r) * cols;
    double* yr = out.data() + static_cast<std::size_t>(r) * cols;
    double max_v = -HUGE_VAL;
    for (int c = 0; c < cols; ++c) {
      if (mask != nullptr && !(*mask)[static_cast<std::size_t>(c)]) continue;
      max_v = std::max(max_v, xr[c]);
    }
    double denom = 0.0;
    for (int c = 0; c < cols; ++c) {
      if (mask != nullptr && !(*mask)[static_cast<std::size_t>(c)]) {
        yr[c] = 0.0;
        continue;
      }
      yr[c] = std::exp(xr[c] - max_v);
      denom += yr[c];
    }
    for (int c = 0; c < cols; ++c) yr[c] /= denom;
  }
}

void softmax_rows_backward(const Tensor& y, const Tensor& g, Tensor& gx) {
  const int rows = y.rank() == 2 ? y.rows() : 1;
  const int cols = y.rank() == 2 ? y.cols() : y.size();
  for (int r = 0; r < rows; ++r) {
    const double* yr = y.data() + static_cast<std::size_t>(r) * cols;
    const double* gr = g.data() + static_cast<std::size_t>(r) * cols;
    double* gxr = gx.data() + static_cast<std::size_t>(r) * cols;
    double dot = 0.0;
    for (int c = 0; c < cols; ++c) dot += yr[c] * gr[c];
    for (int c = 0; c < cols; ++c) gxr[c] += yr[c] * (gr[c] - dot);
  }
}

}  // namespace

int Tape::softmax(int x) {
  const Tensor& vx = value(x);
  require(vx.rank() <= 2, "softmax", "rank must be 1 or 2");
  Tensor out(vx.shape());
  softmax_rows(vx, nullptr, out);
  const int self = node_count();
  return emit(std::move(out), {x},
              [self, x](Tape& t) {
                softmax_rows_backward(t.value(self), t.grad(self), t.grad_buf(x));
              },
              "softmax");
}

int Tape::masked_softmax(int scores, const std::vector<std::uint8_t>& key_mask) {
  const Tensor& vx = value(scores);
  require(vx.rank() == 2, "masked_softmax", "scores must be rank 2");
  require(static_cast<int>(key_mask.size()) == vx.cols(), "masked_softmax",
          "mask length must equal column count");
  bool any_valid = false;
  for (auto m : key_mask) any_valid |= (m != 0);
  require(any_valid, "masked_softmax", "all keys masked");
  Tensor out(vx.shape());
  softmax_rows(vx, &key_mask, out);
  const int self = node_count();
  return emit(std::move(out), {scores},
              [self, scores](Tape& t) {
                // Masked outputs are exactly zero, so the generic softmax
                // backward already sends no gradient to masked columns.
                softmax_rows_backward(t.value(self), t.grad(self), t.grad_buf(scores));
              },
              "masked_softmax");
}

int Tape::masked_softmax_full(int scores, const std::vector<std::uint8_t>& element_mask) {
  const Tensor& vx = value(scores);
  require(vx.rank() == 2, "masked_softmax_full", "scores must be rank 2");
  require(static_cast<int>(element_mask.size()) == vx.size(), "masked_softmax_full",
          "mask must cover every element");
  const int rows = vx.rows(), cols = vx.cols();
  Tensor out(vx.shape());
  for (int r = 0; r < rows; ++r) {
    const std::uint8_t* mr = element_mask.data() + static_cast<std::size_t>(r) * cols;
    double max_v = -HUGE_VAL;
    for (int c = 0; c < cols; ++c) {
      if (mr[c]) max_v = std::max(max_v, vx.at(r, c));
    }
    require(max_v != -HUGE_VAL, "masked_softmax_full", "row " + std::to_string(r) + " fully masked");
    double denom = 0.0;
    for (int c = 0; c < cols; ++c) {
      if (!mr[c]) {
        out.at(r, c) = 0.0;
        continue;
      }
      out.at(r, c) = std::exp(vx.at(r, c) - max_v);
      denom += out.at(r, c);
    }
    for (int c = 0; c < cols; ++c) out.at(r, c) /= denom;
  }
  const int self = node_count();
  return emit(std::move(out), {scores},
              [self, scores](Tape& t) {
                softmax_rows_backward(t.value(self), t.grad(self), t.grad_buf(scores));
              },
              "masked_softmax_full");
}

int Tape::leaky_relu(int x, double slope) {
  const Tensor& vx = value(x);
  Tensor out(vx.shape());
  for (int i = 0; i < vx.size(); ++i) {
    out.at(i) = vx.at(i) > 0.0 ? vx.at(i) : slope * vx.at(i);
  }
  const int self = node_count();
  return emit(std::move(out), {x},
              [self, x, slope](Tape& t) {
                const Tensor& g = t.grad(self);
                const Tensor& vx = t.value(x);
                Tensor& gx = t.grad_buf(x);
                for (int i = 0; i < g.size(); ++i) {
                  gx.at(i) += g.at(i) * (vx.at(i) > 0.0 ? 1.0 : slope);
                }
              },
              "leaky_relu");
}

int Tape::layer_norm(int x, int gamma, int beta, double epsilon) {
  const Tensor& vx = value(x);
  const Tensor& vg = value(gamma);
  const Tensor& vb = value(beta);
  require(vx.rank() == 2, "layer_norm", "input must be rank 2");
  require(vg.rank() == 1 && vg.size() == vx.cols(), "layer_norm", "gamma size mismatch");
  require(vb.rank() == 1 && vb.size() == vx.cols(), "layer_norm", "beta size mismatch");
  const int rows = vx.rows(), cols = vx.cols();
  Tensor out(vx.shape());
  Tensor x_hat(vx.shape());
  std::vector<double> inv_std(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += vx.at(r, c);
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double d = vx.at(r, c) - mean;
      var += d * d;
    }
    var /= cols;
    const double inv = 1.0 / std::sqrt(var + epsilon);
    inv_std[static_cast<std::size_t>(r)] = inv;
    for (int c = 0; c < cols; ++c) {
      x_hat.at(r, c) = (vx.at(r, c) - mean) * inv;
      out.at(r, c) = vg.at(c) * x_hat.at(r, c) + vb.at(c);
    }
  }
  const int self = node_count();
  auto x_hat_copy = std::make_shared<Tensor>(std::move(x_hat));
  auto inv_copy = std::make_shared<std::vector<double>>(std::move(inv_std));
  return emit(std::move(out), {x, gamma, beta},
              [self, x, gamma, beta, x_hat_copy, inv_copy](Tape& t) {
                const Tensor& g = t.grad(self);
                const Tensor& vg = t.value(gamma);
                Tensor& gx = t.grad_buf(x);
                Tensor& gg = t.grad_buf(gamma);
                Tensor& gb = t.grad_buf(beta);
                const Tensor& xh = *x_hat_copy;
                const int rows = g.rows(), cols = g.cols();
                for (int r = 0; r < rows; ++r) {
                  double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                  for (int c = 0; c < cols; ++c) {
                    const double dxh = g.at(r, c) * vg.at(c);
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xh.at(r, c);
                  }
                  mean_dxhat /= cols;
                  mean_dxhat_xhat /= cols;
                  const double inv = (*inv_copy)[static_cast<std::size_t>(r)];
                  for (int c = 0; c < cols; ++c) {
                    const double dxh = g.at(r, c) * vg.at(c);
                    gx.at(r, c) += (dxh - mean_dxhat - xh.at(r, c) * mean_dxhat_xhat) * inv;
                    gg.at(c) += g.at(r, c) * xh.at(r, c);
                    gb.at(c) += g.at(r, c);
                  }
                }
              },
              "layer_norm");
}

int Tape::logistic(int x) {
  const Tensor& vx = value(x);
  Tensor out(vx.shape());
  for (int i = 0; i < vx.size(); ++i) out.at(i) = 1.0 / (1.0 + std::exp(-vx.at(i)));
  const int self = node_count();
  return emit(std::move(out), {x},
              [self, x](Tape& t) {
                const Tensor& g = t.grad(self);
                const Tensor& y = t.value(self);
                Tensor& gx = t.grad_buf(x);
                for (int i = 0; i < g.size(); ++i) {
                  gx.at(i) += g.at(i) * y.at(i) * (1.0 - y.at(i));
                }
              },
              "logistic");
}

int Tape::log(int x) {
  const Tensor& vx = value(x);
  for (int i = 0; i < vx.size(); ++i) {
    require(vx.at(i) > 0.0, "log", "non-positive input");
  }
  Tensor out(vx.shape());
  for (int i = 0; i < vx.size(); ++i) out.at(i) = std::log(vx.at(i));
  const int self = node_count();
  return emit(std::move(out), {x},
              [self, x](Tape& t) {
                const Tensor& g = t.grad(self);
                const Tensor& vx = t.value(x);
                Tensor& gx = t.grad_buf(x);
                for (int i = 0; i < g.size(); ++i) gx.at(i) += g.at(i) / vx.at(i);
              },
              "log");
}

int Tape::row_l2_normalize(int x) {
  const Tensor& vx = value(x);
  require(vx.rank() == 2, "row_l2_normalize", "input must be rank 2");
  const int rows = vx.rows(), cols = vx.cols();
  Tensor out(vx.shape());
  std::vector<double> norms(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (int c = 0; c < cols; ++c) sq += vx.at(r, c) * vx.at(r, c);
    const double n = std::sqrt(sq);
    require(n > kNormFloor, "row_l2_normalize", "zero-norm row " + std::to_string(r));
    norms[static_cast<std::size_t>(r)] = n;
    for (int c = 0; c < cols; ++c) out.at(r, c) = vx.at(r, c) / n;
  }
  const int self = node_count();
  auto norms_copy = std::make_shared<std::vector<double>>(std::move(norms));
  return emit(std::move(out), {x},
              [self, x, norms_copy](Tape& t) {
                const Tensor& g = t.grad(self);
                const Tensor& y = t.value(self);
                Tensor& gx = t.grad_buf(x);
                const int rows = g.rows(), cols = g.cols();
                for (int r = 0; r < rows; ++r) {
                  double dot = 0.0;
                  for (int c = 0; c < cols; ++c) dot += y.at(r, c) * g.at(r, c);
                  const double inv = 1.0 / (*norms_copy)[static_cast<std::size_t>(r)];
                  for (int c = 0; c < cols; ++c) {
                    gx.at(r, c) += (g.at(r, c) - y.at(r, c) * dot) * inv;
                  }
                }
              },
              "row_l2_normalize");
}

int Tape::sum_all(int x) {
  const Tensor& vx = value(x);
  double acc = 0.0;
  for (int i = 0; i < vx.size(); ++i) acc += vx.at(i);
  const int self = node_count();
  return emit(Tensor::scalar(acc), {x},
              [self, x](Tape& t) {
                const double g = t.grad(self).at(0);
                Tensor& gx = t.grad_buf(x);
                for (int i = 0; i < gx.size(); ++i) gx.at(i) += g;
              },
              "sum_all");
}

int Tape::mean_all(int x) {
  const Tensor& vx = value(x);
  double acc = 0.0;
  for (int i = 0; i < vx.size(); ++i) acc += vx.at(i);
  const double inv_n = 1.0 / vx.size();
  const int self = node_count();
  return emit(Tensor::scalar(acc * inv_n), {x},
              [self, x, inv_n](Tape& t) {
                const double g = t.grad(self).at(0) * inv_n;
                Tensor& gx = t.grad_buf(x);
                for (int i = 0; i < gx.size(); ++i) gx.at(i) += g;
              },
              "mean_all");
}

int Tape::cosine_similarity(int u, int v) {
  const Tensor& vu = value(u);
  const Tensor& vv = value(v);
  require(vu.size() == vv.size(), "cosine_similarity", "length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (int i = 0; i < vu.size(); ++i) {
    dot += vu.at(i) * vv.at(i);
    nu += vu.at(i) * vu.at(i);
    nv += vv.at(i) * vv.at(i);
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  require(nu > kNormFloor && nv > kNormFloor, "cosine_similarity", "zero-norm operand");
  const double cos_uv = dot / (nu * nv);
  const int self = node_count();
  return emit(Tensor::scalar(cos_uv), {u, v},
              [self, u, v, nu, nv, cos_uv](Tape& t) {
                const double g = t.grad(self).at(0);
                const Tensor& vu = t.value(u);
                const Tensor& vv = t.value(v);
                Tensor& gu = t.grad_buf(u);
                Tensor& gv = t.grad_buf(v);
                for (int i = 0; i < vu.size(); ++i) {
                  gu.at(i) += g * (vv.at(i) / (nu * nv) - cos_uv * vu.at(i) / (nu * nu));
                  gv.at(i) += g * (vu.at(i) / (nu * nv) - cos_uv * vv.at(i) / (nv * nv));
                }
              },
              "cosine_similarity");
}

int Tape::binary_cross_entropy(int p, const std::vector<double>& labels) {
  const Tensor& vp = value(p);
  require(static_cast<int>(labels.size()) == vp.size(), "binary_cross_entropy",
          "label count mismatch");
  for (double y : labels) {
    require(y == 0.0 || y == 1.0, "binary_cross_entropy", "labels must be 0 or 1");
  }
  const int n = vp.size();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double q = std::min(1.0 - kBceClamp, std::max(kBceClamp, vp.at(i)));
    const double y = labels[static_cast<std::size_t>(i)];
    acc += -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
  }
  const int self = node_count();
  return emit(Tensor::scalar(acc / n), {p},
              [self, p, labels, n](Tape& t) {
                const double g = t.grad(self).at(0) / n;
                const Tensor& vp = t.value(p);
                Tensor& gp = t.grad_buf(p);
                for (int i = 0; i < n; ++i) {
                  const double raw = vp.at(i);
                  if (raw <= kBceClamp || raw >= 1.0 - kBceClamp) continue;  // clamped flat
                  const double y = labels[static_cast<std::size_t>(i)];
                  gp.at(i) += g * ((raw - y) / (raw * (1.0 - raw)));
                }
              },
              "binary_cross_entropy");
}

int multi_head_attention(Tape& tape, int x, const std::vector<std::array<int, 3>>& heads,
                         int output_weight, int output_bias,
                         const std::vector<std::uint8_t>& key_mask) {
  const Tensor& vx = tape.value(x);
  if (vx.rank() != 2) fail("multi_head_attention", "input must be rank 2");
  if (heads.empty()) fail("multi_head_attention", "need at least one head");
  if (static_cast<int>(key_mask.size()) != vx.rows()) {
    fail("multi_head_attention", "key mask length must equal sequence length");
  }
  std::vector<int> contexts;
  for (const auto& [wq, wk, wv] : heads) {
    const int q = tape.matmul(x, wq);
    const int k = tape.matmul(x, wk);
    const int v = tape.matmul(x, wv);
    const int dh = tape.value(q).cols();
    const int scores = tape.scale(tape.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dh)));
    const int attn = tape.masked_softmax(scores, key_mask);
    contexts.push_back(tape.matmul(attn, v));
  }
  const int merged = contexts.size() == 1 ? contexts[0] : tape.concat_cols(contexts);
  return tape.affine(merged, output_weight, output_bias);
}

}  // namespace fieldmatch
