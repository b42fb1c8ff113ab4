#include "mvharm/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "mvharm/common.hpp"

namespace mvharm::ad {

namespace {

std::atomic<uint64_t> g_next_id{1};

std::shared_ptr<Node> new_node(int rows, int cols) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(size_t(rows) * cols, 0.0);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

// Work threshold below which ops run serially.
constexpr int64_t kParGrainFlops = 1 << 16;

int64_t row_grain(int64_t per_row_work) {
  return std::max<int64_t>(1, kParGrainFlops / std::max<int64_t>(1, per_row_work));
}

}  // namespace

double* Node::grad_data() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad.data();
}

Tensor Tensor::leaf(int rows, int cols, bool requires_grad) {
  auto n = new_node(rows, cols);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::constant(const double* data, int rows, int cols) {
  auto n = new_node(rows, cols);
  n->requires_grad = false;
  std::copy(data, data + size_t(rows) * cols, n->value.begin());
  return Tensor(n);
}

Tensor Tensor::constant(const std::vector<double>& data, int rows, int cols) {
  if (data.size() != size_t(rows) * cols) {
    throw std::invalid_argument("Tensor::constant: size mismatch");
  }
  return constant(data.data(), rows, cols);
}

Tensor Tensor::scalar(double v) { return constant(&v, 1, 1); }

double Tensor::item() const {
  if (size() != 1) throw std::logic_error("Tensor::item: not a scalar");
  return n_->value[0];
}

void Tensor::zero_grad() {
  if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
}

Tensor make_op(int rows, int cols, std::vector<Tensor> inputs,
               std::function<void(Node&)> backward_fn) {
  auto n = new_node(rows, cols);
  bool rg = false;
  n->inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    rg = rg || t.requires_grad();
    n->inputs.push_back(t.node());
  }
  n->requires_grad = rg;
  if (rg) n->backward_fn = std::move(backward_fn);
  return Tensor(n);
}

void backward(const Tensor& loss) {
  if (!loss.valid() || loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  }
  if (!loss.requires_grad()) {
    throw std::invalid_argument("backward: loss does not depend on any parameter");
  }
  // Gather reachable nodes; creation ids give a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{loss.node().get()};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& in : n->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) {
        stack.push_back(in.get());
      }
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->id > b->id; });

  loss.node()->grad_data()[0] += 1.0;
  for (Node* n : order) {
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

bool all_finite(const Tensor& t) {
  for (double v : t.node()->value) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Elementwise ops

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = make_op(a.rows(), a.cols(), {a, b}, [](Node& self) {
    auto& ga = *self.inputs[0];
    auto& gb = *self.inputs[1];
    if (ga.requires_grad) {
      double* g = ga.grad_data();
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (gb.requires_grad) {
      double* g = gb.grad_data();
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] + pb[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = make_op(a.rows(), a.cols(), {a, b}, [](Node& self) {
    auto& ga = *self.inputs[0];
    auto& gb = *self.inputs[1];
    if (ga.requires_grad) {
      double* g = ga.grad_data();
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (gb.requires_grad) {
      double* g = gb.grad_data();
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] - pb[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = make_op(a.rows(), a.cols(), {a, b}, [](Node& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (na.requires_grad) {
      double* g = na.grad_data();
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * nb.value[i];
    }
    if (nb.requires_grad) {
      double* g = nb.grad_data();
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * na.value[i];
    }
  });
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] * pb[i];
  return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw std::invalid_argument("add_rowvec: bias must be 1 x cols(x)");
  }
  const int M = x.rows(), C = x.cols();
  Tensor out = make_op(M, C, {x, bias}, [M, C](Node& self) {
    auto& nx = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (nx.requires_grad) {
      double* g = nx.grad_data();
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (nb.requires_grad) {
      double* g = nb.grad_data();
      for (int m = 0; m < M; ++m) {
        const double* row = self.grad.data() + size_t(m) * C;
        for (int c = 0; c < C; ++c) g[c] += row[c];
      }
    }
  });
  const double* px = x.data();
  const double* pb = bias.data();
  double* po = out.data();
  for (int m = 0; m < M; ++m) {
    for (int c = 0; c < C; ++c) po[size_t(m) * C + c] = px[size_t(m) * C + c] + pb[c];
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = make_op(a.rows(), a.cols(), {a}, [c](Node& self) {
    auto& na = *self.inputs[0];
    if (na.requires_grad) {
      double* g = na.grad_data();
      for (size_t i = 0; i < self.grad.size(); ++i) g[i] += c * self.grad[i];
    }
  });
  const double* pa = a.data();
  double* po = out.data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = c * pa[i];
  return out;
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Tensor gelu(const Tensor& a) {
  Tensor out = make_op(a.rows(), a.cols(), {a}, [](Node& self) {
    auto& na = *self.inputs[0];
    if (!na.requires_grad) return;
    double* g = na.grad_data();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      double x = na.value[i];
      double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      g[i] += self.grad[i] * (cdf + x * pdf);
    }
  });
  const double* pa = a.data();
  double* po = out.data();
  for (size_t i = 0; i < out.size(); ++i) {
    po[i] = 0.5 * pa[i] * (1.0 + std::erf(pa[i] * kInvSqrt2));
  }
  return out;
}

Tensor exp_op(const Tensor& a) {
  Tensor out = make_op(a.rows(), a.cols(), {a}, [](Node& self) {
    auto& na = *self.inputs[0];
    if (!na.requires_grad) return;
    double* g = na.grad_data();
    for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * self.value[i];
  });
  const double* pa = a.data();
  double* po = out.data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = std::exp(pa[i]);
  return out;
}

Tensor log_op(const Tensor& a) {
  Tensor out = make_op(a.rows(), a.cols(), {a}, [](Node& self) {
    auto& na = *self.inputs[0];
    if (!na.requires_grad) return;
    double* g = na.grad_data();
    for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] / na.value[i];
  });
  const double* pa = a.data();
  double* po = out.data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = std::log(pa[i]);
  return out;
}

Tensor abs_op(const Tensor& a) {
  Tensor out = make_op(a.rows(), a.cols(), {a}, [](Node& self) {
    auto& na = *self.inputs[0];
    if (!na.requires_grad) return;
    double* g = na.grad_data();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      double x = na.value[i];
      double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      g[i] += self.grad[i] * s;
    }
  });
  const double* pa = a.data();
  double* po = out.data();
  for (size_t i = 0; i < out.size(); ++i) po[i] = std::abs(pa[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Matrix products

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims differ");
  const int M = a.rows(), K = a.cols(), N = b.cols();
  Tensor out = make_op(M, N, {a, b}, [M, K, N](Node& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    const double* dc = self.grad.data();
    if (na.requires_grad) {
      // dA[m,k] = dot(dC[m,:], B[k,:])
      double* ga = na.grad_data();
      const double* pb = nb.value.data();
      parallel_for(M, row_grain(int64_t(N) * K), [&](int64_t lo, int64_t hi) {
        for (int64_t m = lo; m < hi; ++m) {
          const double* dcr = dc + size_t(m) * N;
          double* gar = ga + size_t(m) * K;
          for (int k = 0; k < K; ++k) {
            const double* br = pb + size_t(k) * N;
            double acc = 0.0;
            for (int n = 0; n < N; ++n) acc += dcr[n] * br[n];
            gar[k] += acc;
          }
        }
      });
    }
    if (nb.requires_grad) {
      // dB[k,:] += sum_m A[m,k] * dC[m,:]
      double* gb = nb.grad_data();
      const double* pa = na.value.data();
      parallel_for(K, row_grain(int64_t(M) * N), [&](int64_t lo, int64_t hi) {
        for (int64_t k = lo; k < hi; ++k) {
          double* gbr = gb + size_t(k) * N;
          for (int m = 0; m < M; ++m) {
            double coef = pa[size_t(m) * K + k];
            if (coef == 0.0) continue;
            const double* dcr = dc + size_t(m) * N;
            for (int n = 0; n < N; ++n) gbr[n] += coef * dcr[n];
          }
        }
      });
    }
  });
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  parallel_for(M, row_grain(int64_t(N) * K), [&](int64_t lo, int64_t hi) {
    for (int64_t m = lo; m < hi; ++m) {
      double* orow = po + size_t(m) * N;
      std::fill(orow, orow + N, 0.0);
      const double* arow = pa + size_t(m) * K;
      for (int k = 0; k < K; ++k) {
        double coef = arow[k];
        const double* brow = pb + size_t(k) * N;
        for (int n = 0; n < N; ++n) orow[n] += coef * brow[n];
      }
    }
  });
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dims differ");
  const int M = a.rows(), K = a.cols(), N = b.rows();
  Tensor out = make_op(M, N, {a, b}, [M, K, N](Node& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    const double* dc = self.grad.data();
    if (na.requires_grad) {
      // dA[m,:] += sum_n dC[m,n] * B[n,:]
      double* ga = na.grad_data();
      const double* pb = nb.value.data();
      parallel_for(M, row_grain(int64_t(N) * K), [&](int64_t lo, int64_t hi) {
        for (int64_t m = lo; m < hi; ++m) {
          double* gar = ga + size_t(m) * K;
          const double* dcr = dc + size_t(m) * N;
          for (int n = 0; n < N; ++n) {
            double coef = dcr[n];
            if (coef == 0.0) continue;
            const double* br = pb + size_t(n) * K;
            for (int k = 0; k < K; ++k) gar[k] += coef * br[k];
          }
        }
      });
    }
    if (nb.requires_grad) {
      // dB[n,:] += sum_m dC[m,n] * A[m,:]
      double* gb = nb.grad_data();
      const double* pa = na.value.data();
      parallel_for(N, row_grain(int64_t(M) * K), [&](int64_t lo, int64_t hi) {
        for (int64_t n = lo; n < hi; ++n) {
          double* gbr = gb + size_t(n) * K;
          for (int m = 0; m < M; ++m) {
            double coef = dc[size_t(m) * N + n];
            if (coef == 0.0) continue;
            const double* ar = pa + size_t(m) * K;
            for (int k = 0; k < K; ++k) gbr[k] += coef * ar[k];
          }
        }
      });
    }
  });
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  parallel_for(M, row_grain(int64_t(N) * K), [&](int64_t lo, int64_t hi) {
    for (int64_t m = lo; m < hi; ++m) {
      const double* arow = pa + size_t(m) * K;
      double* orow = po + size_t(m) * N;
      for (int n = 0; n < N; ++n) {
        const double* brow = pb + size_t(n) * K;
        double acc = 0.0;
        for (int k = 0; k < K; ++k) acc += arow[k] * brow[k];
        orow[n] = acc;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Row-wise ops

Tensor softmax_rows(const Tensor& a) {
  const int M = a.rows(), C = a.cols();
  Tensor out = make_op(M, C, {a}, [M, C](Node& self) {
    auto& na = *self.inputs[0];
    if (!na.requires_grad) return;
    double* g = na.grad_data();
    parallel_for(M, row_grain(C), [&](int64_t lo, int64_t hi) {
      for (int64_t m = lo; m < hi; ++m) {
        const double* p = self.value.data() + size_t(m) * C;
        const double* dy = self.grad.data() + size_t(m) * C;
        double s = 0.0;
        for (int c = 0; c < C; ++c) s += p[c] * dy[c];
        double* gr = g + size_t(m) * C;
        for (int c = 0; c < C; ++c) gr[c] += p[c] * (dy[c] - s);
      }
    });
  });
  const double* pa = a.data();
  double* po = out.data();
  parallel_for(M, row_grain(C), [&](int64_t lo, int64_t hi) {
    for (int64_t m = lo; m < hi; ++m) {
      const double* row = pa + size_t(m) * C;
      double* orow = po + size_t(m) * C;
      double mx = row[0];
      for (int c = 1; c < C; ++c) mx = std::max(mx, row[c]);
      double s = 0.0;
      for (int c = 0; c < C; ++c) {
        orow[c] = std::exp(row[c] - mx);
        s += orow[c];
      }
      double inv = 1.0 / s;
      for (int c = 0; c < C; ++c) orow[c] *= inv;
    }
  });
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  const int M = x.rows(), C = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != C || beta.rows() != 1 || beta.cols() != C) {
    throw std::invalid_argument("layer_norm: gamma/beta must be 1 x cols(x)");
  }
  auto cache = std::make_shared<std::vector<double>>(size_t(M) * 2);  // mean, inv_std
  Tensor out = make_op(M, C, {x, gamma, beta}, [M, C, cache](Node& self) {
    auto& nx = *self.inputs[0];
    auto& ng = *self.inputs[1];
    auto& nb = *self.inputs[2];
    const double* dy = self.grad.data();
    if (ng.requires_grad || nb.requires_grad) {
      double* gg = ng.requires_grad ? ng.grad_data() : nullptr;
      double* gb = nb.requires_grad ? nb.grad_data() : nullptr;
      for (int m = 0; m < M; ++m) {
        double mu = (*cache)[size_t(m) * 2];
        double istd = (*cache)[size_t(m) * 2 + 1];
        const double* xr = nx.value.data() + size_t(m) * C;
        const double* dyr = dy + size_t(m) * C;
        for (int c = 0; c < C; ++c) {
          double xhat = (xr[c] - mu) * istd;
          if (gg) gg[c] += dyr[c] * xhat;
          if (gb) gb[c] += dyr[c];
        }
      }
    }
    if (nx.requires_grad) {
      double* gx = nx.grad_data();
      const double* gam = ng.value.data();
      parallel_for(M, row_grain(C * 3), [&](int64_t lo, int64_t hi) {
        for (int64_t m = lo; m < hi; ++m) {
          double mu = (*cache)[size_t(m) * 2];
          double istd = (*cache)[size_t(m) * 2 + 1];
          const double* xr = nx.value.data() + size_t(m) * C;
          const double* dyr = dy + size_t(m) * C;
          double mean_dxh = 0.0, mean_dxh_xh = 0.0;
          for (int c = 0; c < C; ++c) {
            double xhat = (xr[c] - mu) * istd;
            double dxh = dyr[c] * gam[c];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xhat;
          }
          mean_dxh /= C;
          mean_dxh_xh /= C;
          double* gxr = gx + size_t(m) * C;
          for (int c = 0; c < C; ++c) {
            double xhat = (xr[c] - mu) * istd;
            double dxh = dyr[c] * gam[c];
            gxr[c] += istd * (dxh - mean_dxh - xhat * mean_dxh_xh);
          }
        }
      });
    }
  });
  const double* px = x.data();
  const double* pg = gamma.data();
  const double* pb = beta.data();
  double* po = out.data();
  parallel_for(M, row_grain(C * 2), [&](int64_t lo, int64_t hi) {
    for (int64_t m = lo; m < hi; ++m) {
      const double* row = px + size_t(m) * C;
      double mu = 0.0;
      for (int c = 0; c < C; ++c) mu += row[c];
      mu /= C;
      double var = 0.0;
      for (int c = 0; c < C; ++c) {
        double dd = row[c] - mu;
        var += dd * dd;
      }
      var /= C;
      double istd = 1.0 / std::sqrt(var + eps);
      (*cache)[size_t(m) * 2] = mu;
      (*cache)[size_t(m) * 2 + 1] = istd;
      double* orow = po + size_t(m) * C;
      for (int c = 0; c < C; ++c) orow[c] = pg[c] * ((row[c] - mu) * istd) + pb[c];
    }
  });
  return out;
}

Tensor row_sum(const Tensor& a) {
  const int M = a.rows(), C = a.cols();
  Tensor out = make_op(M, 1, {a}, [M, C](Node& self) {
    auto& na = *self.inputs[0];
    if (!na.requires_grad) return;
    double* g = na.grad_data();
    for (int m = 0; m < M; ++m) {
      double gm = self.grad[m];
      double* gr = g + size_t(m) * C;
      for (int c = 0; c < C; ++c) gr[c] += gm;
    }
  });
  const double* pa = a.data();
  double* po = out.data();
  for (int m = 0; m < M; ++m) {
    const double* row = pa + size_t(m) * C;
    double s = 0.0;
    for (int c = 0; c < C; ++c) s += row[c];
    po[m] = s;
  }
  return out;
}

Tensor sum(const Tensor& a) {
  Tensor out = make_op(1, 1, {a}, [](Node& self) {
    auto& na = *self.inputs[0];
    if (!na.requires_grad) return;
    double* g = na.grad_data();
    double gs = self.grad[0];
    for (size_t i = 0; i < na.value.size(); ++i) g[i] += gs;
  });
  const double* pa = a.data();
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += pa[i];
  out.data()[0] = s;
  return out;
}

Tensor mean(const Tensor& a) {
  const double inv = 1.0 / double(a.size());
  Tensor out = make_op(1, 1, {a}, [inv](Node& self) {
    auto& na = *self.inputs[0];
    if (!na.requires_grad) return;
    double* g = na.grad_data();
    double gs = self.grad[0] * inv;
    for (size_t i = 0; i < na.value.size(); ++i) g[i] += gs;
  });
  const double* pa = a.data();
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += pa[i];
  out.data()[0] = s * inv;
  return out;
}

// ---------------------------------------------------------------------------
// Shape surgery

Tensor slice_rows(const Tensor& a, int r0, int r1) {
  if (r0 < 0 || r1 > a.rows() || r0 >= r1) {
    throw std::invalid_argument("slice_rows: bad range");
  }
  const int C = a.cols();
  Tensor out = make_op(r1 - r0, C, {a}, [r0, C](Node& self) {
    auto& na = *self.inputs[0];
    if (!na.requires_grad) return;
    double* g = na.grad_data() + size_t(r0) * C;
    for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
  std::copy(a.data() + size_t(r0) * C, a.data() + size_t(r1) * C, out.data());
  return out;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
  if (c0 < 0 || c1 > a.cols() || c0 >= c1) {
    throw std::invalid_argument("slice_cols: bad range");
  }
  const int M = a.rows(), C = a.cols(), W = c1 - c0;
  Tensor out = make_op(M, W, {a}, [M, C, c0, W](Node& self) {
    auto& na = *self.inputs[0];
    if (!na.requires_grad) return;
    double* g = na.grad_data();
    for (int m = 0; m < M; ++m) {
      const double* src = self.grad.data() + size_t(m) * W;
      double* dst = g + size_t(m) * C + c0;
      for (int c = 0; c < W; ++c) dst[c] += src[c];
    }
  });
  const double* pa = a.data();
  double* po = out.data();
  for (int m = 0; m < M; ++m) {
    std::copy(pa + size_t(m) * C + c0, pa + size_t(m) * C + c1, po + size_t(m) * W);
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
  const int C = parts[0].cols();
  int rows = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != C) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.rows();
  }
  std::vector<int> offsets(parts.size());
  {
    int off = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
      offsets[i] = off;
      off += parts[i].rows();
    }
  }
  Tensor out = make_op(rows, C, parts, [offsets, C](Node& self) {
    for (size_t i = 0; i < self.inputs.size(); ++i) {
      auto& in = *self.inputs[i];
      if (!in.requires_grad) continue;
      double* g = in.grad_data();
      const double* src = self.grad.data() + size_t(offsets[i]) * C;
      for (size_t k = 0; k < in.value.size(); ++k) g[k] += src[k];
    }
  });
  double* po = out.data();
  for (size_t i = 0; i < parts.size(); ++i) {
    std::copy(parts[i].data(), parts[i].data() + parts[i].size(),
              po + size_t(offsets[i]) * C);
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
  const int M = parts[0].rows();
  int cols = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != M) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  std::vector<int> offsets(parts.size());
  std::vector<int> widths(parts.size());
  {
    int off = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
      offsets[i] = off;
      widths[i] = parts[i].cols();
      off += widths[i];
    }
  }
  Tensor out = make_op(M, cols, parts, [offsets, widths, M, cols](Node& self) {
    for (size_t i = 0; i < self.inputs.size(); ++i) {
      auto& in = *self.inputs[i];
      if (!in.requires_grad) continue;
      double* g = in.grad_data();
      int w = widths[i];
      for (int m = 0; m < M; ++m) {
        const double* src = self.grad.data() + size_t(m) * cols + offsets[i];
        double* dst = g + size_t(m) * w;
        for (int c = 0; c < w; ++c) dst[c] += src[c];
      }
    }
  });
  double* po = out.data();
  for (size_t i = 0; i < parts.size(); ++i) {
    const double* src = parts[i].data();
    int w = widths[i];
    for (int m = 0; m < M; ++m) {
      std::copy(src + size_t(m) * w, src + size_t(m) * w + w,
                po + size_t(m) * cols + offsets[i]);
    }
  }
  return out;
}

Tensor gather(const Tensor& a, std::vector<int> index, int rows, int cols) {
  if (index.size() != size_t(rows) * cols) {
    throw std::invalid_argument("gather: index size mismatch");
  }
  auto idx = std::make_shared<std::vector<int>>(std::move(index));
  for (int i : *idx) {
    if (i < 0 || size_t(i) >= a.size()) throw std::invalid_argument("gather: index out of range");
  }
  Tensor out = make_op(rows, cols, {a}, [idx](Node& self) {
    auto& na = *self.inputs[0];
    if (!na.requires_grad) return;
    double* g = na.grad_data();
    for (size_t i = 0; i < self.grad.size(); ++i) g[(*idx)[i]] += self.grad[i];
  });
  const double* pa = a.data();
  double* po = out.data();
  for (size_t i = 0; i < idx->size(); ++i) po[i] = pa[(*idx)[i]];
  return out;
}

}  // namespace mvharm::ad
