#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace mvharm::ad {

// One node of the dynamically built computation graph. Values and gradients
// are double precision, 2-D row-major (scalars are 1x1).
struct Node {
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, same size as value
  int rows = 0;
  int cols = 0;
  bool requires_grad = false;
  uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  double* grad_data();  // allocates and zero-fills on first use
};

// Shared handle to a Node. Graphs are built serially; node creation order is
// a valid topological order, which backward() walks in reverse.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

  static Tensor leaf(int rows, int cols, bool requires_grad = true);
  static Tensor constant(const double* data, int rows, int cols);
  static Tensor constant(const std::vector<double>& data, int rows, int cols);
  static Tensor scalar(double v);

  bool valid() const { return n_ != nullptr; }
  int rows() const { return n_->rows; }
  int cols() const { return n_->cols; }
  size_t size() const { return n_->value.size(); }
  double* data() { return n_->value.data(); }
  const double* data() const { return n_->value.data(); }
  double item() const;
  bool requires_grad() const { return n_->requires_grad; }
  bool has_grad() const { return !n_->grad.empty(); }
  double* grad() { return n_->grad_data(); }
  const std::vector<double>& grad_vector() const { return n_->grad; }
  void zero_grad();

  std::shared_ptr<Node> node() const { return n_; }

 private:
  std::shared_ptr<Node> n_;
};

// Reverse-mode sweep from a scalar loss. Gradients accumulate (+=) into
// every reachable tensor with requires_grad set.
void backward(const Tensor& loss);

Tensor make_op(int rows, int cols, std::vector<Tensor> inputs,
               std::function<void(Node&)> backward_fn);

bool all_finite(const Tensor& t);

// Elementwise / broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_rowvec(const Tensor& x, const Tensor& bias);  // (MxC) + (1xC)
Tensor scale(const Tensor& a, double c);
Tensor gelu(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor abs_op(const Tensor& a);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);     // (MxK)(KxN)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (MxK)(NxK)^T -> MxN

// Rows.
Tensor softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
Tensor row_sum(const Tensor& a);  // MxC -> Mx1

// Reductions.
Tensor sum(const Tensor& a);   // 1x1
Tensor mean(const Tensor& a);  // 1x1

// Shape surgery.
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
// out.flat[i] = a.flat[index[i]]
Tensor gather(const Tensor& a, std::vector<int> index, int rows, int cols);

}  // namespace mvharm::ad
