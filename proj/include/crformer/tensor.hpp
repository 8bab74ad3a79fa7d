#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace crformer {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until a backward pass reaches this node
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backprop;  // empty for leaves

    // Gradient buffer, zero-initialized on first access.
    std::vector<double>& grad_buffer();
};

// Dense row-major 64-bit float tensor with reverse-mode gradient tracking.
// Copies are shared handles onto the same storage; ops build a computation
// graph whenever an input has requires_grad set, and Tensor::backward walks
// it in reverse topological order. Gradients accumulate across backward
// calls until zero_grad() is called explicitly.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::int64_t numel() const;
    int dim(int i) const;

    std::vector<double>& data();
    const std::vector<double>& data() const;
    double item() const;  // value of a one-element tensor

    bool requires_grad() const;
    void set_requires_grad(bool on);

    bool has_grad() const;
    std::vector<double>& grad();              // allocates zeros on demand
    const std::vector<double>& grad() const;  // throws if no gradient present
    void zero_grad();

    // Reverse-mode accumulation from a scalar. Repeated calls accumulate.
    void backward() const;

    const std::shared_ptr<TensorNode>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<TensorNode> node_;
};

// ---- elementwise and reduction ops ----------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor abs_val(const Tensor& a);
Tensor sum(const Tensor& a);                             // -> [1]
Tensor mean_abs_diff(const Tensor& a, const Tensor& b);  // -> [1], (1/n)*sum|a-b|

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
Tensor transpose(const Tensor& a);                // 2-D

// Row-wise softmax over the last axis. Rows may contain -inf entries
// (exp(-inf) = 0); a row whose entries are all -inf yields an all-zero row
// instead of NaN. This is the one deliberate deviation from the textbook
// definition and is what zeroes fully-masked attention queries.
Tensor softmax_lastdim(const Tensor& a);

// Per-token normalization of [T,C] over the channel axis, then affine.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

// ---- spatial ops on [C,H,W] ----------------------------------------------

// Cross-correlation with zero padding (no kernel flip).
// x [Cin,H,W], kernels [Cout,Cin,k,k], k odd.
Tensor conv2d(const Tensor& x, const Tensor& kernels, int stride, int padding);
Tensor bias_add_channel(const Tensor& x, const Tensor& bias);  // bias [C]

// Fixed uniform k x k kernel per channel, always divided by k*k, zero
// padding. Interior outputs are exact window means; edge windows include
// padding zeros, e.g. with k=3,p=1 a corner of a constant-c input gives
// 4c/9 and a non-corner border cell 6c/9.
Tensor avg_pool_conv(const Tensor& x, int k = 3, int stride = 2, int padding = 1);

Tensor upsample_nearest2x(const Tensor& x);
Tensor concat_channels(const Tensor& a, const Tensor& b);

Tensor chw_to_tokens(const Tensor& x);                      // [C,H,W] -> [HW,C]
Tensor tokens_to_chw(const Tensor& t, int h, int w);  // [HW,C] -> [C,H,W]

Tensor add_rowvec(const Tensor& x, const Tensor& b);  // [T,C] + [C] per row

// mask o pred + (1 - mask) o src with mask in {0,1}: selected pixels are
// copied bitwise, no blending arithmetic can perturb them.
Tensor composite_blend(const Tensor& pred, const Tensor& src, const Tensor& mask);

// Channel mean followed by non-overlapping k x k average pooling:
// [C,H,W] -> [1, H/k, W/k].
Tensor local_area_means(const Tensor& img, int k);

// (1/L) * sum over grid cells x and their 4-neighbors y of
// (|a_x - a_y| - |b_x - b_y|)^2, boundary cells using only existing
// neighbors. a and b are [1,H,W] grids of identical shape.
Tensor neighbor_diff_penalty(const Tensor& a, const Tensor& b);

// ---- finite differences ---------------------------------------------------

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per element. Only
// evaluates f; never touches the reverse-mode path it is used to check.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h);

}  // namespace crformer
