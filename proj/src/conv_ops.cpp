#include <cmath>
#include <cstdint>
#include <vector>

#include "crformer/errors.hpp"
#include "crformer/tensor.hpp"

namespace crformer {

namespace {

Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<std::shared_ptr<TensorNode>> parents,
               std::function<void(TensorNode&)> backprop) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    node->requires_grad = rg;
    if (rg) {
        node->parents = std::move(parents);
        node->backprop = std::move(backprop);
    }
    return Tensor(node);
}

inline size_t idx3(int c, int h, int w, int H, int W) {
    return (static_cast<size_t>(c) * H + h) * W + w;
}

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernels, int stride, int padding) {
    if (x.shape().size() != 3) {
        throw DimensionError("conv2d: input must be [C,H,W], got " + shape_str(x.shape()));
    }
    if (kernels.shape().size() != 4) {
        throw DimensionError("conv2d: kernels must be [Cout,Cin,k,k], got " +
                             shape_str(kernels.shape()));
    }
    const int cin = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int cout = kernels.dim(0), kcin = kernels.dim(1), k = kernels.dim(2);
    if (kernels.dim(3) != k) throw DimensionError("conv2d: kernel window must be square");
    if (k % 2 == 0) throw DimensionError("conv2d: kernel size must be odd");
    if (kcin != cin) {
        throw DimensionError("conv2d: input has " + std::to_string(cin) + " channels, kernels expect " +
                             std::to_string(kcin));
    }
    if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
    if (padding < 0) throw DimensionError("conv2d: padding must be >= 0");
    const int Ho = (H + 2 * padding - k) / stride + 1;
    const int Wo = (W + 2 * padding - k) / stride + 1;
    if (Ho <= 0 || Wo <= 0) {
        throw DimensionError("conv2d: empty output for input " + shape_str(x.shape()) + " k=" +
                             std::to_string(k) + " stride=" + std::to_string(stride));
    }
    const auto& xv = x.data();
    const auto& kv = kernels.data();
    std::vector<double> out(static_cast<size_t>(cout) * Ho * Wo, 0.0);
    for (int oc = 0; oc < cout; ++oc) {
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                double acc = 0.0;
                const int base_y = oy * stride - padding;
                const int base_x = ox * stride - padding;
                for (int ic = 0; ic < cin; ++ic) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = base_y + ky;
                        if (iy < 0 || iy >= H) continue;
                        const double* krow = &kv[((static_cast<size_t>(oc) * cin + ic) * k + ky) * k];
                        const double* xrow = &xv[idx3(ic, iy, 0, H, W)];
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = base_x + kx;
                            if (ix < 0 || ix >= W) continue;
                            acc += krow[kx] * xrow[ix];
                        }
                    }
                }
                out[idx3(oc, oy, ox, Ho, Wo)] = acc;
            }
        }
    }
    return make_op({cout, Ho, Wo}, std::move(out), {x.node(), kernels.node()},
                   [cin, H, W, cout, k, stride, padding, Ho, Wo](TensorNode& n) {
                       const auto& xv = n.parents[0]->value;
                       const auto& kv = n.parents[1]->value;
                       const bool need_x = n.parents[0]->requires_grad;
                       const bool need_k = n.parents[1]->requires_grad;
                       std::vector<double>* dx = need_x ? &n.parents[0]->grad_buffer() : nullptr;
                       std::vector<double>* dk = need_k ? &n.parents[1]->grad_buffer() : nullptr;
                       for (int oc = 0; oc < cout; ++oc) {
                           for (int oy = 0; oy < Ho; ++oy) {
                               for (int ox = 0; ox < Wo; ++ox) {
                                   const double g = n.grad[idx3(oc, oy, ox, Ho, Wo)];
                                   if (g == 0.0) continue;
                                   const int base_y = oy * stride - padding;
                                   const int base_x = ox * stride - padding;
                                   for (int ic = 0; ic < cin; ++ic) {
                                       for (int ky = 0; ky < k; ++ky) {
                                           const int iy = base_y + ky;
                                           if (iy < 0 || iy >= H) continue;
                                           const size_t kbase =
                                               ((static_cast<size_t>(oc) * cin + ic) * k + ky) * k;
                                           const size_t xbase = idx3(ic, iy, 0, H, W);
                                           for (int kx = 0; kx < k; ++kx) {
                                               const int ix = base_x + kx;
                                               if (ix < 0 || ix >= W) continue;
                                               if (need_x) (*dx)[xbase + ix] += g * kv[kbase + kx];
                                               if (need_k) (*dk)[kbase + kx] += g * xv[xbase + ix];
                                           }
                                       }
                                   }
                               }
                           }
                       }
                   });
}

Tensor bias_add_channel(const Tensor& x, const Tensor& bias) {
    if (x.shape().size() != 3) {
        throw DimensionError("bias_add_channel: input must be [C,H,W], got " + shape_str(x.shape()));
    }
    const int c = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (bias.shape() != Shape{c}) {
        throw DimensionError("bias_add_channel: bias must be [C]=" + std::to_string(c));
    }
    std::vector<double> out(x.data());
    const auto& bv = bias.data();
    const size_t plane = static_cast<size_t>(H) * W;
    for (int ch = 0; ch < c; ++ch) {
        for (size_t i = 0; i < plane; ++i) out[ch * plane + i] += bv[ch];
    }
    return make_op(x.shape(), std::move(out), {x.node(), bias.node()}, [c, plane](TensorNode& n) {
        if (n.parents[0]->requires_grad) {
            auto& dx = n.parents[0]->grad_buffer();
            for (size_t i = 0; i < dx.size(); ++i) dx[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            auto& db = n.parents[1]->grad_buffer();
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (size_t i = 0; i < plane; ++i) acc += n.grad[ch * plane + i];
                db[ch] += acc;
            }
        }
    });
}

Tensor avg_pool_conv(const Tensor& x, int k, int stride, int padding) {
    if (x.shape().size() != 3) {
        throw DimensionError("avg_pool_conv: input must be [C,H,W], got " + shape_str(x.shape()));
    }
    if (k < 1 || stride < 1 || padding < 0) throw DimensionError("avg_pool_conv: bad window params");
    const int c = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int Ho = (H + 2 * padding - k) / stride + 1;
    const int Wo = (W + 2 * padding - k) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw DimensionError("avg_pool_conv: empty output");
    // Fixed 1/k^2 weight everywhere; borders average in the zero padding.
    const double inv = 1.0 / (static_cast<double>(k) * k);
    const auto& xv = x.data();
    std::vector<double> out(static_cast<size_t>(c) * Ho * Wo, 0.0);
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                double acc = 0.0;
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride - padding + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int ix = ox * stride - padding + kx;
                        if (ix < 0 || ix >= W) continue;
                        acc += xv[idx3(ch, iy, ix, H, W)];
                    }
                }
                out[idx3(ch, oy, ox, Ho, Wo)] = acc * inv;
            }
        }
    }
    return make_op({c, Ho, Wo}, std::move(out), {x.node()},
                   [c, H, W, k, stride, padding, Ho, Wo, inv](TensorNode& n) {
                       if (!n.parents[0]->requires_grad) return;
                       auto& dx = n.parents[0]->grad_buffer();
                       for (int ch = 0; ch < c; ++ch) {
                           for (int oy = 0; oy < Ho; ++oy) {
                               for (int ox = 0; ox < Wo; ++ox) {
                                   const double g = n.grad[idx3(ch, oy, ox, Ho, Wo)] * inv;
                                   if (g == 0.0) continue;
                                   for (int ky = 0; ky < k; ++ky) {
                                       const int iy = oy * stride - padding + ky;
                                       if (iy < 0 || iy >= H) continue;
                                       for (int kx = 0; kx < k; ++kx) {
                                           const int ix = ox * stride - padding + kx;
                                           if (ix < 0 || ix >= W) continue;
                                           dx[idx3(ch, iy, ix, H, W)] += g;
                                       }
                                   }
                               }
                           }
                       }
                   });
}

Tensor upsample_nearest2x(const Tensor& x) {
    if (x.shape().size() != 3) {
        throw DimensionError("upsample_nearest2x: input must be [C,H,W], got " + shape_str(x.shape()));
    }
    const int c = x.dim(0), H = x.dim(1), W = x.dim(2);
    const auto& xv = x.data();
    std::vector<double> out(static_cast<size_t>(c) * 2 * H * 2 * W);
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < 2 * H; ++y) {
            const size_t srow = idx3(ch, y / 2, 0, H, W);
            double* orow = &out[idx3(ch, y, 0, 2 * H, 2 * W)];
            for (int xp = 0; xp < 2 * W; ++xp) orow[xp] = xv[srow + xp / 2];
        }
    }
    return make_op({c, 2 * H, 2 * W}, std::move(out), {x.node()}, [c, H, W](TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& dx = n.parents[0]->grad_buffer();
        for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < 2 * H; ++y) {
                const size_t drow = idx3(ch, y / 2, 0, H, W);
                const double* grow = &n.grad[idx3(ch, y, 0, 2 * H, 2 * W)];
                for (int xp = 0; xp < 2 * W; ++xp) dx[drow + xp / 2] += grow[xp];
            }
        }
    });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 3 || b.shape().size() != 3) {
        throw DimensionError("concat_channels: inputs must be [C,H,W]");
    }
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
        throw DimensionError("concat_channels: spatial mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    const int ca = a.dim(0), cb = b.dim(0), H = a.dim(1), W = a.dim(2);
    std::vector<double> out;
    out.reserve(a.data().size() + b.data().size());
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    return make_op({ca + cb, H, W}, std::move(out), {a.node(), b.node()}, [](TensorNode& n) {
        const size_t na = n.parents[0]->value.size();
        if (n.parents[0]->requires_grad) {
            auto& da = n.parents[0]->grad_buffer();
            for (size_t i = 0; i < na; ++i) da[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            auto& db = n.parents[1]->grad_buffer();
            for (size_t i = 0; i < db.size(); ++i) db[i] += n.grad[na + i];
        }
    });
}

Tensor chw_to_tokens(const Tensor& x) {
    if (x.shape().size() != 3) {
        throw DimensionError("chw_to_tokens: input must be [C,H,W], got " + shape_str(x.shape()));
    }
    const int c = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int t = H * W;
    const auto& xv = x.data();
    std::vector<double> out(xv.size());
    for (int ch = 0; ch < c; ++ch) {
        for (int p = 0; p < t; ++p) {
            out[static_cast<size_t>(p) * c + ch] = xv[static_cast<size_t>(ch) * t + p];
        }
    }
    return make_op({t, c}, std::move(out), {x.node()}, [c, t](TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& dx = n.parents[0]->grad_buffer();
        for (int ch = 0; ch < c; ++ch) {
            for (int p = 0; p < t; ++p) {
                dx[static_cast<size_t>(ch) * t + p] += n.grad[static_cast<size_t>(p) * c + ch];
            }
        }
    });
}

Tensor tokens_to_chw(const Tensor& x, int h, int w) {
    if (x.shape().size() != 2) {
        throw DimensionError("tokens_to_chw: input must be [tokens,C], got " + shape_str(x.shape()));
    }
    if (x.dim(0) != h * w) {
        throw DimensionError("tokens_to_chw: " + std::to_string(x.dim(0)) + " tokens cannot form " +
                             std::to_string(h) + "x" + std::to_string(w));
    }
    const int t = x.dim(0), c = x.dim(1);
    const auto& xv = x.data();
    std::vector<double> out(xv.size());
    for (int p = 0; p < t; ++p) {
        for (int ch = 0; ch < c; ++ch) {
            out[static_cast<size_t>(ch) * t + p] = xv[static_cast<size_t>(p) * c + ch];
        }
    }
    return make_op({c, h, w}, std::move(out), {x.node()}, [c, t](TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& dx = n.parents[0]->grad_buffer();
        for (int p = 0; p < t; ++p) {
            for (int ch = 0; ch < c; ++ch) {
                dx[static_cast<size_t>(p) * c + ch] += n.grad[static_cast<size_t>(ch) * t + p];
            }
        }
    });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    if (x.shape().size() != 2) {
        throw DimensionError("add_rowvec: input must be [tokens,C], got " + shape_str(x.shape()));
    }
    const int t = x.dim(0), c = x.dim(1);
    if (v.shape() != Shape{c}) {
        throw DimensionError("add_rowvec: vector must be [C]=" + std::to_string(c));
    }
    std::vector<double> out(x.data());
    const auto& vv = v.data();
    for (int r = 0; r < t; ++r) {
        for (int i = 0; i < c; ++i) out[static_cast<size_t>(r) * c + i] += vv[i];
    }
    return make_op(x.shape(), std::move(out), {x.node(), v.node()}, [t, c](TensorNode& n) {
        if (n.parents[0]->requires_grad) {
            auto& dx = n.parents[0]->grad_buffer();
            for (size_t i = 0; i < dx.size(); ++i) dx[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            auto& dv = n.parents[1]->grad_buffer();
            for (int r = 0; r < t; ++r) {
                for (int i = 0; i < c; ++i) dv[i] += n.grad[static_cast<size_t>(r) * c + i];
            }
        }
    });
}

Tensor composite_blend(const Tensor& pred, const Tensor& source, const Tensor& mask) {
    if (pred.shape().size() != 3 || pred.shape() != source.shape()) {
        throw DimensionError("composite_blend: pred/source must be matching [C,H,W]");
    }
    if (mask.shape().size() != 3 || mask.dim(0) != 1 || mask.dim(1) != pred.dim(1) ||
        mask.dim(2) != pred.dim(2)) {
        throw DimensionError("composite_blend: mask must be [1,H,W] matching the images");
    }
    const int c = pred.dim(0);
    const size_t plane = static_cast<size_t>(pred.dim(1)) * pred.dim(2);
    const auto& pv = pred.data();
    const auto& sv = source.data();
    const auto& mv = mask.data();
    // Branch on the mask instead of interpolating so binary masks copy source
    // pixels through bit-exactly.
    std::vector<double> out(pv.size());
    for (int ch = 0; ch < c; ++ch) {
        for (size_t i = 0; i < plane; ++i) {
            const size_t at = ch * plane + i;
            const double m = mv[i];
            if (m == 1.0) {
                out[at] = pv[at];
            } else if (m == 0.0) {
                out[at] = sv[at];
            } else {
                out[at] = m * pv[at] + (1.0 - m) * sv[at];
            }
        }
    }
    return make_op(pred.shape(), std::move(out), {pred.node(), source.node(), mask.node()},
                   [c, plane](TensorNode& n) {
                       const auto& mv = n.parents[2]->value;
                       if (n.parents[0]->requires_grad) {
                           auto& dp = n.parents[0]->grad_buffer();
                           for (int ch = 0; ch < c; ++ch) {
                               for (size_t i = 0; i < plane; ++i) {
                                   dp[ch * plane + i] += n.grad[ch * plane + i] * mv[i];
                               }
                           }
                       }
                       if (n.parents[1]->requires_grad) {
                           auto& ds = n.parents[1]->grad_buffer();
                           for (int ch = 0; ch < c; ++ch) {
                               for (size_t i = 0; i < plane; ++i) {
                                   ds[ch * plane + i] += n.grad[ch * plane + i] * (1.0 - mv[i]);
                               }
                           }
                       }
                   });
}

Tensor local_area_means(const Tensor& x, int k) {
    if (x.shape().size() != 3) {
        throw DimensionError("local_area_means: input must be [C,H,W], got " + shape_str(x.shape()));
    }
    if (k < 1) throw DimensionError("local_area_means: window must be >= 1");
    const int c = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (H % k != 0 || W % k != 0) {
        throw DimensionError("local_area_means: window " + std::to_string(k) +
                             " does not divide " + shape_str(x.shape()));
    }
    const int Ho = H / k, Wo = W / k;
    const double inv = 1.0 / (static_cast<double>(c) * k * k);
    const auto& xv = x.data();
    std::vector<double> out(static_cast<size_t>(Ho) * Wo, 0.0);
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                double acc = 0.0;
                for (int ky = 0; ky < k; ++ky) {
                    const double* row = &xv[idx3(ch, oy * k + ky, ox * k, H, W)];
                    for (int kx = 0; kx < k; ++kx) acc += row[kx];
                }
                out[static_cast<size_t>(oy) * Wo + ox] += acc * inv;
            }
        }
    }
    return make_op({1, Ho, Wo}, std::move(out), {x.node()}, [c, H, W, k, Ho, Wo, inv](TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& dx = n.parents[0]->grad_buffer();
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                const double g = n.grad[static_cast<size_t>(oy) * Wo + ox] * inv;
                if (g == 0.0) continue;
                for (int ch = 0; ch < c; ++ch) {
                    for (int ky = 0; ky < k; ++ky) {
                        double* row = &dx[idx3(ch, oy * k + ky, ox * k, H, W)];
                        for (int kx = 0; kx < k; ++kx) row[kx] += g;
                    }
                }
            }
        }
    });
}

Tensor neighbor_diff_penalty(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 3 || a.dim(0) != 1 || a.shape() != b.shape()) {
        throw DimensionError("neighbor_diff_penalty: inputs must be matching [1,H,W] grids");
    }
    const int H = a.dim(1), W = a.dim(2);
    const auto& av = a.data();
    const auto& bv = b.data();
    const double inv_l = 1.0 / (static_cast<double>(H) * W);
    static const int dy[4] = {-1, 1, 0, 0};
    static const int dx4[4] = {0, 0, -1, 1};
    double total = 0.0;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double ax = av[static_cast<size_t>(y) * W + x];
            const double bx = bv[static_cast<size_t>(y) * W + x];
            for (int d = 0; d < 4; ++d) {
                const int ny = y + dy[d], nx = x + dx4[d];
                if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                const double da = std::fabs(ax - av[static_cast<size_t>(ny) * W + nx]);
                const double db = std::fabs(bx - bv[static_cast<size_t>(ny) * W + nx]);
                total += (da - db) * (da - db);
            }
        }
    }
    return make_op({1}, {total * inv_l}, {a.node(), b.node()}, [H, W, inv_l](TensorNode& n) {
        const auto& av = n.parents[0]->value;
        const auto& bv = n.parents[1]->value;
        const bool need_a = n.parents[0]->requires_grad;
        const bool need_b = n.parents[1]->requires_grad;
        const double g = n.grad[0] * inv_l;
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const size_t at = static_cast<size_t>(y) * W + x;
                for (int d = 0; d < 4; ++d) {
                    const int ny = y + dy[d], nx = x + dx4[d];
                    if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                    const size_t nb = static_cast<size_t>(ny) * W + nx;
                    const double diff_a = av[at] - av[nb];
                    const double diff_b = bv[at] - bv[nb];
                    const double t = std::fabs(diff_a) - std::fabs(diff_b);
                    if (need_a) {
                        auto& da = n.parents[0]->grad_buffer();
                        const double c = 2.0 * g * t * sign_of(diff_a);
                        da[at] += c;
                        da[nb] -= c;
                    }
                    if (need_b) {
                        auto& db = n.parents[1]->grad_buffer();
                        const double c = -2.0 * g * t * sign_of(diff_b);
                        db[at] += c;
                        db[nb] -= c;
                    }
                }
            }
        }
    });
}

}  // namespace crformer
