#include "pickplace/net.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "pickplace/errors.hpp"
#include "pickplace/parallel.hpp"

namespace pickplace {

namespace {

float leaky(float x, float a) { return x >= 0.0f ? x : a * x; }
float leaky_grad(float x, float a) { return x >= 0.0f ? 1.0f : a; }

Tensor apply_leaky(const Tensor& t, double a) {
    Tensor out = t;
    const float af = static_cast<float>(a);
    for (float& v : out.data) v = leaky(v, af);
    return out;
}

float stable_sigmoid(float x) {
    if (x >= 0.0f) {
        return 1.0f / (1.0f + std::exp(-x));
    }
    const float e = std::exp(x);
    return e / (1.0f + e);
}

int conv_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride,
                      int pad) {
    if (input.shape.size() != 3 || weights.shape.size() != 4 ||
        input.dim(0) != weights.dim(1)) {
        throw ShapeMismatch("conv2d_forward: incompatible input/weight shapes");
    }
    const int in_c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int out_c = weights.dim(0), k = weights.dim(2);
    if (weights.dim(3) != k) throw ShapeMismatch("conv2d_forward: non-square kernel");
    if (!bias.data.empty() && bias.dim(0) != out_c) {
        throw ShapeMismatch("conv2d_forward: bias size");
    }
    const int oh = conv_extent(h, k, stride, pad);
    const int ow = conv_extent(w, k, stride, pad);
    if (oh <= 0 || ow <= 0) throw ShapeMismatch("conv2d_forward: empty output");

    Tensor out({out_c, oh, ow});
    const bool big = static_cast<int64_t>(out_c) * oh * ow * in_c * k * k > 200000;
    const auto run = [&](int64_t oc64) {
        const int oc = static_cast<int>(oc64);
        const float b = bias.data.empty() ? 0.0f : bias.data[static_cast<size_t>(oc)];
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                float acc = b;
                for (int ic = 0; ic < in_c; ++ic) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        const float* in_row = &input.data[(static_cast<size_t>(ic) * h + iy) * w];
                        const float* w_row =
                            &weights.data[((static_cast<size_t>(oc) * in_c + ic) * k + ky) * k];
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= w) continue;
                            acc += in_row[ix] * w_row[kx];
                        }
                    }
                }
                out.data[(static_cast<size_t>(oc) * oh + oy) * ow + ox] = acc;
            }
        }
    };
    if (big) {
        parallel_for(out_c, run);
    } else {
        for (int oc = 0; oc < out_c; ++oc) run(oc);
    }
    return out;
}

Tensor conv3d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      const std::array<int, 3>& stride, const std::array<int, 3>& pad) {
    if (input.shape.size() != 4 || weights.shape.size() != 5 ||
        input.dim(0) != weights.dim(1)) {
        throw ShapeMismatch("conv3d_forward: incompatible input/weight shapes");
    }
    const int in_c = input.dim(0), nz = input.dim(1), ny = input.dim(2), nx = input.dim(3);
    const int out_c = weights.dim(0), k = weights.dim(2);
    if (weights.dim(3) != k || weights.dim(4) != k) {
        throw ShapeMismatch("conv3d_forward: non-cubic kernel");
    }
    const int oz = conv_extent(nz, k, stride[0], pad[0]);
    const int oy = conv_extent(ny, k, stride[1], pad[1]);
    const int ox = conv_extent(nx, k, stride[2], pad[2]);
    if (oz <= 0 || oy <= 0 || ox <= 0) throw ShapeMismatch("conv3d_forward: empty output");

    Tensor out({out_c, oz, oy, ox});
    const auto run = [&](int64_t oc64) {
        const int oc = static_cast<int>(oc64);
        const float b = bias.data.empty() ? 0.0f : bias.data[static_cast<size_t>(oc)];
        for (int z = 0; z < oz; ++z) {
            for (int y = 0; y < oy; ++y) {
                for (int x = 0; x < ox; ++x) {
                    float acc = b;
                    for (int ic = 0; ic < in_c; ++ic) {
                        for (int kz = 0; kz < k; ++kz) {
                            const int iz = z * stride[0] + kz - pad[0];
                            if (iz < 0 || iz >= nz) continue;
                            for (int ky = 0; ky < k; ++ky) {
                                const int iy = y * stride[1] + ky - pad[1];
                                if (iy < 0 || iy >= ny) continue;
                                const float* in_row =
                                    &input.data[((static_cast<size_t>(ic) * nz + iz) * ny + iy) *
                                                nx];
                                const float* w_row =
                                    &weights.data[(((static_cast<size_t>(oc) * in_c + ic) * k +
                                                    kz) * k + ky) * k];
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ix = x * stride[2] + kx - pad[2];
                                    if (ix < 0 || ix >= nx) continue;
                                    acc += in_row[ix] * w_row[kx];
                                }
                            }
                        }
                    }
                    out.data[((static_cast<size_t>(oc) * oz + z) * oy + y) * ox + x] = acc;
                }
            }
        }
    };
    if (static_cast<int64_t>(out_c) * oz * oy * ox * in_c > 50000) {
        parallel_for(out_c, run);
    } else {
        for (int oc = 0; oc < out_c; ++oc) run(oc);
    }
    return out;
}

Tensor cross_correlate_features(const Tensor& view_feat, const Tensor& object_feat, int groups) {
    if (view_feat.shape.size() != 3 || object_feat.shape.size() != 3 ||
        view_feat.dim(0) != object_feat.dim(0)) {
        throw ShapeMismatch("cross_correlate_features: channel mismatch");
    }
    const int c = view_feat.dim(0);
    if (groups < 1 || c % groups != 0) {
        throw ShapeMismatch("cross_correlate_features: channels not divisible into groups");
    }
    const int h = view_feat.dim(1), w = view_feat.dim(2);
    const int kh = object_feat.dim(1), kw = object_feat.dim(2);
    const int cy = kh / 2, cx = kw / 2;
    const int per_group = c / groups;

    Tensor out({groups, h, w});
    parallel_for(groups, [&](int64_t g64) {
        const int g = static_cast<int>(g64);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                float acc = 0.0f;
                for (int ci = g * per_group; ci < (g + 1) * per_group; ++ci) {
                    for (int dy = 0; dy < kh; ++dy) {
                        const int iy = y + dy - cy;
                        if (iy < 0 || iy >= h) continue;
                        const float* v_row =
                            &view_feat.data[(static_cast<size_t>(ci) * h + iy) * w];
                        const float* o_row =
                            &object_feat.data[(static_cast<size_t>(ci) * kh + dy) * kw];
                        for (int dx = 0; dx < kw; ++dx) {
                            const int ix = x + dx - cx;
                            if (ix < 0 || ix >= w) continue;
                            acc += v_row[ix] * o_row[dx];
                        }
                    }
                }
                out.data[(static_cast<size_t>(g) * h + y) * w + x] = acc;
            }
        }
    });
    return out;
}

std::pair<double, Tensor> loss_bce(const Tensor& pred, const Tensor& label, const Tensor& mask) {
    if (pred.size() != label.size() || pred.size() != mask.size()) {
        throw ShapeMismatch("loss_bce: shape mismatch");
    }
    size_t count = 0;
    for (float m : mask.data) count += m != 0.0f ? 1 : 0;
    if (count == 0) throw EmptyMask("loss_bce: empty mask");

    Tensor grad(pred.shape);
    double loss = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (mask.data[i] == 0.0f) continue;
        const double y = label.data[i];
        const double p_raw = pred.data[i];
        const double p = std::clamp(p_raw, 1e-6, 1.0 - 1e-6);
        loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        if (p_raw > 1e-6 && p_raw < 1.0 - 1e-6) {
            grad.data[i] = static_cast<float>((-y / p + (1.0 - y) / (1.0 - p)) / count);
        }
    }
    return {loss / static_cast<double>(count), std::move(grad)};
}

Tensor depth_to_tensor(const DepthImage& img, double offset, double scale, float miss_value) {
    Tensor t({1, img.height, img.width});
    for (size_t i = 0; i < img.depth.size(); ++i) {
        const float d = img.depth[i];
        t.data[i] = std::isfinite(d) ? static_cast<float>((d - offset) / scale) : miss_value;
    }
    return t;
}

Tensor grid_to_tensor(const VoxelGrid& grid) {
    Tensor t({1, grid.dims.nz, grid.dims.ny, grid.dims.nx});
    const float inv = static_cast<float>(1.0 / grid.trunc);
    // Grid storage is x-fastest with z outermost strides, matching [1,Z,Y,X].
    for (size_t i = 0; i < grid.values.size(); ++i) t.data[i] = grid.values[i] * inv;
    return t;
}

ModelConfig ModelConfig::tiny() {
    ModelConfig cfg;
    cfg.object3d_channels = {2, 2, 2, 2};
    cfg.object2d_channels = {2, 2, 2, 2};
    cfg.object2d_strides = {2, 1, 1, 1};
    cfg.view_channels = 2;
    cfg.corr_groups = 1;
    cfg.decoder_hidden = 2;
    return cfg;
}

namespace {

ConvParam make_conv2d(int in_c, int out_c, int k, std::mt19937_64& rng) {
    ConvParam p;
    p.w = Tensor({out_c, in_c, k, k});
    p.b = Tensor({out_c});
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_c) * k * k);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (float& v : p.w.data) v = static_cast<float>(dist(rng));
    p.gw = Tensor(p.w.shape);
    p.gb = Tensor(p.b.shape);
    p.vw = Tensor(p.w.shape);
    p.vb = Tensor(p.b.shape);
    return p;
}

ConvParam make_conv3d(int in_c, int out_c, int k, std::mt19937_64& rng) {
    ConvParam p;
    p.w = Tensor({out_c, in_c, k, k, k});
    p.b = Tensor({out_c});
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_c) * k * k * k);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (float& v : p.w.data) v = static_cast<float>(dist(rng));
    p.gw = Tensor(p.w.shape);
    p.gb = Tensor(p.b.shape);
    p.vw = Tensor(p.w.shape);
    p.vb = Tensor(p.b.shape);
    return p;
}

// Gradient of conv2d: accumulates gw/gb, returns grad wrt input (skipped
// when want_input_grad is false).
Tensor conv2d_backward(const Tensor& input, ConvParam& param, const Tensor& grad_out, int stride,
                       int pad, bool want_input_grad) {
    const int in_c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int out_c = param.w.dim(0), k = param.w.dim(2);
    const int oh = grad_out.dim(1), ow = grad_out.dim(2);

    parallel_for(out_c, [&](int64_t oc64) {
        const int oc = static_cast<int>(oc64);
        float gb = 0.0f;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const float g = grad_out.data[(static_cast<size_t>(oc) * oh + oy) * ow + ox];
                if (g == 0.0f) continue;
                gb += g;
                for (int ic = 0; ic < in_c; ++ic) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        const float* in_row = &input.data[(static_cast<size_t>(ic) * h + iy) * w];
                        float* gw_row =
                            &param.gw.data[((static_cast<size_t>(oc) * in_c + ic) * k + ky) * k];
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= w) continue;
                            gw_row[kx] += in_row[ix] * g;
                        }
                    }
                }
            }
        }
        param.gb.data[static_cast<size_t>(oc)] += gb;
    });

    Tensor grad_in;
    if (want_input_grad) {
        grad_in = Tensor(input.shape);
        parallel_for(in_c, [&](int64_t ic64) {
            const int ic = static_cast<int>(ic64);
            for (int oc = 0; oc < out_c; ++oc) {
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        const float g =
                            grad_out.data[(static_cast<size_t>(oc) * oh + oy) * ow + ox];
                        if (g == 0.0f) continue;
                        for (int ky = 0; ky < k; ++ky) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            float* gi_row =
                                &grad_in.data[(static_cast<size_t>(ic) * h + iy) * w];
                            const float* w_row =
                                &param.w
                                     .data[((static_cast<size_t>(oc) * in_c + ic) * k + ky) * k];
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= w) continue;
                                gi_row[ix] += w_row[kx] * g;
                            }
                        }
                    }
                }
            }
        });
    }
    return grad_in;
}

Tensor conv3d_backward(const Tensor& input, ConvParam& param, const Tensor& grad_out,
                       const std::array<int, 3>& stride, const std::array<int, 3>& pad,
                       bool want_input_grad) {
    const int in_c = input.dim(0), nz = input.dim(1), ny = input.dim(2), nx = input.dim(3);
    const int out_c = param.w.dim(0), k = param.w.dim(2);
    const int oz = grad_out.dim(1), oy = grad_out.dim(2), ox = grad_out.dim(3);

    parallel_for(out_c, [&](int64_t oc64) {
        const int oc = static_cast<int>(oc64);
        float gb = 0.0f;
        for (int z = 0; z < oz; ++z) {
            for (int y = 0; y < oy; ++y) {
                for (int x = 0; x < ox; ++x) {
                    const float g =
                        grad_out.data[((static_cast<size_t>(oc) * oz + z) * oy + y) * ox + x];
                    if (g == 0.0f) continue;
                    gb += g;
                    for (int ic = 0; ic < in_c; ++ic) {
                        for (int kz = 0; kz < k; ++kz) {
                            const int iz = z * stride[0] + kz - pad[0];
                            if (iz < 0 || iz >= nz) continue;
                            for (int ky = 0; ky < k; ++ky) {
                                const int iy = y * stride[1] + ky - pad[1];
                                if (iy < 0 || iy >= ny) continue;
                                const float* in_row =
                                    &input.data[((static_cast<size_t>(ic) * nz + iz) * ny + iy) *
                                                nx];
                                float* gw_row =
                                    &param.gw.data[(((static_cast<size_t>(oc) * in_c + ic) * k +
                                                     kz) * k + ky) * k];
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ix = x * stride[2] + kx - pad[2];
                                    if (ix < 0 || ix >= nx) continue;
                                    gw_row[kx] += in_row[ix] * g;
                                }
                            }
                        }
                    }
                }
            }
        }
        param.gb.data[static_cast<size_t>(oc)] += gb;
    });

    Tensor grad_in;
    if (want_input_grad) {
        grad_in = Tensor(input.shape);
        parallel_for(in_c, [&](int64_t ic64) {
            const int ic = static_cast<int>(ic64);
            for (int oc = 0; oc < out_c; ++oc) {
                for (int z = 0; z < oz; ++z) {
                    for (int y = 0; y < oy; ++y) {
                        for (int x = 0; x < ox; ++x) {
                            const float g =
                                grad_out
                                    .data[((static_cast<size_t>(oc) * oz + z) * oy + y) * ox + x];
                            if (g == 0.0f) continue;
                            for (int kz = 0; kz < k; ++kz) {
                                const int iz = z * stride[0] + kz - pad[0];
                                if (iz < 0 || iz >= nz) continue;
                                for (int ky = 0; ky < k; ++ky) {
                                    const int iy = y * stride[1] + ky - pad[1];
                                    if (iy < 0 || iy >= ny) continue;
                                    float* gi_row =
                                        &grad_in.data[((static_cast<size_t>(ic) * nz + iz) * ny +
                                                       iy) * nx];
                                    const float* w_row =
                                        &param.w.data[(((static_cast<size_t>(oc) * in_c + ic) * k +
                                                        kz) * k + ky) * k];
                                    for (int kx = 0; kx < k; ++kx) {
                                        const int ix = x * stride[2] + kx - pad[2];
                                        if (ix < 0 || ix >= nx) continue;
                                        gi_row[ix] += w_row[kx] * g;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return grad_in;
}

void cross_correlate_backward(const Tensor& view_feat, const Tensor& object_feat, int groups,
                              const Tensor& grad_out, Tensor& grad_view, Tensor& grad_obj) {
    const int c = view_feat.dim(0), h = view_feat.dim(1), w = view_feat.dim(2);
    const int kh = object_feat.dim(1), kw = object_feat.dim(2);
    const int cy = kh / 2, cx = kw / 2;
    const int per_group = c / groups;
    grad_view = Tensor(view_feat.shape);
    grad_obj = Tensor(object_feat.shape);

    parallel_for(c, [&](int64_t ci64) {
        const int ci = static_cast<int>(ci64);
        const int g = ci / per_group;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const float go = grad_out.data[(static_cast<size_t>(g) * h + y) * w + x];
                if (go == 0.0f) continue;
                for (int dy = 0; dy < kh; ++dy) {
                    const int iy = y + dy - cy;
                    if (iy < 0 || iy >= h) continue;
                    float* gv_row = &grad_view.data[(static_cast<size_t>(ci) * h + iy) * w];
                    const float* v_row = &view_feat.data[(static_cast<size_t>(ci) * h + iy) * w];
                    float* gobj_row = &grad_obj.data[(static_cast<size_t>(ci) * kh + dy) * kw];
                    const float* o_row =
                        &object_feat.data[(static_cast<size_t>(ci) * kh + dy) * kw];
                    for (int dx = 0; dx < kw; ++dx) {
                        const int ix = x + dx - cx;
                        if (ix < 0 || ix >= w) continue;
                        gv_row[ix] += o_row[dx] * go;
                        gobj_row[dx] += v_row[ix] * go;
                    }
                }
            }
        }
    });
}

Tensor mean_pool_z(const Tensor& x) {
    const int c = x.dim(0), nz = x.dim(1), ny = x.dim(2), nx = x.dim(3);
    Tensor out({c, ny, nx});
    const float inv = 1.0f / static_cast<float>(nz);
    for (int ci = 0; ci < c; ++ci) {
        for (int z = 0; z < nz; ++z) {
            const float* src = &x.data[(static_cast<size_t>(ci) * nz + z) * ny * nx];
            float* dst = &out.data[static_cast<size_t>(ci) * ny * nx];
            for (int i = 0; i < ny * nx; ++i) dst[i] += src[i] * inv;
        }
    }
    return out;
}

Tensor mean_pool_z_backward(const Tensor& grad_out, int nz) {
    const int c = grad_out.dim(0), ny = grad_out.dim(1), nx = grad_out.dim(2);
    Tensor grad_in({c, nz, ny, nx});
    const float inv = 1.0f / static_cast<float>(nz);
    for (int ci = 0; ci < c; ++ci) {
        const float* src = &grad_out.data[static_cast<size_t>(ci) * ny * nx];
        for (int z = 0; z < nz; ++z) {
            float* dst = &grad_in.data[(static_cast<size_t>(ci) * nz + z) * ny * nx];
            for (int i = 0; i < ny * nx; ++i) dst[i] = src[i] * inv;
        }
    }
    return grad_in;
}

constexpr std::array<int, 3> kObj3dStride{2, 1, 1};  // halve z each layer
constexpr std::array<int, 3> kObj3dPad{1, 1, 1};

}  // namespace

AffordanceModel::AffordanceModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    std::mt19937_64 rng(seed);
    int in_c = 1;
    for (int c : cfg.object3d_channels) {
        obj3d_.push_back(make_conv3d(in_c, c, 3, rng));
        in_c = c;
    }
    for (int c : cfg.object2d_channels) {
        obj2d_.push_back(make_conv2d(in_c, c, 3, rng));
        in_c = c;
    }
    in_c = 1;
    for (int i = 0; i < 5; ++i) {
        view_.push_back(make_conv2d(in_c, cfg.view_channels, 3, rng));
        in_c = cfg.view_channels;
    }
    if (cfg.object2d_channels.back() != cfg.view_channels) {
        throw ShapeMismatch("AffordanceModel: encoder feature widths differ");
    }
    dec0_ = make_conv2d(cfg.corr_groups, cfg.decoder_hidden, 3, rng);
    dec1_ = make_conv2d(cfg.decoder_hidden, 1, 3, rng);
}

Tensor AffordanceModel::encode_view(const Tensor& view) const {
    Tensor x = view;
    for (const ConvParam& layer : view_) {
        x = apply_leaky(conv2d_forward(x, layer.w, layer.b, 1, 1), cfg_.leak);
    }
    return x;
}

Tensor AffordanceModel::encode_object(const Tensor& object) const {
    Tensor x = object;
    for (const ConvParam& layer : obj3d_) {
        x = apply_leaky(conv3d_forward(x, layer.w, layer.b, kObj3dStride, kObj3dPad), cfg_.leak);
    }
    x = mean_pool_z(x);
    for (size_t i = 0; i < obj2d_.size(); ++i) {
        x = apply_leaky(
            conv2d_forward(x, obj2d_[i].w, obj2d_[i].b, cfg_.object2d_strides[i], 1), cfg_.leak);
    }
    return x;
}

Tensor AffordanceModel::score_from_features(const Tensor& view_feat,
                                            const Tensor& object_feat) const {
    Tensor corr = cross_correlate_features(view_feat, object_feat, cfg_.corr_groups);
    Tensor h = apply_leaky(conv2d_forward(corr, dec0_.w, dec0_.b, 1, 1), cfg_.leak);
    Tensor logits = conv2d_forward(h, dec1_.w, dec1_.b, 1, 1);
    for (float& v : logits.data) v = stable_sigmoid(v);
    return logits;
}

Tensor AffordanceModel::forward(const Tensor& view, const Tensor& object,
                                ForwardTrace* trace) const {
    if (!trace) {
        return score_from_features(encode_view(view), encode_object(object));
    }
    trace->view_input = view;
    trace->object_input = object;

    Tensor x = view;
    trace->view_pre.clear();
    for (const ConvParam& layer : view_) {
        Tensor pre = conv2d_forward(x, layer.w, layer.b, 1, 1);
        trace->view_pre.push_back(pre);
        x = apply_leaky(pre, cfg_.leak);
    }
    trace->view_feat = x;

    Tensor o = object;
    trace->obj3d_pre.clear();
    for (const ConvParam& layer : obj3d_) {
        Tensor pre = conv3d_forward(o, layer.w, layer.b, kObj3dStride, kObj3dPad);
        trace->obj3d_pre.push_back(pre);
        o = apply_leaky(pre, cfg_.leak);
    }
    trace->pooled = mean_pool_z(o);
    Tensor p = trace->pooled;
    trace->obj2d_pre.clear();
    for (size_t i = 0; i < obj2d_.size(); ++i) {
        Tensor pre = conv2d_forward(p, obj2d_[i].w, obj2d_[i].b, cfg_.object2d_strides[i], 1);
        trace->obj2d_pre.push_back(pre);
        p = apply_leaky(pre, cfg_.leak);
    }
    trace->object_feat = p;

    trace->corr = cross_correlate_features(trace->view_feat, trace->object_feat, cfg_.corr_groups);
    trace->dec0_pre = conv2d_forward(trace->corr, dec0_.w, dec0_.b, 1, 1);
    Tensor h = apply_leaky(trace->dec0_pre, cfg_.leak);
    trace->logits = conv2d_forward(h, dec1_.w, dec1_.b, 1, 1);
    trace->probs = trace->logits;
    for (float& v : trace->probs.data) v = stable_sigmoid(v);
    return trace->probs;
}

void AffordanceModel::backward(const ForwardTrace& trace, const Tensor& grad_probs) {
    const float leak_f = static_cast<float>(cfg_.leak);

    Tensor dlogits = grad_probs;
    for (size_t i = 0; i < dlogits.size(); ++i) {
        const float p = trace.probs.data[i];
        dlogits.data[i] *= p * (1.0f - p);
    }

    Tensor h = apply_leaky(trace.dec0_pre, cfg_.leak);
    Tensor dh = conv2d_backward(h, dec1_, dlogits, 1, 1, true);
    for (size_t i = 0; i < dh.size(); ++i) {
        dh.data[i] *= leaky_grad(trace.dec0_pre.data[i], leak_f);
    }
    Tensor dcorr = conv2d_backward(trace.corr, dec0_, dh, 1, 1, true);

    Tensor dview_feat, dobj_feat;
    cross_correlate_backward(trace.view_feat, trace.object_feat, cfg_.corr_groups, dcorr,
                             dview_feat, dobj_feat);

    // View stack.
    Tensor dpost = dview_feat;
    for (int i = static_cast<int>(view_.size()) - 1; i >= 0; --i) {
        Tensor dpre = dpost;
        const Tensor& pre = trace.view_pre[static_cast<size_t>(i)];
        for (size_t j = 0; j < dpre.size(); ++j) {
            dpre.data[j] *= leaky_grad(pre.data[j], leak_f);
        }
        const Tensor& input =
            i == 0 ? trace.view_input : apply_leaky(trace.view_pre[static_cast<size_t>(i - 1)],
                                                    cfg_.leak);
        dpost = conv2d_backward(input, view_[static_cast<size_t>(i)], dpre, 1, 1, i > 0);
    }

    // Object 2D stack.
    dpost = dobj_feat;
    for (int i = static_cast<int>(obj2d_.size()) - 1; i >= 0; --i) {
        Tensor dpre = dpost;
        const Tensor& pre = trace.obj2d_pre[static_cast<size_t>(i)];
        for (size_t j = 0; j < dpre.size(); ++j) {
            dpre.data[j] *= leaky_grad(pre.data[j], leak_f);
        }
        const Tensor& input =
            i == 0 ? trace.pooled : apply_leaky(trace.obj2d_pre[static_cast<size_t>(i - 1)],
                                                cfg_.leak);
        dpost = conv2d_backward(input, obj2d_[static_cast<size_t>(i)], dpre,
                                cfg_.object2d_strides[static_cast<size_t>(i)], 1, true);
    }

    // Through the z pool into the 3D stack.
    dpost = mean_pool_z_backward(dpost, trace.obj3d_pre.back().dim(1));
    for (int i = static_cast<int>(obj3d_.size()) - 1; i >= 0; --i) {
        Tensor dpre = dpost;
        const Tensor& pre = trace.obj3d_pre[static_cast<size_t>(i)];
        for (size_t j = 0; j < dpre.size(); ++j) {
            dpre.data[j] *= leaky_grad(pre.data[j], leak_f);
        }
        const Tensor& input =
            i == 0 ? trace.object_input : apply_leaky(trace.obj3d_pre[static_cast<size_t>(i - 1)],
                                                      cfg_.leak);
        dpost = conv3d_backward(input, obj3d_[static_cast<size_t>(i)], dpre, kObj3dStride,
                                kObj3dPad, i > 0);
    }
}

std::vector<ConvParam*> AffordanceModel::parameters() {
    std::vector<ConvParam*> out;
    for (ConvParam& p : obj3d_) out.push_back(&p);
    for (ConvParam& p : obj2d_) out.push_back(&p);
    for (ConvParam& p : view_) out.push_back(&p);
    out.push_back(&dec0_);
    out.push_back(&dec1_);
    return out;
}

std::vector<const ConvParam*> AffordanceModel::parameters() const {
    std::vector<const ConvParam*> out;
    for (const ConvParam& p : obj3d_) out.push_back(&p);
    for (const ConvParam& p : obj2d_) out.push_back(&p);
    for (const ConvParam& p : view_) out.push_back(&p);
    out.push_back(&dec0_);
    out.push_back(&dec1_);
    return out;
}

void AffordanceModel::zero_grads() {
    for (ConvParam* p : parameters()) {
        std::fill(p->gw.data.begin(), p->gw.data.end(), 0.0f);
        std::fill(p->gb.data.begin(), p->gb.data.end(), 0.0f);
    }
}

void AffordanceModel::sgd_step(double lr, double momentum, double batch_scale) {
    const float m = static_cast<float>(momentum);
    const float step = static_cast<float>(lr);
    const float inv = static_cast<float>(1.0 / batch_scale);
    for (ConvParam* p : parameters()) {
        for (size_t i = 0; i < p->w.size(); ++i) {
            p->vw.data[i] = m * p->vw.data[i] + p->gw.data[i] * inv;
            p->w.data[i] -= step * p->vw.data[i];
        }
        for (size_t i = 0; i < p->b.size(); ++i) {
            p->vb.data[i] = m * p->vb.data[i] + p->gb.data[i] * inv;
            p->b.data[i] -= step * p->vb.data[i];
        }
    }
    zero_grads();
}

void AffordanceModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("AffordanceModel::save: cannot open " + path);
    out << "AFNET1\n";
    out << "cfg";
    for (int c : cfg_.object3d_channels) out << " " << c;
    for (int c : cfg_.object2d_channels) out << " " << c;
    for (int s : cfg_.object2d_strides) out << " " << s;
    out << " " << cfg_.view_channels << " " << cfg_.corr_groups << " " << cfg_.decoder_hidden
        << " " << cfg_.leak << " " << cfg_.depth_offset << " " << cfg_.depth_scale << " "
        << cfg_.miss_value << "\n";
    const auto params = parameters();
    out << "layers " << params.size() << "\n";
    for (const ConvParam* p : params) {
        out << "layer";
        for (int d : p->w.shape) out << " " << d;
        out << "\n";
    }
    out << "blob\n";
    for (const ConvParam* p : params) {
        out.write(reinterpret_cast<const char*>(p->w.data.data()),
                  static_cast<std::streamsize>(p->w.size() * sizeof(float)));
        out.write(reinterpret_cast<const char*>(p->b.data.data()),
                  static_cast<std::streamsize>(p->b.size() * sizeof(float)));
    }
    if (!out) throw IoError("AffordanceModel::save: write failed for " + path);
}

AffordanceModel AffordanceModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("AffordanceModel::load: cannot open " + path);
    std::string magic, tag;
    in >> magic;
    if (magic != "AFNET1") throw IoError("AffordanceModel::load: bad magic in " + path);
    ModelConfig cfg;
    in >> tag;
    if (tag != "cfg") throw IoError("AffordanceModel::load: missing config");
    for (int& c : cfg.object3d_channels) in >> c;
    for (int& c : cfg.object2d_channels) in >> c;
    for (int& s : cfg.object2d_strides) in >> s;
    in >> cfg.view_channels >> cfg.corr_groups >> cfg.decoder_hidden >> cfg.leak >>
        cfg.depth_offset >> cfg.depth_scale >> cfg.miss_value;
    size_t n_layers = 0;
    in >> tag >> n_layers;
    if (tag != "layers") throw IoError("AffordanceModel::load: missing layer count");

    AffordanceModel model(cfg, 0);
    auto params = model.parameters();
    if (params.size() != n_layers) throw IoError("AffordanceModel::load: layer count mismatch");
    for (ConvParam* p : params) {
        in >> tag;
        if (tag != "layer") throw IoError("AffordanceModel::load: manifest truncated");
        for (int d : p->w.shape) {
            int got = 0;
            in >> got;
            if (got != d) throw IoError("AffordanceModel::load: layer shape mismatch");
        }
    }
    in >> tag;
    if (tag != "blob") throw IoError("AffordanceModel::load: missing blob");
    in.get();  // newline
    for (ConvParam* p : params) {
        in.read(reinterpret_cast<char*>(p->w.data.data()),
                static_cast<std::streamsize>(p->w.size() * sizeof(float)));
        in.read(reinterpret_cast<char*>(p->b.data.data()),
                static_cast<std::streamsize>(p->b.size() * sizeof(float)));
    }
    if (!in) throw IoError("AffordanceModel::load: truncated blob in " + path);
    return model;
}

double train_step(AffordanceModel& model, const std::vector<TrainSample>& batch, double lr,
                  double momentum) {
    assert(!batch.empty());
    double total = 0.0;
    for (const TrainSample& sample : batch) {
        ForwardTrace trace;
        const Tensor probs = model.forward(sample.view, sample.object, &trace);
        auto [loss, grad] = loss_bce(probs, sample.label, sample.mask);
        total += loss;
        model.backward(trace, grad);
    }
    model.sgd_step(lr, momentum, static_cast<double>(batch.size()));
    return total / static_cast<double>(batch.size());
}

Tensor LearnedValue::object_input(const VoxelGrid& object_grid, const Rotation& rotation) const {
    return grid_to_tensor(rotate_resample_grid(object_grid, rotation, object_dims_, object_voxel_));
}

AffordanceMap LearnedValue::score_map(const VoxelGrid&, int view_index, const std::vector<Vec3>&,
                                      const Vec3&, const Rotation& object_rotation,
                                      const VoxelGrid& object_grid, const Vec3& d,
                                      const Camera& cam, const DepthImage& depth,
                                      double* fit_score) {
    (void)fit_score;
    auto it = view_cache_.find(view_index);
    if (it == view_cache_.end()) {
        const ModelConfig& cfg = model_.config();
        Tensor view = depth_to_tensor(depth, cfg.depth_offset, cfg.depth_scale, cfg.miss_value);
        it = view_cache_.emplace(view_index, model_.encode_view(view)).first;
    }
    const Tensor obj_feat = model_.encode_object(object_input(object_grid, object_rotation));
    const Tensor probs = model_.score_from_features(it->second, obj_feat);

    AffordanceMap map(cam.intr.width, cam.intr.height);
    map.insert_dir = d.normalized();
    map.object_rotation = object_rotation;
    map.camera = cam;
    map.scores.assign(probs.data.begin(), probs.data.end());
    return map;
}

}  // namespace pickplace
