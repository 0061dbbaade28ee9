#include <doctest.h>

#include <cstdio>
#include <map>
#include <random>
#include <utility>

#include "pickplace/errors.hpp"
#include "pickplace/net.hpp"
#include "pickplace/train.hpp"

using namespace pickplace;

namespace {

std::mt19937_64 rng(31337);

Tensor random_tensor(std::vector<int> shape, double scale = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<float> u(-static_cast<float>(scale),
                                            static_cast<float>(scale));
    for (float& v : t.data) v = u(rng);
    return t;
}

// Naive direct-loop convolution oracle, independent of the implementation.
Tensor conv2d_oracle(const Tensor& in, const Tensor& w, const Tensor& b, int stride, int pad) {
    const int ic = in.dim(0), h = in.dim(1), wd = in.dim(2);
    const int oc = w.dim(0), k = w.dim(2);
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (wd + 2 * pad - k) / stride + 1;
    Tensor out({oc, oh, ow});
    for (int o = 0; o < oc; ++o) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double acc = b.data.empty() ? 0.0 : b.data[static_cast<size_t>(o)];
                for (int c = 0; c < ic; ++c) {
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = y * stride + ky - pad;
                            const int ix = x * stride + kx - pad;
                            if (iy < 0 || ix < 0 || iy >= h || ix >= wd) continue;
                            acc += in.data[(static_cast<size_t>(c) * h + iy) * wd + ix] *
                                   w.data[((static_cast<size_t>(o) * ic + c) * k + ky) * k + kx];
                        }
                    }
                }
                out.data[(static_cast<size_t>(o) * oh + y) * ow + x] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

Tensor conv3d_oracle(const Tensor& in, const Tensor& w, const Tensor& b,
                     const std::array<int, 3>& stride, const std::array<int, 3>& pad) {
    const int ic = in.dim(0), nz = in.dim(1), ny = in.dim(2), nx = in.dim(3);
    const int oc = w.dim(0), k = w.dim(2);
    const int oz = (nz + 2 * pad[0] - k) / stride[0] + 1;
    const int oy = (ny + 2 * pad[1] - k) / stride[1] + 1;
    const int ox = (nx + 2 * pad[2] - k) / stride[2] + 1;
    Tensor out({oc, oz, oy, ox});
    for (int o = 0; o < oc; ++o)
        for (int z = 0; z < oz; ++z)
            for (int y = 0; y < oy; ++y)
                for (int x = 0; x < ox; ++x) {
                    double acc = b.data.empty() ? 0.0 : b.data[static_cast<size_t>(o)];
                    for (int c = 0; c < ic; ++c)
                        for (int kz = 0; kz < k; ++kz)
                            for (int ky = 0; ky < k; ++ky)
                                for (int kx = 0; kx < k; ++kx) {
                                    const int iz = z * stride[0] + kz - pad[0];
                                    const int iy = y * stride[1] + ky - pad[1];
                                    const int ix = x * stride[2] + kx - pad[2];
                                    if (iz < 0 || iy < 0 || ix < 0 || iz >= nz || iy >= ny ||
                                        ix >= nx)
                                        continue;
                                    acc += in.data[((static_cast<size_t>(c) * nz + iz) * ny + iy) *
                                                       nx + ix] *
                                           w.data[(((static_cast<size_t>(o) * ic + c) * k + kz) *
                                                       k + ky) * k + kx];
                                }
                    out.data[((static_cast<size_t>(o) * oz + z) * oy + y) * ox + x] =
                        static_cast<float>(acc);
                }
    return out;
}

Tensor correlate_oracle(const Tensor& view, const Tensor& obj, int groups) {
    const int c = view.dim(0), h = view.dim(1), w = view.dim(2);
    const int kh = obj.dim(1), kw = obj.dim(2);
    const int cy = kh / 2, cx = kw / 2;
    const int per = c / groups;
    Tensor out({groups, h, w});
    for (int g = 0; g < groups; ++g)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int ci = g * per; ci < (g + 1) * per; ++ci)
                    for (int dy = 0; dy < kh; ++dy)
                        for (int dx = 0; dx < kw; ++dx) {
                            const int iy = y + dy - cy;
                            const int ix = x + dx - cx;
                            if (iy < 0 || ix < 0 || iy >= h || ix >= w) continue;
                            acc += view.data[(static_cast<size_t>(ci) * h + iy) * w + ix] *
                                   obj.data[(static_cast<size_t>(ci) * kh + dy) * kw + dx];
                        }
                out.data[(static_cast<size_t>(g) * h + y) * w + x] = static_cast<float>(acc);
            }
    return out;
}

// Relative-error comparison with an absolute floor for near-zero values.
void check_close(const Tensor& a, const Tensor& b, double rel, double floor_abs) {
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        const double err = std::abs(static_cast<double>(a.data[i]) - b.data[i]);
        const double scale = std::max(std::abs(static_cast<double>(a.data[i])),
                                      std::abs(static_cast<double>(b.data[i])));
        CHECK(err <= rel * scale + floor_abs);
    }
}

Tensor tiny_object_input() { return random_tensor({1, 8, 8, 8}, 0.5); }
Tensor tiny_view_input() { return random_tensor({1, 8, 8}, 0.5); }

}  // namespace

TEST_SUITE("net") {

TEST_CASE("conv2d 1x1 identity kernel reproduces the input") {
    const Tensor in = random_tensor({1, 5, 5});
    Tensor w({1, 1, 1, 1});
    w.data[0] = 1.0f;
    const Tensor out = conv2d_forward(in, w, Tensor({1}), 1, 0);
    REQUIRE(out.size() == in.size());
    for (size_t i = 0; i < in.size(); ++i) CHECK(out.data[i] == doctest::Approx(in.data[i]));
}

TEST_CASE("conv2d all-ones 3x3 kernel spreads an impulse") {
    Tensor in({1, 5, 5});
    in.data[2 * 5 + 2] = 1.0f;  // hot pixel at (2,2)
    Tensor w({1, 1, 3, 3});
    for (float& v : w.data) v = 1.0f;
    const Tensor out = conv2d_forward(in, w, Tensor({1}), 1, 1);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 5; ++x) {
            const bool near = std::abs(y - 2) <= 1 && std::abs(x - 2) <= 1;
            CHECK(out.data[static_cast<size_t>(y) * 5 + x] == (near ? 1.0f : 0.0f));
        }
    }
}

TEST_CASE("conv2d matches the direct-loop oracle") {
    for (const int stride : {1, 2}) {
        for (const int pad : {0, 1}) {
            const Tensor in = random_tensor({3, 8, 8});
            const Tensor w = random_tensor({4, 3, 3, 3});
            const Tensor b = random_tensor({4});
            check_close(conv2d_forward(in, w, b, stride, pad), conv2d_oracle(in, w, b, stride, pad),
                        1e-5, 1e-6);
        }
    }
}

TEST_CASE("conv3d matches the direct-loop oracle") {
    const Tensor in = random_tensor({2, 8, 8, 8});
    const Tensor w = random_tensor({3, 2, 3, 3, 3});
    const Tensor b = random_tensor({3});
    const std::array<int, 3> stride{2, 1, 1};
    const std::array<int, 3> pad{1, 1, 1};
    check_close(conv3d_forward(in, w, b, stride, pad), conv3d_oracle(in, w, b, stride, pad), 1e-5,
                1e-6);
}

TEST_CASE("conv shape errors throw ShapeMismatch") {
    const Tensor in = random_tensor({2, 6, 6});
    const Tensor w = random_tensor({4, 3, 3, 3});  // wrong in-channels
    CHECK_THROWS_AS(conv2d_forward(in, w, Tensor({4}), 1, 1), ShapeMismatch);
}

TEST_CASE("cross correlation delta kernel reproduces the view") {
    Tensor view = random_tensor({1, 6, 6});
    Tensor obj({1, 3, 3});
    obj.data[1 * 3 + 1] = 1.0f;  // spatial delta at the kernel center
    const Tensor out = cross_correlate_features(view, obj, 1);
    for (size_t i = 0; i < view.size(); ++i) CHECK(out.data[i] == doctest::Approx(view.data[i]));
}

TEST_CASE("cross correlation with a zero kernel is zero") {
    const Tensor view = random_tensor({2, 6, 6});
    const Tensor obj({2, 3, 3});
    for (float v : cross_correlate_features(view, obj, 2).data) CHECK(v == 0.0f);
}

TEST_CASE("cross correlation matches the direct-loop oracle") {
    const Tensor view = random_tensor({4, 9, 7});
    const Tensor obj = random_tensor({4, 4, 5});
    check_close(cross_correlate_features(view, obj, 2), correlate_oracle(view, obj, 2), 1e-5,
                1e-6);
    CHECK_THROWS_AS(cross_correlate_features(view, random_tensor({3, 3, 3}), 1), ShapeMismatch);
    CHECK_THROWS_AS(cross_correlate_features(view, obj, 3), ShapeMismatch);
}

TEST_CASE("loss_bce analytic values") {
    Tensor pred({1, 2, 2}), label({1, 2, 2}), mask({1, 2, 2});
    for (float& v : mask.data) v = 1.0f;
    // Perfect prediction under clamping.
    pred.data = {1.0f, 0.0f, 1.0f, 0.0f};
    label.data = {1.0f, 0.0f, 1.0f, 0.0f};
    CHECK(loss_bce(pred, label, mask).first <= 1e-5);
    // Max-entropy prediction.
    for (float& v : pred.data) v = 0.5f;
    CHECK(loss_bce(pred, label, mask).first == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    // Empty masks are rejected.
    Tensor empty_mask({1, 2, 2});
    CHECK_THROWS_AS(loss_bce(pred, label, empty_mask), EmptyMask);
}

TEST_CASE("loss_bce gradient matches central finite differences") {
    Tensor pred({1, 4, 4}), label({1, 4, 4}), mask({1, 4, 4});
    std::uniform_real_distribution<float> u(0.1f, 0.9f);
    for (size_t i = 0; i < pred.size(); ++i) {
        pred.data[i] = u(rng);
        label.data[i] = (i % 3 == 0) ? 1.0f : 0.0f;
        mask.data[i] = (i % 2 == 0) ? 1.0f : 0.0f;
    }
    const auto [loss, grad] = loss_bce(pred, label, mask);
    (void)loss;
    const double h = 1e-3;
    for (size_t i = 0; i < pred.size(); ++i) {
        Tensor plus = pred, minus = pred;
        plus.data[i] += static_cast<float>(h);
        minus.data[i] -= static_cast<float>(h);
        const double fd =
            (loss_bce(plus, label, mask).first - loss_bce(minus, label, mask).first) / (2 * h);
        const double err = std::abs(fd - grad.data[i]);
        CHECK(err <= 1e-3 * std::max(std::abs(fd), 1.0));
    }
}

TEST_CASE("forward produces probabilities, deterministically, at any view size") {
    const AffordanceModel model(ModelConfig::tiny(), 3);
    const Tensor object = tiny_object_input();
    for (const int size : {8, 12, 16}) {
        const Tensor view = random_tensor({1, size, size}, 0.5);
        const Tensor probs = model.forward(view, object);
        REQUIRE(probs.shape == std::vector<int>{1, size, size});
        for (float p : probs.data) {
            CHECK(p > 0.0f);
            CHECK(p < 1.0f);
        }
        const Tensor again = model.forward(view, object);
        for (size_t i = 0; i < probs.size(); ++i) CHECK(probs.data[i] == again.data[i]);
    }
}

TEST_CASE("full-model gradients match finite differences on the tiny config") {
    AffordanceModel model(ModelConfig::tiny(), 5);
    const Tensor view = tiny_view_input();
    const Tensor object = tiny_object_input();
    Tensor label({1, 8, 8}), mask({1, 8, 8});
    for (size_t i = 0; i < label.size(); ++i) {
        label.data[i] = (i % 5 == 0) ? 1.0f : 0.0f;
        mask.data[i] = 1.0f;
    }

    ForwardTrace trace;
    const Tensor probs = model.forward(view, object, &trace);
    const auto [loss, grad] = loss_bce(probs, label, mask);
    (void)loss;
    model.zero_grads();
    model.backward(trace, grad);

    const auto loss_at = [&]() {
        return loss_bce(model.forward(view, object), label, mask).first;
    };

    std::vector<ConvParam*> params = model.parameters();
    std::uniform_int_distribution<size_t> pick_param(0, params.size() - 1);
    const double h = 1e-3;
    int checked = 0;
    int bad = 0;
    while (checked < 100) {
        ConvParam* p = params[pick_param(rng)];
        std::uniform_int_distribution<size_t> pick_w(0, p->w.size() - 1);
        const size_t i = pick_w(rng);
        const float saved = p->w.data[i];
        p->w.data[i] = saved + static_cast<float>(h);
        const double up = loss_at();
        p->w.data[i] = saved - static_cast<float>(h);
        const double down = loss_at();
        p->w.data[i] = saved;
        const double fd = (up - down) / (2 * h);
        const double analytic = p->gw.data[i];
        const double err = std::abs(fd - analytic);
        if (err > 1e-2 * std::max({std::abs(fd), std::abs(analytic), 0.05})) ++bad;
        ++checked;
    }
    CHECK(bad == 0);
}

TEST_CASE("per-layer conv gradients match finite differences") {
    // One isolated conv2d layer driven by a quadratic loss.
    ConvParam layer;
    layer.w = random_tensor({2, 2, 3, 3}, 0.5);
    layer.b = Tensor({2});
    layer.gw = Tensor(layer.w.shape);
    layer.gb = Tensor(layer.b.shape);
    layer.vw = Tensor(layer.w.shape);
    layer.vb = Tensor(layer.b.shape);
    const Tensor in = random_tensor({2, 6, 6}, 0.5);

    // loss = 0.5 * sum(out^2); dloss/dout = out.
    AffordanceModel helper(ModelConfig::tiny(), 11);  // only for conv plumbing symmetry
    (void)helper;
    const Tensor out = conv2d_forward(in, layer.w, layer.b, 1, 1);
    const auto loss_of = [&](const Tensor& w) {
        const Tensor o = conv2d_forward(in, w, layer.b, 1, 1);
        double acc = 0.0;
        for (float v : o.data) acc += 0.5 * v * v;
        return acc;
    };
    // Analytic weight gradient via the oracle formulation: dL/dw = conv of
    // input with out as the upstream gradient. Reuse the library backward by
    // wrapping through train_step is overkill; use finite differences both
    // sides at two scales instead to validate the forward's linearity in w.
    const double h = 1e-3;
    for (int trial = 0; trial < 40; ++trial) {
        std::uniform_int_distribution<size_t> pick(0, layer.w.size() - 1);
        const size_t i = pick(rng);
        Tensor plus = layer.w, minus = layer.w;
        plus.data[i] += static_cast<float>(h);
        minus.data[i] -= static_cast<float>(h);
        const double fd = (loss_of(plus) - loss_of(minus)) / (2 * h);
        // Direct analytic: sum over out positions of out * d(out)/dw.
        const int oc = 2, ic = 2, k = 3;
        const size_t o = i / (static_cast<size_t>(ic) * k * k);
        const size_t rem = i % (static_cast<size_t>(ic) * k * k);
        const size_t c = rem / (static_cast<size_t>(k) * k);
        const size_t ky = (rem / k) % k;
        const size_t kx = rem % k;
        double analytic = 0.0;
        for (int y = 0; y < 6; ++y) {
            for (int x = 0; x < 6; ++x) {
                const int iy = y + static_cast<int>(ky) - 1;
                const int ix = x + static_cast<int>(kx) - 1;
                if (iy < 0 || ix < 0 || iy >= 6 || ix >= 6) continue;
                analytic += out.data[(o * 6 + y) * 6 + x] * in.data[(c * 6 + iy) * 6 + ix];
            }
        }
        (void)oc;
        CHECK(std::abs(fd - analytic) <= 1e-3 * std::max(std::abs(analytic), 1.0));
    }
}

TEST_CASE("train_step with lr 0 leaves weights unchanged") {
    AffordanceModel model(ModelConfig::tiny(), 7);
    std::vector<float> before;
    for (const ConvParam* p : std::as_const(model).parameters()) {
        before.insert(before.end(), p->w.data.begin(), p->w.data.end());
    }
    TrainSample sample;
    sample.view = tiny_view_input();
    sample.object = tiny_object_input();
    sample.label = Tensor({1, 8, 8});
    sample.mask = Tensor({1, 8, 8});
    sample.mask.data[10] = 1.0f;
    train_step(model, {sample}, 0.0);
    size_t i = 0;
    for (const ConvParam* p : std::as_const(model).parameters()) {
        for (float v : p->w.data) CHECK(v == before[i++]);
    }
}

TEST_CASE("repeated train_step overfits a single separable sample") {
    AffordanceModel model(ModelConfig::tiny(), 9);
    // Labels follow the input structure (a bright patch), which a small
    // convolutional stack can fit.
    TrainSample sample;
    sample.view = Tensor({1, 8, 8});
    sample.object = tiny_object_input();
    sample.label = Tensor({1, 8, 8});
    sample.mask = Tensor({1, 8, 8});
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            const bool hot = y >= 2 && y <= 4 && x >= 3 && x <= 5;
            sample.view.data[static_cast<size_t>(y) * 8 + x] = hot ? 1.0f : -0.5f;
            sample.label.data[static_cast<size_t>(y) * 8 + x] = hot ? 1.0f : 0.0f;
            sample.mask.data[static_cast<size_t>(y) * 8 + x] = 1.0f;
        }
    }
    const double first = train_step(model, {sample}, 0.05);
    double last = first;
    for (int i = 0; i < 150; ++i) last = train_step(model, {sample}, 0.05);
    CHECK(last < first);
    CHECK(last < 0.6 * first);
}

TEST_CASE("checkpoints round trip bit exact") {
    AffordanceModel model(ModelConfig::tiny(), 21);
    const std::string path = "test_model_roundtrip.afnet";
    model.save(path);
    const AffordanceModel loaded = AffordanceModel::load(path);
    std::remove(path.c_str());
    const auto a = std::as_const(model).parameters();
    const auto b = loaded.parameters();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i]->w.size() == b[i]->w.size());
        for (size_t j = 0; j < a[i]->w.size(); ++j) CHECK(a[i]->w.data[j] == b[i]->w.data[j]);
    }
    // Same forward behavior.
    const Tensor view = tiny_view_input();
    const Tensor object = tiny_object_input();
    const Tensor pa = model.forward(view, object);
    const Tensor pb = loaded.forward(view, object);
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa.data[i] == pb.data[i]);
}

TEST_CASE("checkpoint magic is AFNET1") {
    AffordanceModel model(ModelConfig::tiny(), 2);
    const std::string path = "test_model_magic.afnet";
    model.save(path);
    FILE* f = std::fopen(path.c_str(), "rb");
    REQUIRE(f != nullptr);
    char magic[7] = {};
    REQUIRE(std::fread(magic, 1, 6, f) == 6);
    std::fclose(f);
    std::remove(path.c_str());
    CHECK(std::string(magic) == "AFNET1");
}

TEST_CASE("epsilon 1 explores uniformly over valid pixels") {
    // Two maps whose views have known valid-pixel counts.
    std::vector<AffordanceMap> maps;
    std::vector<DepthImage> depths;
    for (int m = 0; m < 2; ++m) {
        AffordanceMap map(8, 8);
        DepthImage depth(8, 8);
        for (int i = 0; i < 8 * 8; ++i) {
            if ((i + m) % 2 == 0) depth.depth[static_cast<size_t>(i)] = 0.5f;
        }
        maps.push_back(map);
        depths.push_back(depth);
    }
    std::vector<const DepthImage*> depth_ptrs{&depths[0], &depths[1]};

    std::mt19937_64 local(99);
    std::map<std::pair<int, int>, int> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const PlaceAction a = choose_epsilon_greedy(maps, depth_ptrs, 1.0, local);
        CHECK(depths[static_cast<size_t>(a.map_index)].valid(a.u, a.v));
        counts[{a.map_index, a.v * 8 + a.u}] += 1;
    }
    // Chi-square over all 64 valid pixels, uniform expectation.
    const int cells = 64;
    const double expected = static_cast<double>(draws) / cells;
    double chi2 = 0.0;
    for (const auto& [key, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
    CHECK(counts.size() == cells);
    // 63 dof: p > 0.01 means chi2 below ~92.0.
    CHECK(chi2 < 92.0);
}

TEST_CASE("epsilon 0 equals the exact argmax") {
    std::vector<AffordanceMap> maps;
    std::vector<DepthImage> depths;
    AffordanceMap map(6, 6);
    DepthImage depth(6, 6);
    for (float& d : depth.depth) d = 0.4f;
    map.score(4, 2) = 0.7f;
    maps.push_back(map);
    depths.push_back(depth);
    std::vector<const DepthImage*> depth_ptrs{&depths[0]};
    std::mt19937_64 local(5);
    for (int i = 0; i < 20; ++i) {
        const PlaceAction a = choose_epsilon_greedy(maps, depth_ptrs, 0.0, local);
        const PlaceAction b = argmax_action(maps);
        CHECK(a.u == b.u);
        CHECK(a.v == b.v);
        CHECK(a.map_index == b.map_index);
    }
}

}  // TEST_SUITE
