#pragma once
//
// The learnable affordance value function: a 3D conv stack collapses the
// object TSDF to 2D kernels, a 2D conv stack encodes the rendered view,
// grouped cross-correlation matches the two, and a small decoder emits a
// per-pixel placement probability map. Forward and backward passes are
// written out by hand for this fixed architecture; no autodiff.

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "pickplace/grasp.hpp"
#include "pickplace/image.hpp"
#include "pickplace/voxel.hpp"

namespace pickplace {

struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        data.assign(n, 0.0f);
    }
    size_t size() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
};

/// Plain cross-correlation convolution, output extents
/// floor((in + 2*pad - k) / stride) + 1. Input [Cin, H, W], weights
/// [Cout, Cin, k, k], bias [Cout] (empty = none). Throws ShapeMismatch.
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride,
                      int pad);

/// 3D variant on [Cin, Z, Y, X] with weights [Cout, Cin, k, k, k]; strides
/// and pads ordered (z, y, x).
Tensor conv3d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      const std::array<int, 3>& stride, const std::array<int, 3>& pad);

/// Object features used as convolution kernels over the view features,
/// same-padding. Channels split into `groups` groups, one output channel
/// per group. view [C, H, W] x object [C, h, w] -> [groups, H, W].
Tensor cross_correlate_features(const Tensor& view_feat, const Tensor& object_feat, int groups);

/// Mean masked binary cross entropy on probabilities (clamped to
/// [1e-6, 1-1e-6]) plus the gradient with respect to the probabilities.
/// Throws EmptyMask when no pixel is masked.
std::pair<double, Tensor> loss_bce(const Tensor& pred, const Tensor& label, const Tensor& mask);

/// View depth normalization: (depth - offset) / scale, misses to a constant.
Tensor depth_to_tensor(const DepthImage& img, double offset, double scale, float miss_value);

/// TSDF normalization to [-1, 1].
Tensor grid_to_tensor(const VoxelGrid& grid);

struct ModelConfig {
    std::array<int, 4> object3d_channels{8, 8, 16, 16};
    std::array<int, 4> object2d_channels{16, 16, 16, 16};
    std::array<int, 4> object2d_strides{2, 2, 1, 1};
    int view_channels = 16;  // five view layers, kernel 3; last must match
                             // object2d_channels.back() for correlation
    int corr_groups = 4;
    int decoder_hidden = 16;
    double leak = 0.1;
    double depth_offset = 0.9;  // view normalization
    double depth_scale = 0.5;
    float miss_value = 2.0f;

    static ModelConfig tiny();  // 2-channel configuration for gradient checks
};

struct ConvParam {
    Tensor w, b;
    Tensor gw, gb;  // accumulated gradients
    Tensor vw, vb;  // momentum buffers
};

struct ForwardTrace;

class AffordanceModel {
public:
    AffordanceModel(const ModelConfig& cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    /// Full forward pass to placement probabilities [1, H, W]. The trace,
    /// when given, captures activations for backward().
    Tensor forward(const Tensor& view, const Tensor& object, ForwardTrace* trace = nullptr) const;

    /// Sweep-friendly pieces: encode once, correlate many times.
    Tensor encode_view(const Tensor& view) const;
    Tensor encode_object(const Tensor& object) const;
    Tensor score_from_features(const Tensor& view_feat, const Tensor& object_feat) const;

    /// Backpropagates d(loss)/d(probabilities), accumulating gradients.
    void backward(const ForwardTrace& trace, const Tensor& grad_probs);

    void zero_grads();
    /// Momentum SGD update from the accumulated gradients (scaled by
    /// 1/batch_scale), then clears them.
    void sgd_step(double lr, double momentum, double batch_scale);

    void save(const std::string& path) const;
    static AffordanceModel load(const std::string& path);

    /// Flat views over every parameter/gradient pair, for tests.
    std::vector<ConvParam*> parameters();
    std::vector<const ConvParam*> parameters() const;

private:
    ModelConfig cfg_;
    std::vector<ConvParam> obj3d_;   // 4 layers, stride 2 in z
    std::vector<ConvParam> obj2d_;   // 4 layers
    std::vector<ConvParam> view_;    // 5 layers, kernel 3
    ConvParam dec0_, dec1_;

    friend struct ForwardTrace;
};

/// Everything backward() needs: inputs and pre-activation outputs per layer.
struct ForwardTrace {
    Tensor view_input, object_input;
    std::vector<Tensor> view_pre;    // pre-activation per view layer
    std::vector<Tensor> obj3d_pre;
    Tensor pooled;                   // object features after z mean-pool
    std::vector<Tensor> obj2d_pre;
    Tensor view_feat, object_feat;   // post-activation encoder outputs
    Tensor corr;
    Tensor dec0_pre;
    Tensor logits;
    Tensor probs;
};

struct TrainSample {
    Tensor view;
    Tensor object;
    Tensor label;  // [1, H, W]
    Tensor mask;   // [1, H, W], nonzero where supervised
};

/// One momentum-SGD update over the batch; returns the mean pre-update loss.
double train_step(AffordanceModel& model, const std::vector<TrainSample>& batch, double lr,
                  double momentum = 0.9);

/// Model-backed placement value for the planner. Encoded views are cached
/// per view index, so use one instance per scene.
class LearnedValue : public PlacementValue {
public:
    LearnedValue(const AffordanceModel& model, GridDims object_dims, double object_voxel)
        : model_(model), object_dims_(object_dims), object_voxel_(object_voxel) {}

    AffordanceMap score_map(const VoxelGrid& scene, int view_index,
                            const std::vector<Vec3>& rotated_samples, const Vec3& rotated_com,
                            const Rotation& object_rotation, const VoxelGrid& object_grid,
                            const Vec3& d, const Camera& cam, const DepthImage& depth,
                            double* fit_score) override;
    bool exact() const override { return false; }

    /// The network input this value feeds for a given rotation; exposed so
    /// training builds identical samples.
    Tensor object_input(const VoxelGrid& object_grid, const Rotation& rotation) const;

private:
    const AffordanceModel& model_;
    GridDims object_dims_;
    double object_voxel_;
    std::unordered_map<int, Tensor> view_cache_;
};

}  // namespace pickplace
