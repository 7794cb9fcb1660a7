#pragma once

// Convolutional network with a descriptor head and a linear pose head on top
// of the descriptor, explicit reverse-mode gradients, and Adam.
//
// Activations are stored as (channels x height*width) matrices; pixel p of a
// feature map is column p = y * width + x. Dense layers read their input
// matrix in Eigen storage order.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mtlpose/dataset.hpp"
#include "mtlpose/error.hpp"
#include "mtlpose/render.hpp"

namespace mtlpose {

enum class Architecture : std::uint8_t { baseline = 0, deeper = 1, custom = 2 };

std::string_view to_string(Architecture arch);
Architecture architecture_from_string(std::string_view name);

struct NetConfig {
    Architecture architecture = Architecture::baseline;
    int descriptor_dim = 64;
    int input_size = 64;
    int width_divisor = 1;  // 2 for the desk preset
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const NetConfig&) const = default;
};

// CPU-friendly variant: 32x32 input, convolution widths halved.
NetConfig desk_preset(std::uint64_t seed = 0);

enum class LayerKind : std::uint8_t { conv = 0, maxpool = 1, relu = 2, dense = 3 };

struct LayerDesc {
    LayerKind kind = LayerKind::relu;
    int out_channels = 0;  // conv
    int kernel = 0;        // conv
    int stride = 1;        // conv
    int units = 0;         // dense

    static LayerDesc conv(int filters, int kernel, int stride = 1) { return {LayerKind::conv, filters, kernel, stride, 0}; }
    static LayerDesc maxpool() { return {LayerKind::maxpool, 0, 2, 2, 0}; }
    static LayerDesc relu() { return {LayerKind::relu}; }
    static LayerDesc dense(int units) { return {LayerKind::dense, 0, 0, 1, units}; }
    bool operator==(const LayerDesc&) const = default;
};

struct Shape {
    int channels = 1, height = 1, width = 1;
    Eigen::Index size() const { return Eigen::Index(channels) * height * width; }
    Eigen::Index pixels() const { return Eigen::Index(height) * width; }
};

// Trunk layers from the input patch to the descriptor.
std::vector<LayerDesc> trunk_layers(const NetConfig& cfg);

template <typename Scalar>
class Network {
public:
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Vec4 = Eigen::Matrix<Scalar, 4, 1>;

    struct Cache {
        std::vector<Mat> inputs;  // input of every trunk layer, then the descriptor
        std::vector<Mat> aux;     // im2col columns / pooling argmax / relu mask
        const Network* owner = nullptr;
        std::uint64_t version = 0;
    };

    struct Output {
        Vec descriptor;
        Vec4 pose_raw;
        Cache cache;
    };

    explicit Network(const NetConfig& cfg);
    Network(const NetConfig& cfg, std::vector<LayerDesc> trunk);

    const NetConfig& config() const { return cfg_; }
    const std::vector<LayerDesc>& trunk() const { return trunk_; }
    Shape input_shape() const { return {1, cfg_.input_size, cfg_.input_size}; }
    int descriptor_dim() const { return static_cast<int>(shapes_.back().size()); }

    // All parameters, trunk layers in order then the pose head; per layer the
    // weight matrix (column-major) followed by the bias.
    const Vec& parameters() const { return params_; }
    // Invalidates caches produced by earlier forward calls.
    Vec& mutable_parameters() {
        ++version_;
        return params_;
    }
    Eigen::Index parameter_count() const { return params_.size(); }
    std::uint64_t version() const { return version_; }

    // Parameter slice [offset, offset + count) of layer i; i == trunk().size()
    // addresses the pose head.
    std::pair<Eigen::Index, Eigen::Index> layer_params(std::size_t i) const { return {offsets_[i], counts_[i]}; }

    Output forward(const Eigen::Ref<const Vec>& input) const;
    Output forward(const DepthPatch& patch) const;

    // Accumulates parameter gradients into `grads` (sized parameter_count()).
    // Returns the gradient with respect to the input when `want_input_grad`.
    Vec backward(const Cache& cache, const Eigen::Ref<const Vec>& grad_descriptor,
                 const Eigen::Ref<const Vec4>& grad_pose_raw, Eigen::Ref<Vec> grads,
                 bool want_input_grad = false) const;

    template <typename Other>
    Network<Other> cast() const;

private:
    template <typename>
    friend class Network;

    void build();
    void init_parameters();
    void forward_layer(std::size_t i, const Mat& in, Mat& out, Mat& aux) const;
    void backward_layer(std::size_t i, const Mat& in, const Mat& aux, const Mat& dout, Mat* din,
                        Eigen::Ref<Vec> grads) const;

    NetConfig cfg_;
    std::vector<LayerDesc> trunk_;
    std::vector<Shape> shapes_;  // shapes_[i] is the input shape of layer i
    std::vector<Eigen::Index> offsets_, counts_;
    Vec params_;
    std::uint64_t version_ = 1;
};

// Network input: pixels mapped from [0, 1] to [-0.25, 0.25], row-major.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> patch_input(const DepthPatch& patch) {
    return ((Eigen::Map<const Eigen::VectorXf>(patch.pixels.data(), patch.pixels.size()).array() - 0.5f) * 0.5f)
        .matrix()
        .template cast<Scalar>();
}

// Adam with bias correction.
template <typename Scalar>
struct AdamState {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    Vec m, v;
    std::int64_t step = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;

    AdamState() = default;
    AdamState(Eigen::Index size, double lr) : m(Vec::Zero(size)), v(Vec::Zero(size)), learning_rate(lr) {}
};

template <typename Scalar>
void adam_step(AdamState<Scalar>& state, Eigen::Ref<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> params,
               const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& grads) {
    if (state.m.size() != params.size() || grads.size() != params.size())
        throw ConfigError("adam_step: parameter, gradient and state sizes differ");
    if (!grads.allFinite()) {
        Eigen::Index bad = 0;
        for (; bad < grads.size() && std::isfinite(static_cast<double>(grads(bad))); ++bad) {}
        throw TrainingError("non-finite gradient at parameter " + std::to_string(bad) + " (step " +
                            std::to_string(state.step + 1) + ")");
    }
    ++state.step;
    const Scalar b1 = Scalar(state.beta1), b2 = Scalar(state.beta2);
    state.m = b1 * state.m + (Scalar(1) - b1) * grads;
    state.v = b2 * state.v + (Scalar(1) - b2) * grads.cwiseProduct(grads);
    const Scalar c1 = Scalar(1.0 - std::pow(state.beta1, double(state.step)));
    const Scalar c2 = Scalar(1.0 - std::pow(state.beta2, double(state.step)));
    const Scalar lr = Scalar(state.learning_rate), eps = Scalar(state.epsilon);
    params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

// Weight files hold float parameters.
void save_weights(const Network<float>& net, const std::filesystem::path& path);
Network<float> load_weights(const std::filesystem::path& path);
// Additionally rejects files whose configuration differs from `expected`.
Network<float> load_weights(const std::filesystem::path& path, const NetConfig& expected);

}  // namespace mtlpose

#include "mtlpose/net_impl.hpp"
