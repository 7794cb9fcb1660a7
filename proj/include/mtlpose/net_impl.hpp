#pragma once

// Template definitions for net.hpp.

#include <algorithm>
#include <limits>

namespace mtlpose {

template <typename Scalar>
Network<Scalar>::Network(const NetConfig& cfg) : Network(cfg, trunk_layers(cfg)) {}

template <typename Scalar>
Network<Scalar>::Network(const NetConfig& cfg, std::vector<LayerDesc> trunk) : cfg_(cfg), trunk_(std::move(trunk)) {
    cfg_.validate();
    build();
    init_parameters();
}

template <typename Scalar>
void Network<Scalar>::build() {
    shapes_.assign(1, input_shape());
    offsets_.clear();
    counts_.clear();
    Eigen::Index offset = 0;
    for (const LayerDesc& l : trunk_) {
        const Shape in = shapes_.back();
        Shape out = in;
        Eigen::Index count = 0;
        switch (l.kind) {
            case LayerKind::conv:
                if (l.out_channels < 1 || l.kernel < 1 || l.stride < 1)
                    throw ConfigError("convolution needs filters, kernel and stride >= 1");
                if (in.height < l.kernel || in.width < l.kernel)
                    throw ConfigError("convolution kernel larger than its " + std::to_string(in.height) + "x" +
                                      std::to_string(in.width) + " input");
                out = {l.out_channels, (in.height - l.kernel) / l.stride + 1, (in.width - l.kernel) / l.stride + 1};
                count = Eigen::Index(l.out_channels) * in.channels * l.kernel * l.kernel + l.out_channels;
                break;
            case LayerKind::maxpool:
                if (in.height < 2 || in.width < 2) throw ConfigError("max-pooling input smaller than 2x2");
                out = {in.channels, in.height / 2, in.width / 2};
                break;
            case LayerKind::relu:
                break;
            case LayerKind::dense:
                if (l.units < 1) throw ConfigError("dense layer needs units >= 1");
                out = {l.units, 1, 1};
                count = Eigen::Index(l.units) * in.size() + l.units;
                break;
        }
        offsets_.push_back(offset);
        counts_.push_back(count);
        offset += count;
        shapes_.push_back(out);
    }
    if (shapes_.back().size() < 2) throw ConfigError("descriptor must have at least 2 dimensions");
    if (cfg_.architecture == Architecture::custom)
        cfg_.descriptor_dim = static_cast<int>(shapes_.back().size());
    else if (shapes_.back().size() != cfg_.descriptor_dim)
        throw ConfigError("trunk output does not match descriptor_dim");
    offsets_.push_back(offset);
    counts_.push_back(4 * shapes_.back().size() + 4);
    offset += counts_.back();
    params_ = Vec::Zero(offset);
}

template <typename Scalar>
void Network<Scalar>::init_parameters() {
    // Weights uniform in +-sqrt(6 / fan_in), biases zero.
    Rng rng(cfg_.seed);
    auto fill = [&](Eigen::Index offset, Eigen::Index weights, Eigen::Index fan_in) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (Eigen::Index k = 0; k < weights; ++k)
            params_(offset + k) = Scalar((2.0 * uniform01(rng) - 1.0) * bound);
    };
    for (std::size_t i = 0; i < trunk_.size(); ++i) {
        const LayerDesc& l = trunk_[i];
        const Shape in = shapes_[i];
        if (l.kind == LayerKind::conv) {
            const Eigen::Index fan_in = Eigen::Index(in.channels) * l.kernel * l.kernel;
            fill(offsets_[i], Eigen::Index(l.out_channels) * fan_in, fan_in);
        } else if (l.kind == LayerKind::dense) {
            fill(offsets_[i], Eigen::Index(l.units) * in.size(), in.size());
        }
    }
    fill(offsets_.back(), 4 * shapes_.back().size(), shapes_.back().size());
}

template <typename Scalar>
void Network<Scalar>::forward_layer(std::size_t i, const Mat& in, Mat& out, Mat& aux) const {
    const LayerDesc& l = trunk_[i];
    const Shape s = shapes_[i];
    const Shape o = shapes_[i + 1];
    switch (l.kind) {
        case LayerKind::conv: {
            const int k = l.kernel, st = l.stride;
            const Eigen::Index patch = Eigen::Index(s.channels) * k * k;
            aux.resize(patch, o.pixels());
            for (int oy = 0; oy < o.height; ++oy)
                for (int ox = 0; ox < o.width; ++ox) {
                    Scalar* col = aux.col(Eigen::Index(oy) * o.width + ox).data();
                    for (int c = 0; c < s.channels; ++c)
                        for (int ky = 0; ky < k; ++ky) {
                            const Eigen::Index base = Eigen::Index(oy * st + ky) * s.width + ox * st;
                            for (int kx = 0; kx < k; ++kx) *col++ = in(c, base + kx);
                        }
                }
            const Eigen::Map<const Mat> w(params_.data() + offsets_[i], l.out_channels, patch);
            const Eigen::Map<const Vec> b(params_.data() + offsets_[i] + l.out_channels * patch, l.out_channels);
            out.noalias() = w * aux;
            out.colwise() += b;
            break;
        }
        case LayerKind::maxpool: {
            out.resize(o.channels, o.pixels());
            aux.resize(o.channels, o.pixels());
            for (int c = 0; c < s.channels; ++c)
                for (int oy = 0; oy < o.height; ++oy)
                    for (int ox = 0; ox < o.width; ++ox) {
                        Eigen::Index best = Eigen::Index(2 * oy) * s.width + 2 * ox;
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                const Eigen::Index p = Eigen::Index(2 * oy + dy) * s.width + 2 * ox + dx;
                                if (in(c, p) > in(c, best)) best = p;
                            }
                        const Eigen::Index q = Eigen::Index(oy) * o.width + ox;
                        out(c, q) = in(c, best);
                        aux(c, q) = Scalar(best);
                    }
            break;
        }
        case LayerKind::relu:
            out = in.cwiseMax(Scalar(0));
            break;
        case LayerKind::dense: {
            const Eigen::Map<const Vec> x(in.data(), in.size());
            const Eigen::Map<const Mat> w(params_.data() + offsets_[i], l.units, in.size());
            const Eigen::Map<const Vec> b(params_.data() + offsets_[i] + l.units * in.size(), l.units);
            out.resize(l.units, 1);
            out.col(0).noalias() = w * x;
            out.col(0) += b;
            break;
        }
    }
}

template <typename Scalar>
void Network<Scalar>::backward_layer(std::size_t i, const Mat& in, const Mat& aux, const Mat& dout, Mat* din,
                                     Eigen::Ref<Vec> grads) const {
    const LayerDesc& l = trunk_[i];
    const Shape s = shapes_[i];
    const Shape o = shapes_[i + 1];
    switch (l.kind) {
        case LayerKind::conv: {
            const int k = l.kernel, st = l.stride;
            const Eigen::Index patch = Eigen::Index(s.channels) * k * k;
            Eigen::Map<Mat> dw(grads.data() + offsets_[i], l.out_channels, patch);
            Eigen::Map<Vec> db(grads.data() + offsets_[i] + l.out_channels * patch, l.out_channels);
            dw.noalias() += dout * aux.transpose();
            db += dout.rowwise().sum();
            if (!din) break;
            const Eigen::Map<const Mat> w(params_.data() + offsets_[i], l.out_channels, patch);
            const Mat dcols = w.transpose() * dout;
            din->setZero(s.channels, s.pixels());
            for (int oy = 0; oy < o.height; ++oy)
                for (int ox = 0; ox < o.width; ++ox) {
                    const Scalar* col = dcols.col(Eigen::Index(oy) * o.width + ox).data();
                    for (int c = 0; c < s.channels; ++c)
                        for (int ky = 0; ky < k; ++ky) {
                            const Eigen::Index base = Eigen::Index(oy * st + ky) * s.width + ox * st;
                            for (int kx = 0; kx < k; ++kx) (*din)(c, base + kx) += *col++;
                        }
                }
            break;
        }
        case LayerKind::maxpool:
            if (!din) break;
            din->setZero(s.channels, s.pixels());
            for (int c = 0; c < o.channels; ++c)
                for (Eigen::Index q = 0; q < o.pixels(); ++q)
                    (*din)(c, static_cast<Eigen::Index>(aux(c, q))) += dout(c, q);
            break;
        case LayerKind::relu:
            if (!din) break;
            *din = (in.array() > Scalar(0)).select(dout, Scalar(0));
            break;
        case LayerKind::dense: {
            const Eigen::Map<const Vec> x(in.data(), in.size());
            Eigen::Map<Mat> dw(grads.data() + offsets_[i], l.units, in.size());
            Eigen::Map<Vec> db(grads.data() + offsets_[i] + l.units * in.size(), l.units);
            dw.noalias() += dout.col(0) * x.transpose();
            db += dout.col(0);
            if (!din) break;
            const Eigen::Map<const Mat> w(params_.data() + offsets_[i], l.units, in.size());
            din->resize(in.rows(), in.cols());
            Eigen::Map<Vec>(din->data(), din->size()).noalias() = w.transpose() * dout.col(0);
            break;
        }
    }
}

template <typename Scalar>
typename Network<Scalar>::Output Network<Scalar>::forward(const Eigen::Ref<const Vec>& input) const {
    const Shape in = input_shape();
    if (input.size() != in.size())
        throw ConfigError("network expects " + std::to_string(in.height) + "x" + std::to_string(in.width) +
                          " input, got " + std::to_string(input.size()) + " values");
    Output o;
    Cache& cache = o.cache;
    const std::size_t n = trunk_.size();
    cache.inputs.resize(n + 1);
    cache.aux.resize(n);
    cache.inputs[0] = Eigen::Map<const Mat>(input.data(), 1, input.size());
    for (std::size_t i = 0; i < n; ++i) forward_layer(i, cache.inputs[i], cache.inputs[i + 1], cache.aux[i]);
    cache.owner = this;
    cache.version = version_;

    const Mat& d = cache.inputs[n];
    o.descriptor = Eigen::Map<const Vec>(d.data(), d.size());
    const Eigen::Index dim = o.descriptor.size();
    const Eigen::Map<const Mat> w(params_.data() + offsets_.back(), 4, dim);
    const Eigen::Map<const Vec4> b(params_.data() + offsets_.back() + 4 * dim);
    o.pose_raw.noalias() = w * o.descriptor;
    o.pose_raw += b;
    return o;
}

template <typename Scalar>
typename Network<Scalar>::Output Network<Scalar>::forward(const DepthPatch& patch) const {
    if (patch.size() != cfg_.input_size)
        throw ConfigError("patch size " + std::to_string(patch.size()) + " does not match network input " +
                          std::to_string(cfg_.input_size));
    return forward(patch_input<Scalar>(patch));
}

template <typename Scalar>
typename Network<Scalar>::Vec Network<Scalar>::backward(const Cache& cache, const Eigen::Ref<const Vec>& grad_descriptor,
                                                        const Eigen::Ref<const Vec4>& grad_pose_raw,
                                                        Eigen::Ref<Vec> grads, bool want_input_grad) const {
    if (cache.owner != this || cache.version != version_)
        throw ConfigError("backward called with a stale or foreign forward cache");
    if (grads.size() != params_.size()) throw ConfigError("gradient buffer size mismatch");
    const std::size_t n = trunk_.size();
    const Mat& d = cache.inputs[n];
    const Eigen::Index dim = d.size();
    if (grad_descriptor.size() != dim) throw ConfigError("descriptor gradient size mismatch");

    const Eigen::Map<const Vec> desc(d.data(), dim);
    Eigen::Map<Mat> dw(grads.data() + offsets_.back(), 4, dim);
    Eigen::Map<Vec4> db(grads.data() + offsets_.back() + 4 * dim);
    dw.noalias() += grad_pose_raw * desc.transpose();
    db += grad_pose_raw;
    const Eigen::Map<const Mat> w(params_.data() + offsets_.back(), 4, dim);

    Mat dout(d.rows(), d.cols());
    Eigen::Map<Vec>(dout.data(), dim) = grad_descriptor + w.transpose() * grad_pose_raw;
    Mat din;
    for (std::size_t i = n; i-- > 0;) {
        const bool need = i > 0 || want_input_grad;
        backward_layer(i, cache.inputs[i], cache.aux[i], dout, need ? &din : nullptr, grads);
        if (need) std::swap(dout, din);
    }
    if (!want_input_grad) return Vec();
    return Eigen::Map<const Vec>(dout.data(), dout.size());
}

template <typename Scalar>
template <typename Other>
Network<Other> Network<Scalar>::cast() const {
    Network<Other> out(cfg_, trunk_);
    out.params_ = params_.template cast<Other>();
    return out;
}

}  // namespace mtlpose
