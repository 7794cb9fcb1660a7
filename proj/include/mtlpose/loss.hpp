#pragma once

// Multi-task objective: normalized-quaternion pose regression plus triplet
// (dynamic margin) and pair descriptor losses, with analytic gradients.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "mtlpose/error.hpp"
#include "mtlpose/geometry.hpp"

namespace mtlpose {

struct LossConfig {
    double lambda = 0.5;  // weight of the descriptor loss
    double gamma = 10.0;  // margin for pushers of another class

    void validate() const {
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
        if (!(gamma > 2.0 * std::numbers::pi)) throw ConfigError("gamma must exceed 2 pi");
    }
};

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct PoseLossResult {
    Scalar value;
    Vec4T<Scalar> grad;  // with respect to the raw (w, x, y, z) output
};

// ||q - v / ||v|| ||^2 for the raw regressor output v in (w, x, y, z) order.
template <typename Scalar>
PoseLossResult<Scalar> pose_loss(const Eigen::Quaternion<Scalar>& q, const Vec4T<Scalar>& raw) {
    const Scalar norm = raw.norm();
    if (!(norm > Scalar(0))) throw DomainError("pose_loss: regressor output has zero norm");
    const Vec4T<Scalar> target = to_wxyz(q);
    const Vec4T<Scalar> u = raw / norm;
    const Vec4T<Scalar> diff = target - u;
    // d/dv = (I - u u^T) 2 (u - q) / |v| = 2 (u (u.q) - q) / |v|
    return {diff.squaredNorm(), Scalar(2) * (u * u.dot(target) - target) / norm};
}

// Angle between the two poses within a class, gamma across classes.
template <typename Scalar>
double dynamic_margin(const Eigen::Quaternion<Scalar>& qi, const Eigen::Quaternion<Scalar>& qj, std::uint32_t ci,
                      std::uint32_t cj, double gamma) {
    return ci == cj ? angular_error(qi, qj) : gamma;
}

template <typename Scalar>
struct TripletLossResult {
    Scalar value;
    VecX<Scalar> grad_anchor, grad_puller, grad_pusher;
};

// max(0, 1 - |fi - fk|^2 / (|fi - fj|^2 + m)). A ratio of exactly 1 counts as
// inactive. With a zero denominator the loss is 1 and only the pusher gets a
// gradient, the one of -|fi - fk|^2.
template <typename Scalar>
TripletLossResult<Scalar> triplet_loss(const VecX<Scalar>& fi, const VecX<Scalar>& fj, const VecX<Scalar>& fk,
                                       Scalar margin) {
    if (margin < Scalar(0)) throw DomainError("triplet margin must be non-negative");
    const VecX<Scalar> ik = fi - fk;
    const VecX<Scalar> ij = fi - fj;
    const Scalar push = ik.squaredNorm();
    const Scalar pull = ij.squaredNorm() + margin;
    TripletLossResult<Scalar> r{Scalar(0), VecX<Scalar>::Zero(fi.size()), VecX<Scalar>::Zero(fi.size()),
                                VecX<Scalar>::Zero(fi.size())};
    if (pull == Scalar(0)) {
        r.value = Scalar(1);
        r.grad_pusher = Scalar(2) * ik;
        return r;
    }
    const Scalar ratio = push / pull;
    if (ratio >= Scalar(1)) return r;
    r.value = Scalar(1) - ratio;
    const Scalar s = ratio / pull;
    r.grad_anchor = Scalar(-2) * ik / pull + Scalar(2) * s * ij;
    r.grad_puller = Scalar(-2) * s * ij;
    r.grad_pusher = Scalar(2) * ik / pull;
    return r;
}

template <typename Scalar>
struct PairLossResult {
    Scalar value;
    VecX<Scalar> grad_first, grad_second;
};

template <typename Scalar>
PairLossResult<Scalar> pair_loss(const VecX<Scalar>& fi, const VecX<Scalar>& fj) {
    const VecX<Scalar> d = fi - fj;
    return {d.squaredNorm(), Scalar(2) * d, Scalar(-2) * d};
}

// Network outputs of one batch (one row per forward pass) plus the loss
// terms referring to those rows.
template <typename Scalar>
struct MtlBatch {
    struct TripletTerm {
        std::size_t anchor, puller, pusher;
        Scalar margin;
    };
    struct PairTerm {
        std::size_t first, second;
    };
    struct PoseTerm {
        std::size_t row;
        Eigen::Quaternion<Scalar> target;
    };

    std::vector<VecX<Scalar>> descriptors;
    std::vector<Vec4T<Scalar>> pose_raw;
    std::vector<TripletTerm> triplets;
    std::vector<PairTerm> pairs;
    std::vector<PoseTerm> poses;
};

template <typename Scalar>
struct MtlResult {
    Scalar total = 0, pose = 0, triplets = 0, pairs = 0;
    Scalar descriptor() const { return triplets + pairs; }
    std::vector<VecX<Scalar>> grad_descriptors;
    std::vector<Vec4T<Scalar>> grad_pose_raw;
};

// (1 - lambda) L_pose + lambda (L_triplets + L_pairs); each component is the
// mean over its terms (an empty set contributes 0).
template <typename Scalar>
MtlResult<Scalar> mtl_loss(const MtlBatch<Scalar>& batch, const LossConfig& cfg) {
    cfg.validate();
    if (batch.triplets.empty() && batch.pairs.empty() && batch.poses.empty())
        throw ConfigError("mtl_loss on an empty batch");
    const std::size_t rows = batch.descriptors.size();
    if (batch.pose_raw.size() != rows) throw ConfigError("mtl_loss: descriptor and pose row counts differ");

    MtlResult<Scalar> r;
    r.grad_descriptors.reserve(rows);
    for (const auto& d : batch.descriptors) r.grad_descriptors.push_back(VecX<Scalar>::Zero(d.size()));
    r.grad_pose_raw.assign(rows, Vec4T<Scalar>::Zero());

    const Scalar lambda = Scalar(cfg.lambda);
    const Scalar w_pose = Scalar(1) - lambda;

    if (!batch.poses.empty()) {
        const Scalar scale = w_pose / Scalar(batch.poses.size());
        for (const auto& t : batch.poses) {
            const auto p = pose_loss(t.target, batch.pose_raw.at(t.row));
            r.pose += p.value;
            r.grad_pose_raw[t.row] += scale * p.grad;
        }
        r.pose /= Scalar(batch.poses.size());
    }
    if (!batch.triplets.empty()) {
        const Scalar scale = lambda / Scalar(batch.triplets.size());
        for (const auto& t : batch.triplets) {
            const auto l = triplet_loss(batch.descriptors.at(t.anchor), batch.descriptors.at(t.puller),
                                        batch.descriptors.at(t.pusher), t.margin);
            r.triplets += l.value;
            r.grad_descriptors[t.anchor] += scale * l.grad_anchor;
            r.grad_descriptors[t.puller] += scale * l.grad_puller;
            r.grad_descriptors[t.pusher] += scale * l.grad_pusher;
        }
        r.triplets /= Scalar(batch.triplets.size());
    }
    if (!batch.pairs.empty()) {
        const Scalar scale = lambda / Scalar(batch.pairs.size());
        for (const auto& t : batch.pairs) {
            const auto l = pair_loss(batch.descriptors.at(t.first), batch.descriptors.at(t.second));
            r.pairs += l.value;
            r.grad_descriptors[t.first] += scale * l.grad_first;
            r.grad_descriptors[t.second] += scale * l.grad_second;
        }
        r.pairs /= Scalar(batch.pairs.size());
    }
    r.total = w_pose * r.pose + lambda * r.descriptor();
    return r;
}

}  // namespace mtlpose
