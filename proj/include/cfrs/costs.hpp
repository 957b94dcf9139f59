#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

#include "cfrs/errors.hpp"
#include "cfrs/instance.hpp"
#include "cfrs/rng.hpp"
#include "cfrs/seeds.hpp"

namespace cfrs {

inline double softplus(double x) {
    return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Customer-to-anchor cost matrix driving the assignment stage. Entries are
// non-negative and bounded: 2 for the parametric provider, the geometric
// diameter for Euclidean costs.
struct LatentCostMatrix {
    Eigen::MatrixXd values;  // N x K
    double upper_bound = 0.0;

    int n() const { return static_cast<int>(values.rows()); }
    int k() const { return static_cast<int>(values.cols()); }
};

struct LogitMatrix {
    Eigen::MatrixXd values;  // N x K
};

// Per-(customer, anchor) feature vectors, all functions of pairwise
// distances and demand fractions only, so every cost built from them is
// invariant under planar isometries.
struct PairFeatures {
    static constexpr int kDim = 4;
    int n = 0;
    int k = 0;
    Eigen::MatrixXd values;  // (n*k) x 4, row (i-1)*k + (j) for customer i, anchor j

    Eigen::Vector4d at(int i, int j) const { return values.row((i - 1) * k + j).transpose(); }
};

inline LatentCostMatrix euclidean_costs(const Instance& inst, const SeedSet& seeds) {
    const int n = inst.n();
    const int k = seeds.k;
    for (int a : seeds.anchor_indices)
        if (a < 1 || a > n) throw std::invalid_argument("euclidean_costs: anchor index out of range");

    LatentCostMatrix cost;
    cost.values.resize(n, k);
    bool unit_square = true;
    for (const auto& p : inst.coords)
        if (p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0) unit_square = false;
    for (int i = 1; i <= n; ++i)
        for (int j = 0; j < k; ++j)
            cost.values(i - 1, j) = distance(inst.customer(i), inst.customer(seeds.anchor_indices[j]));
    cost.upper_bound = unit_square ? std::sqrt(2.0) : cost.values.maxCoeff();
    return cost;
}

// Features: [dist(i, anchor_j), dist(i, depot), dist(anchor_j, depot), q_i].
inline PairFeatures pair_features(const Instance& inst, const SeedSet& seeds) {
    const int n = inst.n();
    const int k = seeds.k;
    PairFeatures f;
    f.n = n;
    f.k = k;
    f.values.resize(n * k, PairFeatures::kDim);
    for (int i = 1; i <= n; ++i) {
        const double d_depot = distance(inst.customer(i), inst.depot());
        const double qi = inst.q(i);
        for (int j = 0; j < k; ++j) {
            const int a = seeds.anchor_indices[j];
            const int row = (i - 1) * k + j;
            f.values(row, 0) = distance(inst.customer(i), inst.customer(a));
            f.values(row, 1) = d_depot;
            f.values(row, 2) = distance(inst.customer(a), inst.depot());
            f.values(row, 3) = qi;
        }
    }
    return f;
}

// One-hidden-layer scalar map with tanh units; the output is squashed to
// (0, 2) so parametric costs share the bounded range of normalized-
// embedding distances.
struct CostModelParams {
    double gamma = 0.0;
    double beta = 0.0;
    Eigen::MatrixXd w1;  // hidden x 4
    Eigen::VectorXd b1;  // hidden
    Eigen::VectorXd w2;  // hidden
    double b2 = 0.0;

    int hidden() const { return static_cast<int>(b1.size()); }

    int param_count() const { return static_cast<int>(w1.size() + b1.size() + w2.size()) + 3; }

    static CostModelParams zeros(int hidden = 16) {
        CostModelParams p;
        p.w1 = Eigen::MatrixXd::Zero(hidden, PairFeatures::kDim);
        p.b1 = Eigen::VectorXd::Zero(hidden);
        p.w2 = Eigen::VectorXd::Zero(hidden);
        return p;
    }

    // Small random weights; zero init would stall gradient flow through the
    // hidden layer.
    static CostModelParams random_init(int hidden, std::uint64_t seed) {
        CostModelParams p = zeros(hidden);
        Rng rng(seed);
        const double s1 = 1.0 / std::sqrt(static_cast<double>(PairFeatures::kDim));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (int r = 0; r < hidden; ++r)
            for (int c = 0; c < PairFeatures::kDim; ++c) p.w1(r, c) = rng.uniform(-s1, s1);
        for (int r = 0; r < hidden; ++r) p.w2(r) = rng.uniform(-s2, s2);
        return p;
    }

    bool all_finite() const {
        return std::isfinite(gamma) && std::isfinite(beta) && std::isfinite(b2) &&
               w1.allFinite() && b1.allFinite() && w2.allFinite();
    }

    nlohmann::json to_json() const {
        std::vector<double> weights;
        weights.reserve(w1.size() + b1.size() + w2.size() + 1);
        for (int r = 0; r < w1.rows(); ++r)
            for (int c = 0; c < w1.cols(); ++c) weights.push_back(w1(r, c));
        for (int r = 0; r < b1.size(); ++r) weights.push_back(b1(r));
        for (int r = 0; r < w2.size(); ++r) weights.push_back(w2(r));
        weights.push_back(b2);
        return {{"gamma", gamma}, {"beta", beta}, {"weights", weights}};
    }

    static CostModelParams from_json(const nlohmann::json& j) {
        CostModelParams p;
        std::vector<double> weights;
        try {
            p.gamma = j.at("gamma").get<double>();
            p.beta = j.at("beta").get<double>();
            weights = j.at("weights").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("params JSON: ") + e.what());
        }
        // Layout [w1 row-major, b1, w2, b2] gives 6*hidden + 1 entries.
        if (weights.size() < 7 || (weights.size() - 1) % 6 != 0)
            throw ParseError("params JSON: weights length must be 6*hidden + 1");
        const int hidden = static_cast<int>((weights.size() - 1) / 6);
        p.w1.resize(hidden, PairFeatures::kDim);
        p.b1.resize(hidden);
        p.w2.resize(hidden);
        std::size_t pos = 0;
        for (int r = 0; r < hidden; ++r)
            for (int c = 0; c < PairFeatures::kDim; ++c) p.w1(r, c) = weights[pos++];
        for (int r = 0; r < hidden; ++r) p.b1(r) = weights[pos++];
        for (int r = 0; r < hidden; ++r) p.w2(r) = weights[pos++];
        p.b2 = weights[pos++];
        if (!p.all_finite()) throw ParseError("params JSON: non-finite parameter");
        return p;
    }
};

// Raw (pre-squash) model output for one feature vector.
inline double mlp_raw(const CostModelParams& p, const Eigen::Vector4d& z) {
    const Eigen::VectorXd h = (p.w1 * z + p.b1).array().tanh();
    return p.w2.dot(h) + p.b2;
}

// Delta_ij = 2 * sigmoid(mlp(feature_ij)), strictly inside (0, 2).
inline LatentCostMatrix parametric_costs(const CostModelParams& params, const PairFeatures& features) {
    if (!params.all_finite()) throw NumericError("parametric_costs: non-finite parameters");
    LatentCostMatrix cost;
    cost.upper_bound = 2.0;
    cost.values.resize(features.n, features.k);
    for (int i = 1; i <= features.n; ++i)
        for (int j = 0; j < features.k; ++j) {
            const double u = mlp_raw(params, features.at(i, j));
            if (!std::isfinite(u)) throw NumericError("parametric_costs: non-finite model output");
            cost.values(i - 1, j) = 2.0 * sigmoid(u);
        }
    return cost;
}

// s_ij = -softplus(gamma) * Delta_ij + beta.
inline LogitMatrix logits_from_costs(const LatentCostMatrix& delta, double gamma, double beta) {
    LogitMatrix s;
    s.values = (-softplus(gamma)) * delta.values;
    s.values.array() += beta;
    return s;
}

}  // namespace cfrs
