#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfrs/cap.hpp"
#include "cfrs/costs.hpp"
#include "cfrs/errors.hpp"
#include "cfrs/ot.hpp"

namespace cfrs {

struct TrainExample {
    Instance inst;
    SeedSet seeds;
    AssignmentMatrix target;
};

struct TrainConfig {
    double learning_rate = 0.1;
    int steps = 200;
    bool with_bce = true;
    // Tight tolerance keeps the unrolled depth effectively fixed, which the
    // finite-difference contract relies on.
    SinkhornConfig sinkhorn{0.01, 20, 1e-15};
};

struct TrainStep {
    int step = 0;
    double total = 0.0;
    double l_ot = 0.0;
    double l_bce = 0.0;
};

struct TrainResult {
    CostModelParams params;
    std::vector<TrainStep> trace;
};

// Numerically stable elementwise binary cross-entropy on logits.
inline double bce_logit(double s, double y) {
    return std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::abs(s)));
}

namespace detail {

struct BatchEval {
    double l_ot = 0.0;
    double l_bce = 0.0;
    double total(bool with_bce) const { return l_ot + (with_bce ? l_bce : 0.0); }
};

// Forward pass for one example; optionally accumulates parameter gradients
// (scaled by `grad_scale`) into `grads`.
inline BatchEval example_pass(const CostModelParams& params, const TrainExample& ex,
                              const TrainConfig& cfg, CostModelParams* grads, double grad_scale) {
    const int n = ex.inst.n();
    const int k = ex.seeds.k;
    if (static_cast<int>(ex.target.assign.size()) != n || ex.target.k != k)
        throw std::invalid_argument("train: target shape does not match instance/seeds");

    const PairFeatures features = pair_features(ex.inst, ex.seeds);
    const int hidden = params.hidden();

    // MLP forward, keeping hidden activations for the backward pass.
    Eigen::MatrixXd hact(n * k, hidden);
    Eigen::MatrixXd u(n, k);
    for (int i = 1; i <= n; ++i)
        for (int j = 0; j < k; ++j) {
            const int row = (i - 1) * k + j;
            const Eigen::VectorXd h =
                (params.w1 * features.values.row(row).transpose() + params.b1).array().tanh();
            hact.row(row) = h.transpose();
            u(i - 1, j) = params.w2.dot(h) + params.b2;
        }
    Eigen::MatrixXd delta = 2.0 * u.unaryExpr([](double x) { return sigmoid(x); });

    LatentCostMatrix cost;
    cost.values = delta;
    cost.upper_bound = 2.0;

    const Marginals marg = build_marginals(ex.inst, k);
    const Eigen::MatrixXd padded = pad_slack(cost);
    const TransportPlan plan = sinkhorn_log_domain(padded, marg, cfg.sinkhorn);
    const SoftAssignment soft = transport_to_probabilities(plan, ex.inst);

    BatchEval eval;
    eval.l_ot = cross_entropy_ot(soft, ex.target.assign);

    const double sp_gamma = softplus(params.gamma);
    Eigen::MatrixXd s = (-sp_gamma) * delta;
    s.array() += params.beta;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j)
            eval.l_bce += bce_logit(s(i, j), ex.target.assign[i] == j ? 1.0 : 0.0);
    eval.l_bce /= static_cast<double>(n) * k;

    if (!grads) return eval;

    const Eigen::MatrixXd upstream =
        cross_entropy_ot_plan_gradient(plan, soft, ex.inst, ex.target.assign);
    const Eigen::MatrixXd g_pad = sinkhorn_gradient(padded, marg, cfg.sinkhorn, upstream);
    Eigen::MatrixXd g_delta = g_pad.bottomRows(n);

    if (cfg.with_bce) {
        const double sig_gamma = sigmoid(params.gamma);  // softplus'
        double g_gamma = 0.0, g_beta = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j) {
                const double y = ex.target.assign[i] == j ? 1.0 : 0.0;
                const double ds = (sigmoid(s(i, j)) - y) / (static_cast<double>(n) * k);
                g_delta(i, j) += ds * (-sp_gamma);
                g_gamma += ds * (-delta(i, j)) * sig_gamma;
                g_beta += ds;
            }
        grads->gamma += grad_scale * g_gamma;
        grads->beta += grad_scale * g_beta;
    }

    // Through the (0, 2) squash and the MLP.
    for (int i = 1; i <= n; ++i)
        for (int j = 0; j < k; ++j) {
            const double sig = sigmoid(u(i - 1, j));
            const double du = g_delta(i - 1, j) * 2.0 * sig * (1.0 - sig);
            if (du == 0.0) continue;
            const int row = (i - 1) * k + j;
            const Eigen::VectorXd h = hact.row(row).transpose();
            grads->w2 += (grad_scale * du) * h;
            grads->b2 += grad_scale * du;
            const Eigen::VectorXd dpre =
                (du * params.w2.array() * (1.0 - h.array().square())).matrix();
            grads->w1 += (grad_scale * dpre) * features.values.row(row);
            grads->b1 += grad_scale * dpre;
        }

    return eval;
}

}  // namespace detail

// Mean loss over a batch at fixed parameters.
inline detail::BatchEval evaluate_batch(const CostModelParams& params,
                                        const std::vector<TrainExample>& batch,
                                        const TrainConfig& cfg) {
    detail::BatchEval sum;
    for (const auto& ex : batch) {
        const auto e = detail::example_pass(params, ex, cfg, nullptr, 0.0);
        sum.l_ot += e.l_ot;
        sum.l_bce += e.l_bce;
    }
    sum.l_ot /= batch.size();
    sum.l_bce /= batch.size();
    return sum;
}

// Mean loss and its gradient; the gradient of L_ot flows through the
// unrolled Sinkhorn iterations, the gradient of L_bce through the logit
// map.
inline detail::BatchEval batch_gradient(const CostModelParams& params,
                                        const std::vector<TrainExample>& batch,
                                        const TrainConfig& cfg, CostModelParams& grads) {
    grads = CostModelParams::zeros(params.hidden());
    detail::BatchEval sum;
    const double scale = 1.0 / batch.size();
    for (const auto& ex : batch) {
        const auto e = detail::example_pass(params, ex, cfg, &grads, scale);
        sum.l_ot += e.l_ot;
        sum.l_bce += e.l_bce;
    }
    sum.l_ot *= scale;
    sum.l_bce *= scale;
    return sum;
}

// Plain gradient descent on L = L_ot + [with_bce] * L_bce. The trace holds
// the loss evaluated before each step; aborts with the step index when the
// loss goes non-finite.
inline TrainResult train_cost_model(const CostModelParams& params,
                                    const std::vector<TrainExample>& batch,
                                    const TrainConfig& cfg) {
    if (batch.empty()) throw std::invalid_argument("train_cost_model: empty batch");
    TrainResult result;
    result.params = params;
    for (int step = 0; step < cfg.steps; ++step) {
        CostModelParams grads;
        const auto eval = batch_gradient(result.params, batch, cfg, grads);
        const double total = eval.total(cfg.with_bce);
        if (!std::isfinite(total))
            throw NumericError("train_cost_model: non-finite loss at step " + std::to_string(step));
        result.trace.push_back({step, total, eval.l_ot, eval.l_bce});

        result.params.gamma -= cfg.learning_rate * grads.gamma;
        result.params.beta -= cfg.learning_rate * grads.beta;
        result.params.w1 -= cfg.learning_rate * grads.w1;
        result.params.b1 -= cfg.learning_rate * grads.b1;
        result.params.w2 -= cfg.learning_rate * grads.w2;
        result.params.b2 -= cfg.learning_rate * grads.b2;
        if (!result.params.all_finite())
            throw NumericError("train_cost_model: non-finite parameters at step " +
                               std::to_string(step));
    }
    return result;
}

// Flat parameter view in the order [gamma, beta, w1 row-major, b1, w2, b2];
// shared by the finite-difference checks and the serialized layout.
inline int flat_param_count(const CostModelParams& p) { return p.param_count(); }

inline double get_flat_param(const CostModelParams& p, int idx) {
    if (idx == 0) return p.gamma;
    if (idx == 1) return p.beta;
    idx -= 2;
    const int h = p.hidden();
    if (idx < h * PairFeatures::kDim) return p.w1(idx / PairFeatures::kDim, idx % PairFeatures::kDim);
    idx -= h * PairFeatures::kDim;
    if (idx < h) return p.b1(idx);
    idx -= h;
    if (idx < h) return p.w2(idx);
    return p.b2;
}

inline void add_flat_param(CostModelParams& p, int idx, double v) {
    if (idx == 0) {
        p.gamma += v;
        return;
    }
    if (idx == 1) {
        p.beta += v;
        return;
    }
    idx -= 2;
    const int h = p.hidden();
    if (idx < h * PairFeatures::kDim) {
        p.w1(idx / PairFeatures::kDim, idx % PairFeatures::kDim) += v;
        return;
    }
    idx -= h * PairFeatures::kDim;
    if (idx < h) {
        p.b1(idx) += v;
        return;
    }
    idx -= h;
    if (idx < h) {
        p.w2(idx) += v;
        return;
    }
    p.b2 += v;
}

}  // namespace cfrs
