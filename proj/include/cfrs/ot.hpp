#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfrs/costs.hpp"
#include "cfrs/errors.hpp"
#include "cfrs/instance.hpp"

namespace cfrs {

struct SinkhornConfig {
    double epsilon = 0.01;
    int max_iterations = 20;
    double tolerance = 1e-6;  // max marginal violation, both families

    void validate() const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("sinkhorn: epsilon must be positive");
        if (max_iterations < 1) throw std::invalid_argument("sinkhorn: max_iterations must be >= 1");
        if (!(tolerance > 0.0)) throw std::invalid_argument("sinkhorn: tolerance must be positive");
    }

    static SinkhornConfig training() { return {0.01, 20, 1e-6}; }
    static SinkhornConfig inference() { return {0.001, 1000, 1e-6}; }
};

// Balanced OT marginals for the capacitated assignment relaxation: row 0 is
// the slack customer absorbing unused fleet capacity, columns are unit
// vehicle capacities.
struct Marginals {
    Eigen::VectorXd row;  // (N+1), row(0) = slack demand
    Eigen::VectorXd col;  // (K), all ones
    double slack_demand = 0.0;
};

inline Marginals build_marginals(const Instance& inst, int k) {
    const int n = inst.n();
    Marginals m;
    m.row.resize(n + 1);
    double total = 0.0;
    for (int i = 1; i <= n; ++i) {
        m.row(i) = inst.q(i);
        total += m.row(i);
    }
    m.slack_demand = static_cast<double>(k) - total;
    if (m.slack_demand < -1e-12)
        throw InfeasibleError("build_marginals: fleet mass " + std::to_string(k) +
                              " below total demand " + std::to_string(total));
    if (m.slack_demand < 0.0) m.slack_demand = 0.0;
    m.row(0) = m.slack_demand;
    m.col = Eigen::VectorXd::Ones(k);
    return m;
}

// Cost matrix with the zero slack row prepended.
inline Eigen::MatrixXd pad_slack(const LatentCostMatrix& delta) {
    Eigen::MatrixXd out(delta.values.rows() + 1, delta.values.cols());
    out.row(0).setZero();
    out.bottomRows(delta.values.rows()) = delta.values;
    return out;
}

struct TransportPlan {
    Eigen::MatrixXd pi;           // (N+1) x K, row 0 = slack
    Eigen::VectorXd row_marginals;
    Eigen::VectorXd col_marginals;
    int iterations_used = 0;
    double final_violation = 0.0;
};

struct SoftAssignment {
    Eigen::MatrixXd y_hat;  // N x K, rows sum to 1
};

namespace detail {

inline Eigen::VectorXd row_lse(const Eigen::MatrixXd& t) {
    Eigen::VectorXd m = t.rowwise().maxCoeff();
    return m.array() + ((t.colwise() - m).array().exp().rowwise().sum()).log();
}

inline Eigen::VectorXd col_lse(const Eigen::MatrixXd& t) {
    Eigen::RowVectorXd m = t.colwise().maxCoeff();
    Eigen::RowVectorXd s = ((t.rowwise() - m).array().exp().colwise().sum()).log();
    return (m + s).transpose();
}

// Log-domain Sinkhorn on pre-reduced inputs (no zero-mass rows). When
// `record` is non-null every potential pair is stored for the reverse
// sweep; gs[0] is the zero initialization.
struct SinkhornTrace {
    std::vector<Eigen::VectorXd> fs;  // fs[t-1] = f after iteration t
    std::vector<Eigen::VectorXd> gs;  // gs[t]   = g after iteration t, gs[0] = 0
};

inline void sinkhorn_core(const Eigen::MatrixXd& delta, const Eigen::VectorXd& a,
                          const Eigen::VectorXd& b, const SinkhornConfig& cfg, Eigen::MatrixXd& pi,
                          int& iterations, double& violation, SinkhornTrace* trace) {
    const double eps = cfg.epsilon;
    const Eigen::VectorXd log_a = a.array().log();
    const Eigen::VectorXd log_b = b.array().log();

    Eigen::VectorXd f = Eigen::VectorXd::Zero(delta.rows());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(delta.cols());
    if (trace) trace->gs.push_back(g);

    iterations = 0;
    violation = std::numeric_limits<double>::infinity();
    for (int t = 1; t <= cfg.max_iterations; ++t) {
        // f_i <- eps (log a_i - LSE_j((g_j - Delta_ij)/eps))
        Eigen::MatrixXd bmat = ((-delta).rowwise() + g.transpose()) / eps;
        f = eps * (log_a - row_lse(bmat));
        // g_j <- eps (log b_j - LSE_i((f_i - Delta_ij)/eps))
        Eigen::MatrixXd cmat = ((-delta).colwise() + f) / eps;
        g = eps * (log_b - col_lse(cmat));

        if (!f.allFinite() || !g.allFinite())
            throw NumericError("sinkhorn: non-finite potentials at iteration " + std::to_string(t));
        if (trace) {
            trace->fs.push_back(f);
            trace->gs.push_back(g);
        }
        iterations = t;

        pi = (((cmat * eps).rowwise() + g.transpose()) / eps).array().exp();
        const double row_viol = ((pi.rowwise().sum() - a).array().abs()).maxCoeff();
        const double col_viol = ((pi.colwise().sum().transpose() - b).array().abs()).maxCoeff();
        violation = std::max(row_viol, col_viol);
        if (violation < cfg.tolerance) break;
    }
}

}  // namespace detail

// Entropic OT via alternating log-domain potential updates. `delta` must
// carry the slack row (index 0) of zeros; rows whose marginal is below
// 1e-9 are dropped before iterating and restored as zero rows in the plan.
inline TransportPlan sinkhorn_log_domain(const Eigen::MatrixXd& delta, const Marginals& marginals,
                                         const SinkhornConfig& cfg) {
    cfg.validate();
    if (delta.rows() != marginals.row.size() || delta.cols() != marginals.col.size())
        throw std::invalid_argument("sinkhorn: delta shape does not match marginals");
    if (!delta.allFinite() || delta.minCoeff() < 0.0)
        throw std::invalid_argument("sinkhorn: delta must be finite and non-negative");

    std::vector<int> live;
    for (int i = 0; i < marginals.row.size(); ++i)
        if (marginals.row(i) >= 1e-9) live.push_back(i);

    Eigen::MatrixXd delta_r(live.size(), delta.cols());
    Eigen::VectorXd a_r(live.size());
    for (std::size_t r = 0; r < live.size(); ++r) {
        delta_r.row(r) = delta.row(live[r]);
        a_r(r) = marginals.row(live[r]);
    }

    Eigen::MatrixXd pi_r;
    TransportPlan plan;
    detail::sinkhorn_core(delta_r, a_r, marginals.col, cfg, pi_r, plan.iterations_used,
                          plan.final_violation, nullptr);

    plan.pi = Eigen::MatrixXd::Zero(delta.rows(), delta.cols());
    for (std::size_t r = 0; r < live.size(); ++r) plan.pi.row(live[r]) = pi_r.row(r);
    plan.row_marginals = marginals.row;
    plan.col_marginals = marginals.col;
    return plan;
}

// Slack row dropped, rows scaled by 1/q_i, then renormalized to absorb the
// residual Sinkhorn violation.
inline SoftAssignment transport_to_probabilities(const TransportPlan& plan, const Instance& inst) {
    const int n = inst.n();
    const int k = static_cast<int>(plan.pi.cols());
    if (plan.pi.rows() != n + 1)
        throw std::invalid_argument("transport_to_probabilities: plan/instance size mismatch");
    SoftAssignment soft;
    soft.y_hat.resize(n, k);
    for (int i = 1; i <= n; ++i) {
        Eigen::RowVectorXd row = plan.pi.row(i) / inst.q(i);
        const double s = row.sum();
        if (s <= 0.0)
            throw NumericError("transport_to_probabilities: empty plan row " + std::to_string(i));
        soft.y_hat.row(i - 1) = row / s;
    }
    return soft;
}

// Reverse-mode derivative of the unrolled Sinkhorn iterations:
// d(sum upstream .* pi)/d(delta). Replays the forward pass with recorded
// potentials, then walks the update chain backwards; rows dropped for zero
// mass receive zero gradient.
inline Eigen::MatrixXd sinkhorn_gradient(const Eigen::MatrixXd& delta, const Marginals& marginals,
                                         const SinkhornConfig& cfg, const Eigen::MatrixXd& upstream) {
    cfg.validate();
    if (upstream.rows() != delta.rows() || upstream.cols() != delta.cols())
        throw std::invalid_argument("sinkhorn_gradient: upstream shape mismatch");

    std::vector<int> live;
    for (int i = 0; i < marginals.row.size(); ++i)
        if (marginals.row(i) >= 1e-9) live.push_back(i);

    Eigen::MatrixXd delta_r(live.size(), delta.cols());
    Eigen::VectorXd a_r(live.size());
    Eigen::MatrixXd up_r(live.size(), delta.cols());
    for (std::size_t r = 0; r < live.size(); ++r) {
        delta_r.row(r) = delta.row(live[r]);
        a_r(r) = marginals.row(live[r]);
        up_r.row(r) = upstream.row(live[r]);
    }

    Eigen::MatrixXd pi_r;
    int iterations = 0;
    double violation = 0.0;
    detail::SinkhornTrace trace;
    detail::sinkhorn_core(delta_r, a_r, marginals.col, cfg, pi_r, iterations, violation, &trace);

    const double eps = cfg.epsilon;
    const Eigen::MatrixXd up_pi = up_r.cwiseProduct(pi_r);

    // Adjoints seeded by pi = exp((f + g - delta)/eps).
    Eigen::VectorXd fbar = up_pi.rowwise().sum() / eps;
    Eigen::VectorXd gbar = up_pi.colwise().sum().transpose() / eps;
    Eigen::MatrixXd grad_r = -up_pi / eps;

    for (int t = iterations; t >= 1; --t) {
        // g^t = eps(log b - colLSE((f^t - delta)/eps))
        const Eigen::VectorXd& ft = trace.fs[t - 1];
        Eigen::MatrixXd cmat = ((-delta_r).colwise() + ft) / eps;
        Eigen::RowVectorXd cm = detail::col_lse(cmat).transpose();
        Eigen::MatrixXd p = (cmat.rowwise() - cm).array().exp();
        fbar -= p * gbar;
        grad_r += (p.array().rowwise() * gbar.transpose().array()).matrix();

        // f^t = eps(log a - rowLSE((g^{t-1} - delta)/eps))
        const Eigen::VectorXd& gprev = trace.gs[t - 1];
        Eigen::MatrixXd bmat = ((-delta_r).rowwise() + gprev.transpose()) / eps;
        Eigen::VectorXd bm = detail::row_lse(bmat);
        Eigen::MatrixXd rmat = (bmat.colwise() - bm).array().exp();
        gbar = -(rmat.transpose() * fbar);
        grad_r += (rmat.array().colwise() * fbar.array()).matrix();

        fbar.setZero();  // f^{t-1} feeds only g^{t-1}, handled next round
    }

    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(delta.rows(), delta.cols());
    for (std::size_t r = 0; r < live.size(); ++r) grad.row(live[r]) = grad_r.row(r);
    return grad;
}

// Mean over customers of -log(yhat at the target vehicle), floored at 1e-12.
inline double cross_entropy_ot(const SoftAssignment& y_hat, const std::vector<int>& target_assign) {
    const int n = static_cast<int>(y_hat.y_hat.rows());
    const int k = static_cast<int>(y_hat.y_hat.cols());
    if (static_cast<int>(target_assign.size()) != n)
        throw std::invalid_argument("cross_entropy_ot: target length mismatch");
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const int j = target_assign[i];
        if (j < 0 || j >= k) throw std::invalid_argument("cross_entropy_ot: target column out of range");
        loss += -std::log(std::max(y_hat.y_hat(i, j), 1e-12));
    }
    return loss / n;
}

// d cross_entropy_ot / d plan for the composed map plan -> probabilities ->
// loss, differentiating through the 1/q scaling and the row renormalization.
// The slack row is constant zero and receives no gradient.
inline Eigen::MatrixXd cross_entropy_ot_plan_gradient(const TransportPlan& plan,
                                                      const SoftAssignment& soft,
                                                      const Instance& inst,
                                                      const std::vector<int>& target_assign) {
    const int n = inst.n();
    const int k = static_cast<int>(plan.pi.cols());
    Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(n, k);
    for (int i = 0; i < n; ++i) {
        const double y = soft.y_hat(i, target_assign[i]);
        if (y > 1e-12) dy(i, target_assign[i]) = -1.0 / (n * y);
    }
    Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(n + 1, k);
    for (int i = 0; i < n; ++i) {
        const double qi = inst.q(i + 1);
        const double srow = plan.pi.row(i + 1).sum() / qi;
        const double dot = dy.row(i).dot(soft.y_hat.row(i));
        for (int j = 0; j < k; ++j) upstream(i + 1, j) = (dy(i, j) - dot) / (srow * qi);
    }
    return upstream;
}

// Shannon entropy -sum pi log pi with 0 log 0 = 0; used by the epsilon
// monotonicity checks.
inline double plan_entropy(const Eigen::MatrixXd& pi) {
    double h = 0.0;
    for (int i = 0; i < pi.rows(); ++i)
        for (int j = 0; j < pi.cols(); ++j) {
            const double p = pi(i, j);
            if (p > 0.0) h -= p * std::log(p);
        }
    return h;
}

}  // namespace cfrs
