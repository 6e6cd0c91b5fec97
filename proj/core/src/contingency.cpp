#include "dcplus/contingency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dcplus {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

N1Result n1_scan(const IndexedGrid& grid, const LinearModel& model, InverseOpPtr base_inv,
                 const LinState& base_state, const ACState& base_ac, const N1Options& opts) {
    N1Result res;
    const int nb = grid.bus_count();
    const int slack = grid.slack();

    std::vector<int> order;
    for (size_t k = 0; k < grid.branches.size(); ++k)
        if (grid.branches[k].in_service) order.push_back(static_cast<int>(k));
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return grid.branches[a].id < grid.branches[b].id; });

    for (int k : order) {
        OutageRecord rec;
        rec.branch = grid.branches[k].id;
        rec.branch_index = k;

        if (!connectivity_check(grid, {k}).connected) {
            rec.feasible = false;
            ++res.infeasible_count;
            res.records.push_back(std::move(rec));
            continue;
        }
        rec.feasible = true;

        // AC oracle on the reduced grid, warm-started from the base state.
        IndexedGrid reduced = grid;
        reduced.branches[k].in_service = false;
        AcOptions ac_opts;
        ac_opts.tol = opts.ac_tol;
        ac_opts.max_iter = opts.ac_max_iter;
        ac_opts.warm = base_ac;
        ACState ac = ac_solve(reduced, ac_opts);
        if (!ac.converged) {
            ac_opts.warm.reset();
            ac = ac_solve(reduced, ac_opts);
        }
        rec.ac_converged = ac.converged;
        if (!ac.converged) {
            ++res.ac_diverged_count;
            res.records.push_back(std::move(rec));
            continue;
        }
        Eigen::VectorXd p_ac, q_ac;
        computed_injections(reduced, ac.v, ac.theta, p_ac, q_ac);
        rec.v_ac = ac.v;
        rec.theta_ac = ac.theta;
        rec.p_ac = p_ac;
        rec.q_ac = q_ac;

        // Voltage-sensitive update path.
        const LowRankUpdate upd = outage_delta(grid, model.ref, k);
        const InverseOpPtr updated = woodbury_update(base_inv, upd);
        const LinState delta = state_delta(model, *updated, upd, base_state);
        LinState post;
        post.theta = base_state.theta + delta.theta;
        post.u = base_state.u + delta.u;
        const Recovered rec_plus = recover(reduced, model, post);

        rec.dv_dcplus.resize(nb);
        rec.dtheta_dcplus.resize(nb);
        rec.dp_dcplus = Eigen::VectorXd::Constant(nb, kNaN);
        rec.dq_dcplus = Eigen::VectorXd::Constant(nb, kNaN);
        for (int i = 0; i < nb; ++i) {
            rec.dv_dcplus(i) = rec_plus.v(i) - ac.v(i);
            rec.dtheta_dcplus(i) = rec_plus.theta(i) - ac.theta(i);
        }
        rec.dp_dcplus(slack) = rec_plus.p_bus(slack) - p_ac(slack);
        rec.dq_dcplus(slack) = rec_plus.q_bus(slack) - q_ac(slack);
        for (int i = grid.n; i < grid.n + grid.m; ++i)
            rec.dq_dcplus(i) = rec_plus.q_bus(i) - q_ac(i);

        // Plain DC baseline, re-solved from scratch on the reduced grid.
        const DcResult dc = dc_solve(reduced, reduced.p_inj);
        rec.dtheta_dc.resize(nb);
        for (int i = 0; i < nb; ++i) rec.dtheta_dc(i) = dc.theta(i) - ac.theta(i);
        rec.dp_dc = Eigen::VectorXd::Constant(nb, kNaN);
        double p_slack_dc = 0.0;
        for (int i = 0; i < nb; ++i)
            if (i != slack) p_slack_dc -= grid.p_inj(i);
        rec.dp_dc(slack) = p_slack_dc - p_ac(slack);

        res.records.push_back(std::move(rec));
    }
    return res;
}

namespace {

void pool_errors(const OutageRecord& rec, Quantity q, Method m, std::vector<double>& out) {
    const Eigen::VectorXd* vec = nullptr;
    switch (q) {
        case Quantity::v: vec = m == Method::dcplus ? &rec.dv_dcplus : nullptr; break;
        case Quantity::theta:
            vec = m == Method::dcplus ? &rec.dtheta_dcplus : &rec.dtheta_dc;
            break;
        case Quantity::p: vec = m == Method::dcplus ? &rec.dp_dcplus : &rec.dp_dc; break;
        case Quantity::q: vec = m == Method::dcplus ? &rec.dq_dcplus : nullptr; break;
    }
    if (vec == nullptr)
        throw GridError("error_cdf: the DC baseline provides only theta and P errors");
    for (Eigen::Index i = 0; i < vec->size(); ++i)
        if (!std::isnan((*vec)(i))) out.push_back(std::abs((*vec)(i)));
}

}  // namespace

ErrorCdf error_cdf(const std::vector<OutageRecord>& records, Quantity quantity, Method method) {
    std::vector<double> pool;
    for (const auto& rec : records) {
        if (!rec.feasible || !rec.ac_converged) continue;
        pool_errors(rec, quantity, method, pool);
    }
    if (pool.empty()) throw GridError("error_cdf: empty error pool");
    std::sort(pool.begin(), pool.end());
    ErrorCdf cdf;
    cdf.abs_error = std::move(pool);
    cdf.cum_fraction.resize(cdf.abs_error.size());
    const double n = static_cast<double>(cdf.abs_error.size());
    for (size_t i = 0; i < cdf.abs_error.size(); ++i)
        cdf.cum_fraction[i] = static_cast<double>(i + 1) / n;
    return cdf;
}

double ErrorCdf::quantile(double q) const {
    if (abs_error.empty()) throw GridError("quantile of empty CDF");
    const double pos = q * (static_cast<double>(abs_error.size()) - 1.0);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, abs_error.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * abs_error[lo] + w * abs_error[hi];
}

std::vector<double> pooled_ac_values(const std::vector<OutageRecord>& records,
                                     Quantity quantity) {
    std::vector<double> pool;
    for (const auto& rec : records) {
        if (!rec.feasible || !rec.ac_converged) continue;
        switch (quantity) {
            case Quantity::v:
                for (Eigen::Index i = 0; i < rec.v_ac.size(); ++i) pool.push_back(rec.v_ac(i));
                break;
            case Quantity::theta:
                for (Eigen::Index i = 0; i < rec.theta_ac.size(); ++i)
                    pool.push_back(rec.theta_ac(i));
                break;
            case Quantity::p:
                // P is an output at the slack only.
                for (Eigen::Index i = 0; i < rec.dp_dcplus.size(); ++i)
                    if (!std::isnan(rec.dp_dcplus(i))) pool.push_back(rec.p_ac(i));
                break;
            case Quantity::q:
                for (Eigen::Index i = 0; i < rec.dq_dcplus.size(); ++i)
                    if (!std::isnan(rec.dq_dcplus(i))) pool.push_back(rec.q_ac(i));
                break;
        }
    }
    return pool;
}

}  // namespace dcplus
