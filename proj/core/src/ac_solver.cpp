#include "dcplus/ac_solver.hpp"

#include <cmath>

#include <Eigen/LU>

#include "dcplus/errors.hpp"
#include "dcplus/inverse_op.hpp"
#include "dcplus/linear_model.hpp"

namespace dcplus {

std::vector<BranchFlow> branch_flows(const IndexedGrid& grid, const Eigen::VectorXd& v,
                                     const Eigen::VectorXd& theta) {
    std::vector<BranchFlow> flows(grid.branches.size());
    for (size_t k = 0; k < grid.branches.size(); ++k) {
        const auto& br = grid.branches[k];
        if (!br.in_service) continue;
        const PiAdmittance y = PiAdmittance::of(br);
        const double vf = v(br.from), vt = v(br.to);
        const double th = theta(br.from) - theta(br.to);
        const double c = std::cos(th), s = std::sin(th);
        BranchFlow& fl = flows[k];
        fl.p_f = vf * vf * y.g_ff + vf * vt * (y.g_ft * c + y.b_ft * s);
        fl.q_f = -vf * vf * y.b_ff + vf * vt * (-y.b_ft * c + y.g_ft * s);
        fl.p_t = vt * vt * y.g_tt + vt * vf * (y.g_tf * c - y.b_tf * s);
        fl.q_t = -vt * vt * y.b_tt + vt * vf * (-y.b_tf * c - y.g_tf * s);
    }
    return flows;
}

void computed_injections(const IndexedGrid& grid, const Eigen::VectorXd& v,
                         const Eigen::VectorXd& theta, Eigen::VectorXd& p_out,
                         Eigen::VectorXd& q_out) {
    const int nb = grid.bus_count();
    p_out = Eigen::VectorXd::Zero(nb);
    q_out = Eigen::VectorXd::Zero(nb);
    const auto flows = branch_flows(grid, v, theta);
    for (size_t k = 0; k < grid.branches.size(); ++k) {
        const auto& br = grid.branches[k];
        if (!br.in_service) continue;
        p_out(br.from) += flows[k].p_f;
        q_out(br.from) += flows[k].q_f;
        p_out(br.to) += flows[k].p_t;
        q_out(br.to) += flows[k].q_t;
    }
    for (int i = 0; i < nb; ++i) {
        const double v2 = v(i) * v(i);
        p_out(i) += v2 * grid.g_shunt[i];
        q_out(i) -= v2 * grid.b_shunt[i];
    }
}

namespace {

// Mismatch in the row layout of the linear model: p rows for PQ and PV
// buses, then q rows for PQ buses.
Eigen::VectorXd mismatch(const IndexedGrid& grid, const Eigen::VectorXd& v,
                         const Eigen::VectorXd& theta) {
    Eigen::VectorXd p, q;
    computed_injections(grid, v, theta, p, q);
    const int n = grid.n, m = grid.m;
    Eigen::VectorXd f(2 * n + m);
    for (int i = 0; i < n + m; ++i) f(i) = grid.p_inj(i) - p(i);
    for (int i = 0; i < n; ++i) f(n + m + i) = grid.q_inj(i) - q(i);
    return f;
}

}  // namespace

ACState ac_solve(const IndexedGrid& grid, const AcOptions& opts) {
    if (opts.tol <= 0.0) throw GridError("ac_solve: tolerance must be positive");
    {
        const auto conn = connectivity_check(grid);
        if (!conn.connected)
            throw GridError("ac_solve: grid is islanded (bus " +
                            std::to_string(conn.islanded_buses.front()) + " unreachable)");
    }

    const int nb = grid.bus_count();
    const int n = grid.n, m = grid.m;

    ACState st;
    if (opts.warm) {
        st.v = opts.warm->v;
        st.theta = opts.warm->theta;
        // PV and slack magnitudes are fixed regardless of the warm state.
        for (int i = n; i < nb; ++i) st.v(i) = grid.v_set[i];
        st.theta(grid.slack()) = 0.0;
    } else {
        st.v.resize(nb);
        for (int i = 0; i < nb; ++i) st.v(i) = grid.is_pq(i) ? 1.0 : grid.v_set[i];
        st.theta = Eigen::VectorXd::Zero(nb);
    }

    Eigen::VectorXd f = mismatch(grid, st.v, st.theta);
    double fnorm = f.lpNorm<Eigen::Infinity>();
    int iter = 0;

    while (fnorm > opts.tol && iter < opts.max_iter) {
        // The branch-block matrix at the current iterate is exactly the
        // Jacobian of the injections with respect to (theta, u).
        ReferenceState ref;
        ref.kind = ReferenceState::Kind::hot;
        ref.v_hat = st.v;
        ref.theta_hat = st.theta;
        ref.branch_theta_hat.resize(static_cast<Eigen::Index>(grid.branches.size()));
        for (size_t k = 0; k < grid.branches.size(); ++k)
            ref.branch_theta_hat(static_cast<Eigen::Index>(k)) =
                st.theta(grid.branches[k].from) - st.theta(grid.branches[k].to);
        const LinearModel jac = assemble(grid, ref);

        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac.M);
        require_nonsingular(lu, jac.M.cwiseAbs().maxCoeff(), "ac_solve");
        const Eigen::VectorXd step = lu.solve(f);

        // Step halving when the full Newton step grows the residual.
        double scale = 1.0;
        Eigen::VectorXd v_new, th_new, f_new;
        double fnorm_new = fnorm;
        for (int h = 0; h <= 4; ++h) {
            th_new = st.theta;
            v_new = st.v;
            for (int i = 0; i < n + m; ++i) th_new(i) += scale * step(i);
            for (int i = 0; i < n; ++i) v_new(i) *= 1.0 + scale * step(n + m + i);
            f_new = mismatch(grid, v_new, th_new);
            fnorm_new = f_new.lpNorm<Eigen::Infinity>();
            if (fnorm_new < fnorm || h == 4) break;
            scale *= 0.5;
        }
        st.theta = th_new;
        st.v = v_new;
        f = f_new;
        fnorm = fnorm_new;
        ++iter;
    }

    st.iterations = iter;
    st.max_mismatch = fnorm;
    st.converged = fnorm <= opts.tol;
    if (st.converged) {
        Eigen::VectorXd p, q;
        computed_injections(grid, st.v, st.theta, p, q);
        st.p_slack = p(grid.slack());
        st.q_slack = q(grid.slack());
        st.q_pv.resize(m);
        for (int i = 0; i < m; ++i) st.q_pv(i) = q(n + i);
    }
    return st;
}

}  // namespace dcplus
