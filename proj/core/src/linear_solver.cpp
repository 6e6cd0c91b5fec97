#include "dcplus/linear_solver.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace dcplus {

Injections grid_injections(const IndexedGrid& grid) {
    Injections inj;
    inj.p = grid.p_inj.head(grid.n + grid.m);
    inj.q = grid.q_inj.head(grid.n);
    return inj;
}

Eigen::VectorXd pack_state(const StateIndexer& idx, const LinState& st) {
    Eigen::VectorXd x(idx.dim());
    x.head(idx.n() + idx.m()) = st.theta;
    x.tail(idx.n()) = st.u;
    return x;
}

LinState unpack_state(const StateIndexer& idx, const Eigen::VectorXd& x) {
    LinState st;
    st.theta = x.head(idx.n() + idx.m());
    st.u = x.tail(idx.n());
    return st;
}

LinState solve(const LinearModel& model, const InverseOp& minv, const Injections& inj) {
    const int nm = model.idx.n() + model.idx.m();
    if (inj.p.size() != nm || inj.q.size() != model.idx.n())
        throw GridError("solve: injection dimensions do not match the model");
    Eigen::VectorXd rhs(model.idx.dim());
    rhs.head(nm) = inj.p - model.p_hat;
    rhs.tail(model.idx.n()) = inj.q - model.q_hat;
    return unpack_state(model.idx, minv.apply(rhs));
}

DcSystem dc_susceptance(const IndexedGrid& grid) {
    DcSystem sys;
    const int nm = grid.n + grid.m;
    sys.B = Eigen::MatrixXd::Zero(nm, nm);
    sys.beta.assign(grid.branches.size(), 0.0);
    const int slack = grid.slack();
    for (size_t k = 0; k < grid.branches.size(); ++k) {
        const auto& br = grid.branches[k];
        if (!br.in_service || br.x == 0.0) continue;
        const double beta = 1.0 / (br.x * br.tau);
        sys.beta[k] = beta;
        if (br.from != slack) sys.B(br.from, br.from) += beta;
        if (br.to != slack) sys.B(br.to, br.to) += beta;
        if (br.from != slack && br.to != slack) {
            sys.B(br.from, br.to) -= beta;
            sys.B(br.to, br.from) -= beta;
        }
    }
    return sys;
}

DcResult dc_solve(const IndexedGrid& grid, const Eigen::VectorXd& p_inj) {
    const int nm = grid.n + grid.m;
    const DcSystem sys = dc_susceptance(grid);

    Eigen::VectorXd rhs = p_inj.head(nm);
    for (size_t k = 0; k < grid.branches.size(); ++k) {
        const auto& br = grid.branches[k];
        if (sys.beta[k] == 0.0 || br.alpha == 0.0) continue;
        if (br.from != grid.slack()) rhs(br.from) += sys.beta[k] * br.alpha;
        if (br.to != grid.slack()) rhs(br.to) -= sys.beta[k] * br.alpha;
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.B);
    require_nonsingular(lu, sys.B.cwiseAbs().maxCoeff(), "dc_solve");

    DcResult res;
    res.theta = Eigen::VectorXd::Zero(grid.bus_count());
    res.theta.head(nm) = lu.solve(rhs);
    res.flow.assign(grid.branches.size(), 0.0);
    for (size_t k = 0; k < grid.branches.size(); ++k) {
        const auto& br = grid.branches[k];
        if (sys.beta[k] == 0.0) continue;
        res.flow[k] = sys.beta[k] * (res.theta(br.from) - res.theta(br.to) - br.alpha);
    }
    return res;
}

namespace {

BranchFlow linear_flow(const BranchBlock& blk, double th_f, double th_t, double u_f, double u_t) {
    BranchFlow fl;
    const double dth = th_f - th_t;
    fl.p_f = blk.p_hat_f + blk.m_ptheta_ff * dth + blk.m_pu_ff * u_f + blk.m_pu_ft * u_t;
    fl.q_f = blk.q_hat_f + blk.m_qtheta_ff * dth + blk.m_qu_ff * u_f + blk.m_qu_ft * u_t;
    fl.p_t = blk.p_hat_t - blk.m_ptheta_tt * dth + blk.m_pu_tf * u_f + blk.m_pu_tt * u_t;
    fl.q_t = blk.q_hat_t - blk.m_qtheta_tt * dth + blk.m_qu_tf * u_f + blk.m_qu_tt * u_t;
    return fl;
}

}  // namespace

Recovered recover(const IndexedGrid& grid, const LinearModel& model, const LinState& st,
                  const RecoverOptions& opts) {
    const int nb = grid.bus_count();
    const StateIndexer& idx = model.idx;

    Recovered out;
    out.theta = Eigen::VectorXd::Zero(nb);
    out.theta.head(idx.n() + idx.m()) = st.theta;
    out.v.resize(nb);
    for (int i = 0; i < nb; ++i) {
        const double u = i < idx.n() ? st.u(i) : 0.0;
        out.v(i) = model.ref.v_hat(i) * (1.0 + u);
    }

    if (opts.nonlinear_flows) {
        out.flows = branch_flows(grid, out.v, out.theta);
    } else {
        out.flows.resize(grid.branches.size());
        for (size_t k = 0; k < grid.branches.size(); ++k) {
            const auto& br = grid.branches[k];
            if (!br.in_service) continue;
            const BranchBlock blk = branch_block(
                PiAdmittance::of(br), model.ref.v_hat(br.from), model.ref.v_hat(br.to),
                model.ref.branch_theta_hat(static_cast<Eigen::Index>(k)));
            const double uf = br.from < idx.n() ? st.u(br.from) : 0.0;
            const double ut = br.to < idx.n() ? st.u(br.to) : 0.0;
            out.flows[k] = linear_flow(blk, out.theta(br.from), out.theta(br.to), uf, ut);
        }
    }

    out.p_bus = Eigen::VectorXd::Zero(nb);
    out.q_bus = Eigen::VectorXd::Zero(nb);
    for (size_t k = 0; k < grid.branches.size(); ++k) {
        const auto& br = grid.branches[k];
        if (!br.in_service) continue;
        out.p_bus(br.from) += out.flows[k].p_f;
        out.q_bus(br.from) += out.flows[k].q_f;
        out.p_bus(br.to) += out.flows[k].p_t;
        out.q_bus(br.to) += out.flows[k].q_t;
    }
    for (int i = 0; i < nb; ++i) {
        if (grid.g_shunt[i] == 0.0 && grid.b_shunt[i] == 0.0) continue;
        const ShuntBlock sh = shunt_block(grid.g_shunt[i], grid.b_shunt[i], model.ref.v_hat(i));
        const double u = i < idx.n() ? st.u(i) : 0.0;
        out.p_bus(i) += sh.p_hat + sh.n_pu * u;
        out.q_bus(i) += sh.q_hat + sh.n_qu * u;
    }
    return out;
}

LinState injection_sensitivity(const LinearModel& model, const InverseOp& minv, int bus,
                               bool reactive) {
    const StateIndexer& idx = model.idx;
    const Selector sel = reactive ? idx.zeta(bus) : idx.eta(bus);
    if (sel.zero())
        throw GridError("injection_sensitivity: bus " + std::to_string(bus) +
                        " has no reactive equation");
    return unpack_state(idx, minv.apply(sel.dense(idx.dim())));
}

std::string model_to_csv(const LinearModel& model) {
    std::ostringstream os;
    char buf[96];
    os << "kind,row,col,value\n";
    for (Eigen::Index r = 0; r < model.M.rows(); ++r)
        for (Eigen::Index c = 0; c < model.M.cols(); ++c) {
            if (model.M(r, c) == 0.0) continue;
            std::snprintf(buf, sizeof buf, "M,%ld,%ld,%.17g\n", static_cast<long>(r),
                          static_cast<long>(c), model.M(r, c));
            os << buf;
        }
    for (Eigen::Index i = 0; i < model.p_hat.size(); ++i) {
        std::snprintf(buf, sizeof buf, "p_hat,%ld,0,%.17g\n", static_cast<long>(i),
                      model.p_hat(i));
        os << buf;
    }
    for (Eigen::Index i = 0; i < model.q_hat.size(); ++i) {
        std::snprintf(buf, sizeof buf, "q_hat,%ld,0,%.17g\n", static_cast<long>(i),
                      model.q_hat(i));
        os << buf;
    }
    return os.str();
}

}  // namespace dcplus
