#include "dcplus/linear_model.hpp"

#include <cmath>

#include "dcplus/errors.hpp"

namespace dcplus {

PiAdmittance PiAdmittance::of(const IndexedBranch& br) {
    std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    return from_series(ys.real(), ys.imag(), br.b_charging, br.tau, br.alpha);
}

PiAdmittance PiAdmittance::from_series(double g_s, double b_s, double b_charging, double tau,
                                       double alpha) {
    const std::complex<double> ys(g_s, b_s);
    const std::complex<double> yc(0.0, b_charging / 2.0);
    const std::complex<double> rot(std::cos(alpha), std::sin(alpha));
    const std::complex<double> yff = (ys + yc) / (tau * tau);
    const std::complex<double> yft = -ys * rot / tau;        // -ys / (tau e^{-ja})
    const std::complex<double> ytf = -ys / (rot * tau);      // -ys / (tau e^{+ja})
    const std::complex<double> ytt = ys + yc;
    PiAdmittance a;
    a.g_ff = yff.real(); a.b_ff = yff.imag();
    a.g_ft = yft.real(); a.b_ft = yft.imag();
    a.g_tf = ytf.real(); a.b_tf = ytf.imag();
    a.g_tt = ytt.real(); a.b_tt = ytt.imag();
    return a;
}

namespace {

// One side of the linearized branch relation. Evaluated once per direction
// with the roles of f and t (and the sign of the angle reference) swapped.
struct SideBlock {
    double p_hat, q_hat;
    double m_ptheta_ff;  // = -m_ptheta_ft
    double m_qtheta_ff;
    double m_pu_ff, m_pu_ft;
    double m_qu_ff, m_qu_ft;
};

SideBlock side_block(double g_ff, double b_ff, double g_ft, double b_ft, double vf, double vt,
                     double th) {
    const double c = std::cos(th), s = std::sin(th);
    const double vv = vf * vt;
    SideBlock e;
    e.p_hat = vf * vf * g_ff + vv * (g_ft * c + b_ft * s) - vv * (-g_ft * s + b_ft * c) * th;
    e.q_hat = -vf * vf * b_ff + vv * (g_ft * s - b_ft * c) - vv * (b_ft * s + g_ft * c) * th;
    e.m_pu_ff = 2.0 * vf * vf * g_ff + vv * (g_ft * c + b_ft * s);
    e.m_pu_ft = vv * (g_ft * c + b_ft * s);
    e.m_qu_ff = -2.0 * vf * vf * b_ff + vv * (-b_ft * c + g_ft * s);
    e.m_qu_ft = vv * (-b_ft * c + g_ft * s);
    e.m_ptheta_ff = vv * (-g_ft * s + b_ft * c);
    e.m_qtheta_ff = vv * (b_ft * s + g_ft * c);
    return e;
}

}  // namespace

BranchBlock branch_block(const PiAdmittance& y, double v_hat_f, double v_hat_t,
                         double theta_hat_ft) {
    const SideBlock f = side_block(y.g_ff, y.b_ff, y.g_ft, y.b_ft, v_hat_f, v_hat_t, theta_hat_ft);
    const SideBlock t = side_block(y.g_tt, y.b_tt, y.g_tf, y.b_tf, v_hat_t, v_hat_f, -theta_hat_ft);
    BranchBlock b;
    b.p_hat_f = f.p_hat;
    b.q_hat_f = f.q_hat;
    b.m_ptheta_ff = f.m_ptheta_ff;
    b.m_qtheta_ff = f.m_qtheta_ff;
    b.m_pu_ff = f.m_pu_ff;
    b.m_pu_ft = f.m_pu_ft;
    b.m_qu_ff = f.m_qu_ff;
    b.m_qu_ft = f.m_qu_ft;
    b.p_hat_t = t.p_hat;
    b.q_hat_t = t.q_hat;
    b.m_ptheta_tt = t.m_ptheta_ff;
    b.m_qtheta_tt = t.m_qtheta_ff;
    b.m_pu_tt = t.m_pu_ff;
    b.m_pu_tf = t.m_pu_ft;
    b.m_qu_tt = t.m_qu_ff;
    b.m_qu_tf = t.m_qu_ft;
    return b;
}

ShuntBlock shunt_block(double g_shunt, double b_shunt, double v_hat) {
    ShuntBlock s;
    const double v2 = v_hat * v_hat;
    s.p_hat = v2 * g_shunt;
    s.n_pu = 2.0 * v2 * g_shunt;
    s.q_hat = -v2 * b_shunt;
    s.n_qu = -2.0 * v2 * b_shunt;
    return s;
}

ReferenceState cold_ref(const IndexedGrid& grid) {
    ReferenceState ref;
    ref.kind = ReferenceState::Kind::cold;
    const int nb = grid.bus_count();
    ref.v_hat.resize(nb);
    for (int i = 0; i < nb; ++i) ref.v_hat(i) = grid.is_pq(i) ? 1.0 : grid.v_set[i];
    ref.theta_hat = Eigen::VectorXd::Zero(nb);
    ref.branch_theta_hat.resize(static_cast<Eigen::Index>(grid.branches.size()));
    for (size_t k = 0; k < grid.branches.size(); ++k)
        ref.branch_theta_hat(static_cast<Eigen::Index>(k)) = grid.branches[k].alpha;
    return ref;
}

ReferenceState hot_ref(const IndexedGrid& grid, const ACState& state) {
    if (!state.converged) throw ConvergenceError("hot_ref requires a converged AC state");
    ReferenceState ref;
    ref.kind = ReferenceState::Kind::hot;
    ref.v_hat = state.v;
    ref.theta_hat = state.theta;
    ref.branch_theta_hat.resize(static_cast<Eigen::Index>(grid.branches.size()));
    for (size_t k = 0; k < grid.branches.size(); ++k) {
        const auto& br = grid.branches[k];
        ref.branch_theta_hat(static_cast<Eigen::Index>(k)) = state.theta(br.from) - state.theta(br.to);
    }
    return ref;
}

void scatter_branch(const StateIndexer& idx, int from, int to, const BranchBlock& blk,
                    Eigen::MatrixXd& M, Eigen::VectorXd& p_hat, Eigen::VectorXd& q_hat) {
    const int slack = idx.slack();
    const bool f_row = from != slack;
    const bool t_row = to != slack;
    const bool f_u = from < idx.n();
    const bool t_u = to < idx.n();

    if (f_row) {
        const int af = idx.angle_coord(from);
        p_hat(af) += blk.p_hat_f;
        M(af, af) += blk.m_ptheta_ff;
        if (t_row) M(af, idx.angle_coord(to)) -= blk.m_ptheta_ff;
        if (f_u) M(af, idx.u_coord(from)) += blk.m_pu_ff;
        if (t_u) M(af, idx.u_coord(to)) += blk.m_pu_ft;
    }
    if (t_row) {
        const int at = idx.angle_coord(to);
        p_hat(at) += blk.p_hat_t;
        M(at, at) += blk.m_ptheta_tt;
        if (f_row) M(at, idx.angle_coord(from)) -= blk.m_ptheta_tt;
        if (t_u) M(at, idx.u_coord(to)) += blk.m_pu_tt;
        if (f_u) M(at, idx.u_coord(from)) += blk.m_pu_tf;
    }
    if (f_u) {
        const int uf = idx.u_coord(from);
        q_hat(from) += blk.q_hat_f;
        if (f_row) M(uf, idx.angle_coord(from)) += blk.m_qtheta_ff;
        if (t_row) M(uf, idx.angle_coord(to)) -= blk.m_qtheta_ff;
        M(uf, uf) += blk.m_qu_ff;
        if (t_u) M(uf, idx.u_coord(to)) += blk.m_qu_ft;
    }
    if (t_u) {
        const int ut = idx.u_coord(to);
        q_hat(to) += blk.q_hat_t;
        if (t_row) M(ut, idx.angle_coord(to)) += blk.m_qtheta_tt;
        if (f_row) M(ut, idx.angle_coord(from)) -= blk.m_qtheta_tt;
        M(ut, ut) += blk.m_qu_tt;
        if (f_u) M(ut, idx.u_coord(from)) += blk.m_qu_tf;
    }
}

void scatter_shunt(const StateIndexer& idx, int bus, const ShuntBlock& blk, Eigen::MatrixXd& M,
                   Eigen::VectorXd& p_hat, Eigen::VectorXd& q_hat) {
    if (bus != idx.slack()) p_hat(idx.angle_coord(bus)) += blk.p_hat;
    if (bus < idx.n()) {
        q_hat(bus) += blk.q_hat;
        M(idx.angle_coord(bus), idx.u_coord(bus)) += blk.n_pu;
        M(idx.u_coord(bus), idx.u_coord(bus)) += blk.n_qu;
    }
}

LinearModel assemble(const IndexedGrid& grid, const ReferenceState& ref) {
    LinearModel model;
    model.ref = ref;
    model.idx = StateIndexer(grid.n, grid.m);
    const int dim = model.idx.dim();
    model.M = Eigen::MatrixXd::Zero(dim, dim);
    model.p_hat = Eigen::VectorXd::Zero(grid.n + grid.m);
    model.q_hat = Eigen::VectorXd::Zero(grid.n);

    for (size_t k = 0; k < grid.branches.size(); ++k) {
        const auto& br = grid.branches[k];
        if (!br.in_service) continue;
        const BranchBlock blk =
            branch_block(PiAdmittance::of(br), ref.v_hat(br.from), ref.v_hat(br.to),
                         ref.branch_theta_hat(static_cast<Eigen::Index>(k)));
        scatter_branch(model.idx, br.from, br.to, blk, model.M, model.p_hat, model.q_hat);
    }
    for (int i = 0; i < grid.bus_count(); ++i) {
        if (grid.g_shunt[i] == 0.0 && grid.b_shunt[i] == 0.0) continue;
        scatter_shunt(model.idx, i, shunt_block(grid.g_shunt[i], grid.b_shunt[i], ref.v_hat(i)),
                      model.M, model.p_hat, model.q_hat);
    }
    return model;
}

}  // namespace dcplus
