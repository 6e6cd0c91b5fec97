#include "dcplus/topology.hpp"

#include <cmath>

namespace dcplus {

Eigen::MatrixXd LowRankUpdate::S_dense() const {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(dim, rank());
    for (int c = 0; c < rank(); ++c)
        for (const auto& [p, v] : s_cols[c].terms) S(p, c) += v;
    return S;
}

Eigen::MatrixXd LowRankUpdate::R_dense() const {
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(rank(), dim);
    for (int r = 0; r < rank(); ++r)
        for (const auto& [p, v] : r_rows[r].terms) R(r, p) += v;
    return R;
}

Eigen::MatrixXd LowRankUpdate::delta_m_dense() const { return S_dense() * R_dense(); }

bool LowRankUpdate::empty() const {
    for (const auto& s : s_cols)
        if (!s.terms.empty()) return false;
    return dp_hat.terms.empty() && dq_hat.terms.empty();
}

namespace {

BranchBlock block_for(const IndexedBranch& br, const BranchParams& par,
                      const ReferenceState& ref, double theta_hat_ft) {
    if (!par.in_service) return BranchBlock{};
    IndexedBranch tmp = br;
    tmp.r = par.r;
    tmp.x = par.x;
    tmp.b_charging = par.b_charging;
    tmp.tau = par.tau;
    tmp.alpha = par.alpha;
    return branch_block(PiAdmittance::of(tmp), ref.v_hat(br.from), ref.v_hat(br.to),
                        theta_hat_ft);
}

// s-vectors of the rank-3 factorization for one branch's block difference.
void append_branch_factors(const StateIndexer& idx, int f, int t, const BranchBlock& d,
                           LowRankUpdate& upd) {
    const Selector eta_f = idx.eta_or_zero(f);
    const Selector eta_t = idx.eta_or_zero(t);
    const Selector zeta_f = idx.zeta(f);
    const Selector zeta_t = idx.zeta(t);

    SparseVec s_ft;  // angle column, scattered through eta_f - eta_t
    s_ft.add(eta_f, d.m_ptheta_ff);
    s_ft.add(eta_t, -d.m_ptheta_tt);  // Delta M^{p theta}_{tf} = -Delta M^{p theta}_{tt}
    s_ft.add(zeta_f, d.m_qtheta_ff);
    s_ft.add(zeta_t, -d.m_qtheta_tt);

    SparseVec s_f;  // column against zeta_f
    s_f.add(eta_f, d.m_pu_ff);
    s_f.add(eta_t, d.m_pu_tf);
    s_f.add(zeta_f, d.m_qu_ff);
    s_f.add(zeta_t, d.m_qu_tf);

    SparseVec s_t;  // column against zeta_t
    s_t.add(eta_f, d.m_pu_ft);
    s_t.add(eta_t, d.m_pu_tt);
    s_t.add(zeta_f, d.m_qu_ft);
    s_t.add(zeta_t, d.m_qu_tt);

    SparseVec r1, r2, r3;
    r1.add(eta_f, 1.0);
    r1.add(eta_t, -1.0);
    r2.add(zeta_f, 1.0);
    r3.add(zeta_t, 1.0);

    upd.s_cols.push_back(std::move(s_ft));
    upd.s_cols.push_back(std::move(s_f));
    upd.s_cols.push_back(std::move(s_t));
    upd.r_rows.push_back(std::move(r1));
    upd.r_rows.push_back(std::move(r2));
    upd.r_rows.push_back(std::move(r3));

    upd.dp_hat.add(idx.eta_or_zero(f), d.p_hat_f);
    upd.dp_hat.add(idx.eta_or_zero(t), d.p_hat_t);
    upd.dq_hat.add(zeta_f, d.q_hat_f);
    upd.dq_hat.add(zeta_t, d.q_hat_t);
}

BranchBlock block_difference(const BranchBlock& a, const BranchBlock& b) {
    BranchBlock d;
    d.p_hat_f = a.p_hat_f - b.p_hat_f;
    d.p_hat_t = a.p_hat_t - b.p_hat_t;
    d.q_hat_f = a.q_hat_f - b.q_hat_f;
    d.q_hat_t = a.q_hat_t - b.q_hat_t;
    d.m_ptheta_ff = a.m_ptheta_ff - b.m_ptheta_ff;
    d.m_ptheta_tt = a.m_ptheta_tt - b.m_ptheta_tt;
    d.m_qtheta_ff = a.m_qtheta_ff - b.m_qtheta_ff;
    d.m_qtheta_tt = a.m_qtheta_tt - b.m_qtheta_tt;
    d.m_pu_ff = a.m_pu_ff - b.m_pu_ff;
    d.m_pu_ft = a.m_pu_ft - b.m_pu_ft;
    d.m_pu_tf = a.m_pu_tf - b.m_pu_tf;
    d.m_pu_tt = a.m_pu_tt - b.m_pu_tt;
    d.m_qu_ff = a.m_qu_ff - b.m_qu_ff;
    d.m_qu_ft = a.m_qu_ft - b.m_qu_ft;
    d.m_qu_tf = a.m_qu_tf - b.m_qu_tf;
    d.m_qu_tt = a.m_qu_tt - b.m_qu_tt;
    return d;
}

}  // namespace

LowRankUpdate branch_delta(const IndexedGrid& grid, const ReferenceState& ref, int branch,
                           const BranchParams& next) {
    if (branch < 0 || branch >= static_cast<int>(grid.branches.size()))
        throw GridError("branch_delta: branch index out of range");
    const IndexedBranch& br = grid.branches[branch];
    const StateIndexer idx(grid.n, grid.m);
    const double th = ref.branch_theta_hat(branch);

    const BranchBlock before = block_for(br, BranchParams::of(br), ref, th);
    const BranchBlock after = block_for(br, next, ref, th);

    LowRankUpdate upd;
    upd.dim = idx.dim();
    append_branch_factors(idx, br.from, br.to, block_difference(after, before), upd);
    return upd;
}

LowRankUpdate multi_branch_delta(const IndexedGrid& grid, const ReferenceState& ref,
                                 const std::vector<std::pair<int, BranchParams>>& mods) {
    for (size_t a = 0; a < mods.size(); ++a)
        for (size_t b = a + 1; b < mods.size(); ++b)
            if (mods[a].first == mods[b].first)
                throw GridError("multi_branch_delta: duplicate branch in modification list");
    LowRankUpdate upd;
    upd.dim = StateIndexer(grid.n, grid.m).dim();
    for (const auto& [branch, params] : mods) {
        LowRankUpdate one = branch_delta(grid, ref, branch, params);
        for (auto& s : one.s_cols) upd.s_cols.push_back(std::move(s));
        for (auto& r : one.r_rows) upd.r_rows.push_back(std::move(r));
        for (const auto& t : one.dp_hat.terms) upd.dp_hat.terms.push_back(t);
        for (const auto& t : one.dq_hat.terms) upd.dq_hat.terms.push_back(t);
    }
    return upd;
}

LineMod LineMod::outage_of(const IndexedBranch& br) {
    const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    return {-ys.real(), -ys.imag()};
}

Eigen::Matrix2d line_mod_d(const IndexedGrid& grid, const ReferenceState& ref, int branch,
                           const LineMod& mod) {
    const IndexedBranch& br = grid.branches[branch];
    const double vv = ref.v_hat(br.from) * ref.v_hat(br.to);
    Eigen::Matrix2d d;
    d << -mod.db_s, mod.dg_s, -mod.dg_s, -mod.db_s;
    return vv * d;
}

LowRankUpdate line_mod_delta(const IndexedGrid& grid, const ReferenceState& ref, int branch,
                             const LineMod& mod) {
    const IndexedBranch& br = grid.branches[branch];
    const StateIndexer idx(grid.n, grid.m);
    const Eigen::Matrix2d d = line_mod_d(grid, ref, branch, mod);
    const Selector mu = idx.mu(br.from, br.to);
    const Selector nu = idx.nu(br.from, br.to);

    LowRankUpdate upd;
    upd.dim = idx.dim();
    SparseVec s1, s2, r1, r2;
    s1.add(mu, d(0, 0));
    s1.add(nu, d(1, 0));
    s2.add(mu, d(0, 1));
    s2.add(nu, d(1, 1));
    r1.add(mu, 1.0);
    r2.add(nu, 1.0);
    upd.s_cols = {std::move(s1), std::move(s2)};
    upd.r_rows = {std::move(r1), std::move(r2)};
    return upd;
}

InverseOpPtr woodbury_update(InverseOpPtr base, const LowRankUpdate& upd) {
    if (upd.empty()) return base;
    return std::make_shared<WoodburyInverse>(std::move(base), upd.S_dense(), upd.R_dense());
}

LinState state_delta(const LinearModel& model, const InverseOp& updated_inv,
                     const LowRankUpdate& upd, const LinState& base) {
    const Eigen::VectorXd x = pack_state(model.idx, base);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(model.idx.dim());
    // Delta M x = S (R x)
    for (int c = 0; c < upd.rank(); ++c) upd.s_cols[c].add_to(rhs, upd.r_rows[c].dot(x));
    upd.dp_hat.add_to(rhs);
    // dq_hat terms live on u rows already (zeta positions)
    upd.dq_hat.add_to(rhs);
    return unpack_state(model.idx, Eigen::VectorXd(-updated_inv.apply(rhs)));
}

LmdfEngine::LmdfEngine(const LinearModel& model, const InverseOp& minv, const IndexedGrid& grid,
                       int modified_branch, const LineMod& mod, const LmdfOptions& opts,
                       std::vector<std::string>* warnings)
    : grid_(grid), idx_(model.idx) {
    const IndexedBranch& br = grid.branches[modified_branch];
    f_ = br.from;
    t_ = br.to;
    d_ = line_mod_d(grid, model.ref, modified_branch, mod);

    auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };
    const double th = model.ref.branch_theta_hat(modified_branch);
    if (std::abs(th) > opts.theta_tol)
        warn("lmdf: |theta_hat| = " + std::to_string(std::abs(th)) + " rad on branch " +
             br.id.str() + " exceeds " + std::to_string(opts.theta_tol));
    if (std::abs(model.ref.v_hat(f_) - model.ref.v_hat(t_)) > opts.v_tol)
        warn("lmdf: |v_f - v_t| on branch " + br.id.str() + " exceeds " +
             std::to_string(opts.v_tol));
    if (br.alpha != 0.0) warn("lmdf: branch " + br.id.str() + " has a phase shift");
    if (br.tau != 1.0) warn("lmdf: branch " + br.id.str() + " has an off-nominal tap");

    const Selector mu = idx_.mu(f_, t_);
    const Selector nu = idx_.nu(f_, t_);
    minv_mu_ = minv.apply(mu.dense(idx_.dim()));
    minv_nu_ = minv.apply(nu.dense(idx_.dim()));

    Eigen::Matrix2d a_ff;
    a_ff << mu.dot(minv_mu_), mu.dot(minv_nu_), nu.dot(minv_mu_), nu.dot(minv_nu_);
    const Eigen::Matrix2d gate = Eigen::Matrix2d::Identity() + d_ * a_ff;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu =
        factor_inner(gate, "lmdf");
    inner_d_ = lu.solve(d_);
}

Eigen::Matrix2d LmdfEngine::factor_for(int monitored_branch) const {
    const IndexedBranch& br = grid_.branches[monitored_branch];
    const Selector mu_kl = idx_.mu(br.from, br.to);
    const Selector nu_kl = idx_.nu(br.from, br.to);
    Eigen::Matrix2d a_kl;
    a_kl << mu_kl.dot(minv_mu_), mu_kl.dot(minv_nu_), nu_kl.dot(minv_mu_), nu_kl.dot(minv_nu_);
    // The minus makes the factor consistent with the state-delta relation
    // and with the classical DC distribution factors in the lossless limit.
    return -a_kl * inner_d_;
}

Eigen::Vector2d LmdfEngine::deltas_for(int monitored_branch, const LinState& base) const {
    return factor_for(monitored_branch) * branch_state_diff(idx_, base, f_, t_);
}

Eigen::Matrix2d lmdf(const LinearModel& model, const InverseOp& minv, const IndexedGrid& grid,
                     int monitored_branch, int modified_branch, const LineMod& mod,
                     const LmdfOptions& opts, std::vector<std::string>* warnings) {
    return LmdfEngine(model, minv, grid, modified_branch, mod, opts, warnings)
        .factor_for(monitored_branch);
}

Eigen::Vector2d branch_state_diff(const StateIndexer& idx, const LinState& st, int from,
                                  int to) {
    const Eigen::VectorXd x = pack_state(idx, st);
    return {idx.mu(from, to).dot(x), idx.nu(from, to).dot(x)};
}

}  // namespace dcplus
