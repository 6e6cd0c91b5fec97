#include "dcplus/bus_split.hpp"

#include <algorithm>
#include <cmath>

namespace dcplus {

InverseOpPtr close_switch(InverseOpPtr open_inv, const StateIndexer& idx,
                          const ReferenceState& ref, int f, int t, double v_tol) {
    if (f == t) throw TopologyError("close_switch: endpoints must differ");
    const double vf = ref.v_hat(f), vt = ref.v_hat(t);
    if (std::abs(vf - vt) > v_tol * std::max(1.0, std::abs(vf)))
        throw TopologyError("close_switch: reference magnitudes differ at the switch ends");
    const double th = ref.theta_hat(f) - ref.theta_hat(t);
    if (std::abs(th) > 0.1)
        throw TopologyError(
            "close_switch: reference angle gap exceeds 0.1 rad; the linearized ideal switch "
            "is not meaningful across such a span");
    const double c = std::cos(th), s = std::sin(th);

    const Selector eta_f = idx.eta_or_zero(f);
    const Selector eta_t = idx.eta_or_zero(t);
    const Selector zeta_f = idx.zeta(f);
    const Selector zeta_t = idx.zeta(t);

    // Block difference of an ideal switch, with the diverging prefactor
    // b v_f v_t stripped; it cancels once the identity term of the inner
    // bracket is dropped. The raw column triple (s_ft, s_f, s_t) satisfies
    // s_t = -s_f + O(theta_hat), so its limit bracket is singular at
    // theta_hat = 0 and near-singular otherwise. The update is therefore
    // taken in the equivalent coupler form
    //   Delta M = s_ft mu^T + s_f nu^T + (s_f + s_t) zeta_t^T
    // with the O(theta_hat) third pair dropped: the ideal coupler enforces
    // the two constraints theta_f = theta_t and u_f = u_t.
    SparseVec s_ft, s_f;
    s_ft.add(eta_f, -c);
    s_ft.add(eta_t, c);
    s_ft.add(zeta_f, -s);
    s_ft.add(zeta_t, -s);

    s_f.add(eta_t, s);
    s_f.add(eta_f, -s);
    s_f.add(zeta_t, c);
    s_f.add(zeta_f, c - 2.0);

    SparseVec r1, r23;
    r1.add(eta_f, 1.0);
    r1.add(eta_t, -1.0);
    r23.add(zeta_f, 1.0);
    r23.add(zeta_t, -1.0);

    const int dim = idx.dim();
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(dim, 2);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(2, dim);
    for (const auto& [p, v] : s_ft.terms) S(p, 0) += v;
    for (const auto& [p, v] : s_f.terms) S(p, 1) += v;
    for (const auto& [p, v] : r1.terms) R(0, p) += v;
    for (const auto& [p, v] : r23.terms) R(1, p) += v;

    return std::make_shared<LimitWoodburyInverse>(std::move(open_inv), S, R);
}

SplitContext pad_for_split(const IndexedGrid& merged, const ReferenceState& merged_ref,
                           InverseOpPtr merged_inv, const SplitAssignment& assignment) {
    const auto it = merged.index_of.find(assignment.bus_ext);
    if (it == merged.index_of.end())
        throw TopologyError("split: unknown bus " + std::to_string(assignment.bus_ext));
    const int s = it->second;
    if (!merged.is_pq(s))
        throw TopologyError("split: bus " + std::to_string(assignment.bus_ext) +
                            " must be a PQ bus");
    if (merged.g_shunt[s] != 0.0 || merged.b_shunt[s] != 0.0)
        throw TopologyError("split: bus " + std::to_string(assignment.bus_ext) +
                            " carries a shunt element");

    for (const auto& [id, bar] : assignment.branch_busbar) {
        if (bar != 'A' && bar != 'B')
            throw TopologyError("split: busbar must be 'A' or 'B' for branch " + id.str());
        const IndexedBranch* br = merged.find_branch(id);
        if (br == nullptr) throw TopologyError("split: unknown branch " + id.str());
        if (br->from != s && br->to != s)
            throw TopologyError("split: branch " + id.str() + " is not incident to bus " +
                                std::to_string(assignment.bus_ext));
    }
    for (const auto& br : merged.branches) {
        if (!br.in_service) continue;
        if (br.from == s && br.to == s)
            throw TopologyError("split: self-loop at the split bus is not supported");
        if ((br.from == s || br.to == s) && !assignment.branch_busbar.count(br.id))
            throw TopologyError("split: branch " + br.id.str() + " is not assigned to a busbar");
    }

    const int n = merged.n, m = merged.m;
    const int nb = merged.bus_count();
    auto shift = [n](int i) { return i < n ? i : i + 1; };

    SplitContext ctx;
    ctx.busbar_a = s;
    ctx.busbar_b = n;
    ctx.new_bus_ext = *std::max_element(merged.bus_ids.begin(), merged.bus_ids.end()) + 1;

    IndexedGrid& g = ctx.open_grid;
    g.n = n + 1;
    g.m = m;
    g.bus_ids.resize(nb + 1);
    g.kind.resize(nb + 1);
    g.v_set.resize(nb + 1);
    g.g_shunt.resize(nb + 1);
    g.b_shunt.resize(nb + 1);
    g.base_kv.resize(nb + 1);
    g.p_inj.resize(nb + 1);
    g.q_inj.resize(nb + 1);
    for (int i = 0; i < nb; ++i) {
        const int j = shift(i);
        g.bus_ids[j] = merged.bus_ids[i];
        g.kind[j] = merged.kind[i];
        g.v_set[j] = merged.v_set[i];
        g.g_shunt[j] = merged.g_shunt[i];
        g.b_shunt[j] = merged.b_shunt[i];
        g.base_kv[j] = merged.base_kv[i];
        g.p_inj(j) = merged.p_inj(i);
        g.q_inj(j) = merged.q_inj(i);
    }
    g.bus_ids[n] = ctx.new_bus_ext;
    g.kind[n] = BusKind::pq;
    g.v_set[n] = 1.0;
    g.g_shunt[n] = 0.0;
    g.b_shunt[n] = 0.0;
    g.base_kv[n] = merged.base_kv[s];
    g.p_inj(shift(s)) = assignment.p_inj_a;
    g.q_inj(shift(s)) = assignment.q_inj_a;
    g.p_inj(n) = merged.p_inj(s) - assignment.p_inj_a;
    g.q_inj(n) = merged.q_inj(s) - assignment.q_inj_a;
    for (int j = 0; j <= nb; ++j) g.index_of[g.bus_ids[j]] = j;

    g.branches = merged.branches;
    for (auto& br : g.branches) {
        const bool to_b =
            (br.from == s || br.to == s) &&
            assignment.branch_busbar.count(br.id) && assignment.branch_busbar.at(br.id) == 'B';
        const int from0 = br.from, to0 = br.to;
        br.from = to_b && from0 == s ? ctx.busbar_b : shift(from0);
        br.to = to_b && to0 == s ? ctx.busbar_b : shift(to0);
    }

    ctx.open_ref = merged_ref;
    ctx.open_ref.v_hat.resize(nb + 1);
    ctx.open_ref.theta_hat.resize(nb + 1);
    for (int i = 0; i < nb; ++i) {
        ctx.open_ref.v_hat(shift(i)) = merged_ref.v_hat(i);
        ctx.open_ref.theta_hat(shift(i)) = merged_ref.theta_hat(i);
    }
    ctx.open_ref.v_hat(n) = merged_ref.v_hat(s);
    ctx.open_ref.theta_hat(n) = merged_ref.theta_hat(s);
    // Same branches at the same endpoint references: the per-branch angle
    // references carry over unchanged.

    ctx.open_model = assemble(g, ctx.open_ref);

    const int dim = 2 * n + m;
    ctx.src_of_ext.resize(dim + 2);
    for (int e = 0; e < n; ++e) ctx.src_of_ext[e] = e;
    ctx.src_of_ext[n] = s;
    for (int e = n + 1; e <= n + m; ++e) ctx.src_of_ext[e] = e - 1;
    const int ubase_ext = (n + 1) + m;
    for (int j = 0; j < n; ++j) ctx.src_of_ext[ubase_ext + j] = n + m + j;
    ctx.src_of_ext[ubase_ext + n] = n + m + s;

    ctx.padded_inv = std::make_shared<PaddedInverse>(std::move(merged_inv), ctx.src_of_ext);
    return ctx;
}

InverseOpPtr open_split(const SplitContext& ctx) {
    {
        const auto conn = connectivity_check(ctx.open_grid);
        if (!conn.connected)
            throw TopologyError("open_split: split islands bus " +
                                std::to_string(conn.islanded_buses.front()));
    }
    const StateIndexer& idx = ctx.open_model.idx;
    const int dim = idx.dim();
    const int a = ctx.busbar_a, b = ctx.busbar_b;

    Eigen::MatrixXd W(dim, 2);
    W.col(0) = idx.mu(a, b).dense(dim);
    W.col(1) = idx.nu(a, b).dense(dim);

    const Eigen::MatrixXd& Mo = ctx.open_model.M;
    const Eigen::MatrixXd Z1 = Mo * W;
    const Eigen::MatrixXd Z2 = Mo.transpose() * W;

    Eigen::MatrixXd GZ1(dim, 2), GtZ2(dim, 2);
    for (int c = 0; c < 2; ++c) {
        GZ1.col(c) = ctx.padded_inv->apply(Eigen::VectorXd(Z1.col(c)));
        GtZ2.col(c) = ctx.padded_inv->apply_transpose(Eigen::VectorXd(Z2.col(c)));
    }

    const Eigen::MatrixXd U = W - GZ1;
    const Eigen::MatrixXd V = W - GtZ2;
    const Eigen::MatrixXd K = W.transpose() * Z1 - Z2.transpose() * GZ1;

    return std::make_shared<RankCorrectedInverse>(ctx.padded_inv, U, V, K);
}

Eigen::VectorXd lift_to_split(const SplitContext& ctx, const Eigen::VectorXd& merged) {
    const int dim = static_cast<int>(ctx.src_of_ext.size());
    Eigen::VectorXd out(dim);
    for (int e = 0; e < dim; ++e) out(e) = merged(ctx.src_of_ext[e]);
    const StateIndexer& idx = ctx.open_model.idx;
    out(idx.angle_coord(ctx.busbar_b)) = 0.0;
    out(idx.u_coord(ctx.busbar_b)) = 0.0;
    return out;
}

Eigen::VectorXd contract_from_split(const SplitContext& ctx, const Eigen::VectorXd& extended) {
    const int dim_m = static_cast<int>(ctx.src_of_ext.size()) - 2;
    const StateIndexer& idx = ctx.open_model.idx;
    const int ab = idx.angle_coord(ctx.busbar_b);
    const int ub = idx.u_coord(ctx.busbar_b);
    Eigen::VectorXd out(dim_m);
    int o = 0;
    for (int e = 0; e < static_cast<int>(ctx.src_of_ext.size()); ++e) {
        if (e == ab || e == ub) continue;
        out(o++) = extended(e);
    }
    return out;
}

}  // namespace dcplus
