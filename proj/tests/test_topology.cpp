#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dcplus/ac_solver.hpp"
#include "dcplus/linear_solver.hpp"
#include "dcplus/topology.hpp"
#include "test_util.hpp"

using namespace dcplus;
using namespace dcplus::testutil;

namespace {

struct Fixture {
    IndexedGrid grid;
    ACState ac;
    ReferenceState ref;
    LinearModel model;
    InverseOpPtr minv;
    LinState base;
};

Fixture hot_case14() {
    Fixture f;
    f.grid = load_grid("case14.m");
    AcOptions opts;
    opts.tol = 1e-12;
    f.ac = ac_solve(f.grid, opts);
    REQUIRE(f.ac.converged);
    f.ref = hot_ref(f.grid, f.ac);
    f.model = assemble(f.grid, f.ref);
    f.minv = factor(f.model.M);
    f.base = solve(f.model, *f.minv, grid_injections(f.grid));
    return f;
}

double handle_vs_dense(const InverseOp& handle, const Eigen::MatrixXd& M, std::mt19937_64& rng,
                       int trials = 20) {
    const Eigen::MatrixXd dense = M.inverse();
    const Eigen::MatrixXd denseT = M.transpose().inverse();
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const Eigen::VectorXd x = random_vector(static_cast<int>(M.rows()), rng);
        const Eigen::VectorXd b = dense * x;
        worst = std::max(worst, (handle.apply(x) - b).lpNorm<Eigen::Infinity>() /
                                    b.lpNorm<Eigen::Infinity>());
        const Eigen::VectorXd bt = denseT * x;
        worst = std::max(worst, (handle.apply_transpose(x) - bt).lpNorm<Eigen::Infinity>() /
                                    bt.lpNorm<Eigen::Infinity>());
    }
    return worst;
}

}  // namespace

TEST_CASE("identity modification produces an empty update") {
    Fixture f = hot_case14();
    const LowRankUpdate upd =
        branch_delta(f.grid, f.ref, 0, BranchParams::of(f.grid.branches[0]));
    CHECK(upd.empty());
    CHECK(upd.delta_m_dense().cwiseAbs().maxCoeff() == 0.0);
    InverseOpPtr same = woodbury_update(f.minv, upd);
    CHECK(same.get() == f.minv.get());  // pass-through
}

TEST_CASE("outage deltas reproduce the assembled matrix difference") {
    Fixture f = hot_case14();
    for (const BranchId id : {BranchId{1, 2, 1}, BranchId{4, 7, 1}, BranchId{7, 8, 1}}) {
        const int k = f.grid.branch_index(id);
        const LowRankUpdate upd = outage_delta(f.grid, f.ref, k);
        CHECK(upd.rank() == 3);
        IndexedGrid reduced = f.grid;
        reduced.branches[k].in_service = false;
        const LinearModel rebuilt = assemble(reduced, f.ref);
        const Eigen::MatrixXd diff = rebuilt.M - (f.model.M + upd.delta_m_dense());
        CHECK(diff.cwiseAbs().maxCoeff() <= 1e-12);
        // offset deltas match as well
        Eigen::VectorXd dp = Eigen::VectorXd::Zero(f.model.idx.dim());
        upd.dp_hat.add_to(dp);
        upd.dq_hat.add_to(dp);
        for (int i = 0; i < f.grid.n + f.grid.m; ++i)
            CHECK(std::abs(f.model.p_hat(i) + dp(i) - rebuilt.p_hat(i)) <= 1e-12);
        for (int i = 0; i < f.grid.n; ++i)
            CHECK(std::abs(f.model.q_hat(i) + dp(f.grid.n + f.grid.m + i) - rebuilt.q_hat(i)) <=
                  1e-12);
    }
}

TEST_CASE("PST angle change is a rank-3 update agreeing with a rebuild") {
    IndexedGrid grid = index_grid(parse_matpower(pst_ring_text()));
    AcOptions opts;
    ACState ac = ac_solve(grid, opts);
    REQUIRE(ac.converged);
    ReferenceState ref = hot_ref(grid, ac);
    LinearModel model = assemble(grid, ref);
    InverseOpPtr minv = factor(model.M);

    BranchParams next = BranchParams::of(grid.branches[1]);
    next.alpha += 0.05;
    const LowRankUpdate upd = branch_delta(grid, ref, 1, next);
    CHECK(upd.rank() == 3);

    IndexedGrid modified = grid;
    modified.branches[1].alpha = next.alpha;
    const LinearModel rebuilt = assemble(modified, ref);
    CHECK((rebuilt.M - (model.M + upd.delta_m_dense())).cwiseAbs().maxCoeff() <= 1e-12);

    std::mt19937_64 rng(17);
    InverseOpPtr handle = woodbury_update(minv, upd);
    CHECK(handle_vs_dense(*handle, rebuilt.M, rng) <= 1e-10);
}

TEST_CASE("every non-islanding single outage matches dense re-inversion") {
    Fixture f = hot_case14();
    std::mt19937_64 rng(23);
    for (size_t k = 0; k < f.grid.branches.size(); ++k) {
        if (!connectivity_check(f.grid, {static_cast<int>(k)}).connected) continue;
        const LowRankUpdate upd = outage_delta(f.grid, f.ref, static_cast<int>(k));
        const InverseOpPtr handle = woodbury_update(f.minv, upd);
        IndexedGrid reduced = f.grid;
        reduced.branches[k].in_service = false;
        const LinearModel rebuilt = assemble(reduced, f.ref);
        CHECK(handle_vs_dense(*handle, rebuilt.M, rng) <= 1e-8);
    }
}

TEST_CASE("islanding outage signals a singular inner matrix") {
    Fixture f = hot_case14();
    const int bridge = f.grid.branch_index(BranchId{7, 8, 1});
    const LowRankUpdate upd = outage_delta(f.grid, f.ref, bridge);
    CHECK_THROWS_AS(woodbury_update(f.minv, upd), SingularMatrixError);
}

TEST_CASE("state deltas: zero update and rebuild equivalence") {
    Fixture f = hot_case14();
    LowRankUpdate none;
    none.dim = f.model.idx.dim();
    const LinState zero = state_delta(f.model, *f.minv, none, f.base);
    CHECK(zero.theta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(zero.u.cwiseAbs().maxCoeff() == 0.0);

    const int k = f.grid.branch_index(BranchId{2, 3, 1});
    const LowRankUpdate upd = outage_delta(f.grid, f.ref, k);
    const InverseOpPtr updated = woodbury_update(f.minv, upd);
    const LinState d = state_delta(f.model, *updated, upd, f.base);

    IndexedGrid reduced = f.grid;
    reduced.branches[k].in_service = false;
    const LinearModel m2 = assemble(reduced, f.ref);
    const LinState fresh = solve(m2, FactoredInverse(m2.M), grid_injections(f.grid));
    CHECK((f.base.theta + d.theta - fresh.theta).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((f.base.u + d.u - fresh.u).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("multiple branch modifications") {
    Fixture f = hot_case14();
    const int k1 = f.grid.branch_index(BranchId{1, 5, 1});
    const int k2 = f.grid.branch_index(BranchId{2, 4, 1});

    // k = 1 reduces to branch_delta
    const LowRankUpdate single = multi_branch_delta(f.grid, f.ref, {{k1, BranchParams::outage()}});
    const LowRankUpdate direct = outage_delta(f.grid, f.ref, k1);
    CHECK((single.delta_m_dense() - direct.delta_m_dense()).cwiseAbs().maxCoeff() == 0.0);

    const LowRankUpdate upd = multi_branch_delta(
        f.grid, f.ref, {{k1, BranchParams::outage()}, {k2, BranchParams::outage()}});
    CHECK(upd.rank() == 6);
    const InverseOpPtr updated = woodbury_update(f.minv, upd);
    const LinState d = state_delta(f.model, *updated, upd, f.base);

    IndexedGrid reduced = f.grid;
    reduced.branches[k1].in_service = false;
    reduced.branches[k2].in_service = false;
    const LinearModel m2 = assemble(reduced, f.ref);
    const LinState fresh = solve(m2, FactoredInverse(m2.M), grid_injections(f.grid));
    CHECK((f.base.theta + d.theta - fresh.theta).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((f.base.u + d.u - fresh.u).cwiseAbs().maxCoeff() <= 1e-10);

    // islanding pair
    const int kb = f.grid.branch_index(BranchId{7, 8, 1});
    const int k3 = f.grid.branch_index(BranchId{9, 14, 1});
    const LowRankUpdate bad = multi_branch_delta(
        f.grid, f.ref, {{kb, BranchParams::outage()}, {k3, BranchParams::outage()}});
    CHECK_THROWS_AS(woodbury_update(f.minv, bad), SingularMatrixError);

    CHECK_THROWS_AS(multi_branch_delta(f.grid, f.ref,
                                       {{k1, BranchParams::outage()},
                                        {k1, BranchParams::outage()}}),
                    GridError);
}

TEST_CASE("zero line modification gives a zero distribution factor") {
    Fixture f = hot_case14();
    const Eigen::Matrix2d l = lmdf(f.model, *f.minv, f.grid, 5, 2, LineMod{0.0, 0.0});
    CHECK(l.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("an islanding modification makes the factor gate singular") {
    Fixture f = hot_case14();
    const int bridge = f.grid.branch_index(BranchId{7, 8, 1});
    CHECK_THROWS_AS(lmdf(f.model, *f.minv, f.grid, 0, bridge,
                         LineMod::outage_of(f.grid.branches[bridge])),
                    SingularMatrixError);
}

TEST_CASE("distribution factors agree with the state-delta path on every pair") {
    Fixture f = hot_case14();
    const int bridge = f.grid.branch_index(BranchId{7, 8, 1});
    for (size_t mod = 0; mod < f.grid.branches.size(); ++mod) {
        if (static_cast<int>(mod) == bridge) continue;
        const LineMod lm = LineMod::outage_of(f.grid.branches[mod]);
        const LmdfEngine engine(f.model, *f.minv, f.grid, static_cast<int>(mod), lm);
        const LowRankUpdate upd = line_mod_delta(f.grid, f.ref, static_cast<int>(mod), lm);
        const InverseOpPtr updated = woodbury_update(f.minv, upd);
        CHECK(upd.rank() == 2);
        const LinState d = state_delta(f.model, *updated, upd, f.base);
        for (size_t mon = 0; mon < f.grid.branches.size(); ++mon) {
            const Eigen::Vector2d via_factor = engine.deltas_for(static_cast<int>(mon), f.base);
            const Eigen::Vector2d via_state = branch_state_diff(
                f.model.idx, d, f.grid.branches[mon].from, f.grid.branches[mon].to);
            CHECK((via_factor - via_state).lpNorm<Eigen::Infinity>() <= 1e-10);
        }
    }
}

TEST_CASE("classical DC outage factors emerge on a lossless unit-voltage grid") {
    GridCase gc = load_case("case14.m");
    for (auto& br : gc.branches) {
        br.r = 0.0;
        br.b_charging = 0.0;
        br.tau = 1.0;
        br.alpha = 0.0;
    }
    for (auto& b : gc.buses) {
        b.v_set = 1.0;
        b.g_shunt = 0.0;
        b.b_shunt = 0.0;
    }
    for (auto& g : gc.gens) g.v_set = 1.0;
    IndexedGrid grid = index_grid(gc);
    LinearModel model = assemble(grid, cold_ref(grid));
    InverseOpPtr minv = factor(model.M);

    const DcSystem sys = dc_susceptance(grid);
    const Eigen::MatrixXd Binv = sys.B.inverse();
    const StateIndexer bidx(grid.n + grid.m, 0);  // selectors over the angle block only

    const int bridge = grid.branch_index(BranchId{7, 8, 1});
    int pairs = 0;
    for (size_t ft = 0; ft < grid.branches.size(); ++ft) {
        if (static_cast<int>(ft) == bridge) continue;
        const auto& fbr = grid.branches[ft];
        const LineMod lm = LineMod::outage_of(fbr);
        CHECK(lm.dg_s == 0.0);
        const LmdfEngine engine(model, *minv, grid, static_cast<int>(ft), lm);
        const Eigen::VectorXd mu_ft = bidx.mu(fbr.from, fbr.to).dense(grid.n + grid.m);
        const double a_ff = mu_ft.dot(Binv * mu_ft);
        for (size_t kl = 0; kl < grid.branches.size(); ++kl) {
            const auto& kbr = grid.branches[kl];
            const Eigen::VectorXd mu_kl = bidx.mu(kbr.from, kbr.to).dense(grid.n + grid.m);
            const double a_kl = mu_kl.dot(Binv * mu_ft);
            const double lodf =
                sys.beta[kl] * a_kl / (1.0 - sys.beta[ft] * a_ff);
            const double via_lmdf = engine.factor_for(static_cast<int>(kl))(0, 0) *
                                    sys.beta[kl] / sys.beta[ft];
            CHECK(std::abs(lodf - via_lmdf) <= 1e-6);
            ++pairs;
        }
    }
    CHECK(pairs == 19 * 20);
}

TEST_CASE("uniform angle shifts leave factors and deltas unchanged") {
    Fixture f = hot_case14();
    ReferenceState shifted = f.ref;
    shifted.theta_hat.array() += 0.1;  // branch references stay differences
    const LinearModel model2 = assemble(f.grid, shifted);
    CHECK((model2.M - f.model.M).cwiseAbs().maxCoeff() <= 1e-12);
    InverseOpPtr minv2 = factor(model2.M);

    const int mod = f.grid.branch_index(BranchId{2, 4, 1});
    const LineMod lm = LineMod::outage_of(f.grid.branches[mod]);
    const Eigen::Matrix2d a = lmdf(f.model, *f.minv, f.grid, 5, mod, lm);
    const Eigen::Matrix2d b = lmdf(model2, *minv2, f.grid, 5, mod, lm);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);

    const LowRankUpdate u1 = outage_delta(f.grid, f.ref, mod);
    const LowRankUpdate u2 = outage_delta(f.grid, shifted, mod);
    const LinState d1 = state_delta(f.model, *woodbury_update(f.minv, u1), u1, f.base);
    const LinState d2 = state_delta(model2, *woodbury_update(minv2, u2), u2, f.base);
    CHECK((d1.theta - d2.theta).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((d1.u - d2.u).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("admissibility warnings are emitted but not fatal") {
    Fixture f = hot_case14();
    const int mod = f.grid.branch_index(BranchId{2, 3, 1});  // large angle spread
    std::vector<std::string> warnings;
    lmdf(f.model, *f.minv, f.grid, 0, mod, LineMod::outage_of(f.grid.branches[mod]), {},
         &warnings);
    CHECK(!warnings.empty());

    LmdfOptions loose;
    loose.theta_tol = 1.0;
    loose.v_tol = 1.0;
    warnings.clear();
    lmdf(f.model, *f.minv, f.grid, 0, mod, LineMod::outage_of(f.grid.branches[mod]), loose,
         &warnings);
    CHECK(warnings.empty());
}

TEST_CASE("update handles compose and report their depth") {
    Fixture f = hot_case14();
    const int k1 = f.grid.branch_index(BranchId{6, 11, 1});
    const int k2 = f.grid.branch_index(BranchId{9, 14, 1});
    const LowRankUpdate u1 = outage_delta(f.grid, f.ref, k1);
    InverseOpPtr h1 = woodbury_update(f.minv, u1);

    IndexedGrid reduced1 = f.grid;
    reduced1.branches[k1].in_service = false;
    const LowRankUpdate u2 = outage_delta(reduced1, f.ref, k2);
    InverseOpPtr h2 = woodbury_update(h1, u2);
    CHECK(f.minv->depth() == 0);
    CHECK(h1->depth() == 1);
    CHECK(h2->depth() == 2);

    IndexedGrid reduced2 = reduced1;
    reduced2.branches[k2].in_service = false;
    const LinearModel rebuilt = assemble(reduced2, f.ref);
    std::mt19937_64 rng(31);
    CHECK(handle_vs_dense(*h2, rebuilt.M, rng) <= 1e-8);

    // compacting replaces the stack with a fresh factorization
    InverseOpPtr flat = compact(rebuilt.M);
    CHECK(flat->depth() == 0);
    const Eigen::VectorXd x = random_vector(f.model.idx.dim(), rng);
    CHECK((flat->apply(x) - h2->apply(x)).cwiseAbs().maxCoeff() <= 1e-8);
}
