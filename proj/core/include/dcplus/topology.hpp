#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dcplus/inverse_op.hpp"
#include "dcplus/linear_model.hpp"
#include "dcplus/linear_solver.hpp"

namespace dcplus {

/// Replacement pi parameters for a branch modification. in_service = false
/// removes the branch (an outage); a changed alpha models a PST move.
struct BranchParams {
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;
    double tau = 1.0;
    double alpha = 0.0;
    bool in_service = true;

    static BranchParams of(const IndexedBranch& br) {
        return {br.r, br.x, br.b_charging, br.tau, br.alpha, br.in_service};
    }
    static BranchParams outage() { return {0, 0, 0, 1.0, 0, false}; }
};

/// Factored matrix change Delta M = S R plus the offset deltas. S columns
/// and R rows are sparse combinations of eta/zeta selectors; rank is 3 per
/// modified branch (2 for the simplified line modification).
struct LowRankUpdate {
    std::vector<SparseVec> s_cols;   // rank entries
    std::vector<SparseVec> r_rows;
    SparseVec dp_hat;                // state-space positions (angle rows)
    SparseVec dq_hat;                // state-space positions (u rows)
    int dim = 0;

    int rank() const { return static_cast<int>(s_cols.size()); }
    Eigen::MatrixXd S_dense() const;
    Eigen::MatrixXd R_dense() const;
    Eigen::MatrixXd delta_m_dense() const;  // S R, for small-grid checks
    bool empty() const;
};

/// Rank-3 update for replacing the parameters of one branch, with the
/// expansion point held fixed. The rebuild oracle for this update is
/// assemble(modified grid, same reference).
LowRankUpdate branch_delta(const IndexedGrid& grid, const ReferenceState& ref, int branch,
                           const BranchParams& next);

inline LowRankUpdate outage_delta(const IndexedGrid& grid, const ReferenceState& ref,
                                  int branch) {
    return branch_delta(grid, ref, branch, BranchParams::outage());
}

/// Rank-3k concatenation for k simultaneous branch modifications.
LowRankUpdate multi_branch_delta(const IndexedGrid& grid, const ReferenceState& ref,
                                 const std::vector<std::pair<int, BranchParams>>& mods);

/// Series admittance change of an ordinary line (the simplified
/// modification behind the 2x2 distribution factors). A full outage is
/// dg = -g_s, db = -b_s.
struct LineMod {
    double dg_s = 0.0;
    double db_s = 0.0;

    static LineMod outage_of(const IndexedBranch& br);
};

/// Rank-2 update (mu nu) D (mu; nu)^T for a simplified line modification;
/// offsets do not change.
LowRankUpdate line_mod_delta(const IndexedGrid& grid, const ReferenceState& ref, int branch,
                             const LineMod& mod);

/// The 2x2 coupling D = v_f v_t [(-db, +dg); (-dg, -db)].
Eigen::Matrix2d line_mod_d(const IndexedGrid& grid, const ReferenceState& ref, int branch,
                           const LineMod& mod);

/// (M + Delta M)^{-1} as a handle over the base inverse; only the rank x
/// rank inner system is solved. Throws SingularMatrixError when the update
/// is topologically degenerate (for instance an islanding outage).
InverseOpPtr woodbury_update(InverseOpPtr base, const LowRankUpdate& upd);

/// Replaces a deep correction stack (see InverseOp::depth) by a fresh
/// factorization of the directly assembled matrix of the modified grid.
inline InverseOpPtr compact(const Eigen::MatrixXd& modified_m) { return factor(modified_m); }

/// State change (psi; sigma) = -(M + Delta M)^{-1} [(dp_hat; dq_hat) +
/// Delta M (theta; u)] for a base state solving the unmodified equations.
LinState state_delta(const LinearModel& model, const InverseOp& updated_inv,
                     const LowRankUpdate& upd, const LinState& base);

struct LmdfOptions {
    double theta_tol = 0.05;  // rad; warn when |theta_hat_ft| exceeds this
    double v_tol = 0.02;      // pu; warn when |v_f - v_t| exceeds this
};

/// Line modification distribution factors for one modified branch,
/// reusable across monitored branches (the two base solves are shared).
class LmdfEngine {
  public:
    LmdfEngine(const LinearModel& model, const InverseOp& minv, const IndexedGrid& grid,
               int modified_branch, const LineMod& mod, const LmdfOptions& opts = {},
               std::vector<std::string>* warnings = nullptr);

    /// 2x2 factor mapping (theta_f - theta_t, u_f - u_t) of the modified
    /// branch to (psi_k - psi_l, sigma_k - sigma_l) of the monitored one.
    Eigen::Matrix2d factor_for(int monitored_branch) const;

    /// Monitored-branch deltas predicted from the base state.
    Eigen::Vector2d deltas_for(int monitored_branch, const LinState& base) const;

  private:
    const IndexedGrid& grid_;
    StateIndexer idx_;
    int f_, t_;
    Eigen::Matrix2d d_;
    Eigen::Matrix2d inner_d_;    // (1 + D A_ff)^{-1} D
    Eigen::VectorXd minv_mu_, minv_nu_;
};

/// One-shot convenience over LmdfEngine.
Eigen::Matrix2d lmdf(const LinearModel& model, const InverseOp& minv, const IndexedGrid& grid,
                     int monitored_branch, int modified_branch, const LineMod& mod,
                     const LmdfOptions& opts = {}, std::vector<std::string>* warnings = nullptr);

/// (theta_f - theta_t, u_f - u_t) of a branch at a given state.
Eigen::Vector2d branch_state_diff(const StateIndexer& idx, const LinState& st, int from, int to);

}  // namespace dcplus
