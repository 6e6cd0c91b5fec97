#pragma once

#include <optional>

#include "dcplus/ac_state.hpp"
#include "dcplus/grid.hpp"

namespace dcplus {

struct BranchFlow {
    double p_f = 0, q_f = 0, p_t = 0, q_t = 0;
};

struct AcOptions {
    double tol = 1e-8;             // max |mismatch| in pu
    int max_iter = 30;
    std::optional<ACState> warm;   // flat start when absent
};

/// Full Newton-Raphson AC load flow in polar form. PV buses hold v = v_set
/// and p fixed, the slack holds v and theta fixed; no reactive limits, no
/// controllers. Returns converged = false with diagnostics rather than a
/// partial state accepted as converged. Throws GridError on an islanded grid.
ACState ac_solve(const IndexedGrid& grid, const AcOptions& opts = {});

/// Nonlinear branch power injections at both ends (zero for out-of-service
/// branches), evaluated from the pi model at the given state.
std::vector<BranchFlow> branch_flows(const IndexedGrid& grid, const Eigen::VectorXd& v,
                                     const Eigen::VectorXd& theta);

inline std::vector<BranchFlow> branch_flows(const IndexedGrid& grid, const ACState& st) {
    return branch_flows(grid, st.v, st.theta);
}

/// Net nodal injections implied by a state: per-bus sum of branch flows plus
/// shunt consumption. The independent evaluation path behind the Newton
/// mismatches and the finite-difference Jacobian oracle.
void computed_injections(const IndexedGrid& grid, const Eigen::VectorXd& v,
                         const Eigen::VectorXd& theta, Eigen::VectorXd& p_out,
                         Eigen::VectorXd& q_out);

}  // namespace dcplus
