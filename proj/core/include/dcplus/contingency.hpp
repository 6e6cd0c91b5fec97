#pragma once

#include "dcplus/ac_solver.hpp"
#include "dcplus/topology.hpp"

namespace dcplus {

/// Per-outage comparison of the voltage-sensitive linear model and the
/// plain DC baseline against the AC oracle. Error vectors are over internal
/// bus indices; injection errors are meaningful only where injections are
/// outputs (P at the slack, Q at slack and PV buses) and NaN elsewhere.
struct OutageRecord {
    BranchId branch;
    int branch_index = -1;
    bool feasible = false;       // outage does not island the grid
    bool ac_converged = false;   // oracle solved the post-outage grid
    Eigen::VectorXd dv_dcplus;
    Eigen::VectorXd dtheta_dcplus;
    Eigen::VectorXd dp_dcplus;
    Eigen::VectorXd dq_dcplus;
    Eigen::VectorXd dtheta_dc;
    Eigen::VectorXd dp_dc;
    // Oracle-side values, kept for normalized error statistics and reports.
    Eigen::VectorXd v_ac;
    Eigen::VectorXd theta_ac;
    Eigen::VectorXd p_ac;
    Eigen::VectorXd q_ac;
};

struct N1Options {
    double ac_tol = 1e-8;
    int ac_max_iter = 30;
};

struct N1Result {
    std::vector<OutageRecord> records;  // sorted by branch identity
    int infeasible_count = 0;
    int ac_diverged_count = 0;
};

/// Scans every in-service branch outage: connectivity check, low-rank
/// update for the linear model, from-scratch DC solve on the reduced grid,
/// and a warm-started AC oracle solve. Deterministic: fixed order, fixed
/// warm starts.
N1Result n1_scan(const IndexedGrid& grid, const LinearModel& model, InverseOpPtr base_inv,
                 const LinState& base_state, const ACState& base_ac, const N1Options& opts = {});

enum class Quantity { v, theta, p, q };
enum class Method { dcplus, dc };

/// Pooled absolute errors over all (outage, bus) pairs with a cumulative
/// fraction per value. Throws GridError when the pool is empty.
struct ErrorCdf {
    std::vector<double> abs_error;     // sorted ascending
    std::vector<double> cum_fraction;  // nondecreasing, last is 1

    double quantile(double q) const;   // 0 <= q <= 1
    double median() const { return quantile(0.5); }
};

ErrorCdf error_cdf(const std::vector<OutageRecord>& records, Quantity quantity, Method method);

/// Pooled AC-side values of a quantity over the same (outage, bus) pairs
/// that enter the corresponding error pool; used to normalize error medians
/// by the spread of the underlying quantity.
std::vector<double> pooled_ac_values(const std::vector<OutageRecord>& records,
                                     Quantity quantity);

}  // namespace dcplus
