#pragma once

#include "dcplus/ac_solver.hpp"
#include "dcplus/inverse_op.hpp"
#include "dcplus/linear_model.hpp"

namespace dcplus {

/// Solution of the linearized equations: angles for non-slack buses and
/// relative voltage deviations for PQ buses.
struct LinState {
    Eigen::VectorXd theta;  // length n+m
    Eigen::VectorXd u;      // length n
};

/// Net specified injections in solver layout: p over PQ+PV, q over PQ.
struct Injections {
    Eigen::VectorXd p;
    Eigen::VectorXd q;
};

Injections grid_injections(const IndexedGrid& grid);

/// Stacks (theta; u) into one state-space vector and back.
Eigen::VectorXd pack_state(const StateIndexer& idx, const LinState& st);
LinState unpack_state(const StateIndexer& idx, const Eigen::VectorXd& x);

/// (theta; u) = M^{-1} ((p; q) - (p_hat; q_hat)); the slack angle is 0 by
/// construction.
LinState solve(const LinearModel& model, const InverseOp& minv, const Injections& inj);

/// Classic DC approximation: lossless network, unit voltages, susceptances
/// 1/(x tau), phase shifts as fixed injections.
struct DcResult {
    Eigen::VectorXd theta;             // per bus, slack 0
    std::vector<double> flow;          // per branch, from -> to
};

DcResult dc_solve(const IndexedGrid& grid, const Eigen::VectorXd& p_inj);

/// Reduced DC susceptance matrix over non-slack buses plus the per-branch
/// susceptances; building block for DC solves and for classical LODF
/// computations independent of the voltage-sensitive model.
struct DcSystem {
    Eigen::MatrixXd B;                 // (n+m) x (n+m)
    std::vector<double> beta;          // per branch, 0 when out of service
};

DcSystem dc_susceptance(const IndexedGrid& grid);

struct RecoverOptions {
    /// Re-evaluate the nonlinear branch relation at the recovered state
    /// instead of the linearized one.
    bool nonlinear_flows = false;
};

/// Physical quantities at a linear-model state: bus voltages v_hat (1 + u),
/// branch flows from the linearized branch relation, and nodal injections
/// summed from those flows (the slack P, Q and PV-bus Q outputs).
struct Recovered {
    Eigen::VectorXd v;       // per bus
    Eigen::VectorXd theta;   // per bus, slack 0
    Eigen::VectorXd p_bus;   // per bus, from recovered flows + shunts
    Eigen::VectorXd q_bus;
    std::vector<BranchFlow> flows;
};

Recovered recover(const IndexedGrid& grid, const LinearModel& model, const LinState& st,
                  const RecoverOptions& opts = {});

/// Sensitivity of the state to a unit injection at a bus: M^{-1} eta_bus for
/// real power, M^{-1} zeta_bus for reactive power. The voltage-sensitive
/// generalization of a PTDF column; reactive sensitivities exist only at PQ
/// buses.
LinState injection_sensitivity(const LinearModel& model, const InverseOp& minv, int bus,
                               bool reactive = false);

/// Debug dump of the assembled model: nonzero M entries as row,col,value
/// triplets followed by the offset vectors, for cross-tool diffing.
std::string model_to_csv(const LinearModel& model);

}  // namespace dcplus
