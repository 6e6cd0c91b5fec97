#pragma once

#include <complex>

#include <Eigen/Dense>

#include "dcplus/ac_state.hpp"
#include "dcplus/grid.hpp"
#include "dcplus/indexing.hpp"

namespace dcplus {

/// Two-port admittance of the pi line model:
///
///   | g_ff + j b_ff   g_ft + j b_ft |   | (ys + ycf)/tau^2        -ys/(tau e^{-j a}) |
///   | g_tf + j b_tf   g_tt + j b_tt | = | -ys/(tau e^{+j a})      ys + yct           |
///
/// with ys = 1/(r + jx) and ycf = yct = j b_charging / 2.
struct PiAdmittance {
    double g_ff = 0, b_ff = 0;
    double g_ft = 0, b_ft = 0;
    double g_tf = 0, b_tf = 0;
    double g_tt = 0, b_tt = 0;

    static PiAdmittance of(const IndexedBranch& br);
    /// From explicit series admittance; used for switch-like branches and
    /// parameter modifications expressed directly in admittance terms.
    static PiAdmittance from_series(double g_s, double b_s, double b_charging, double tau,
                                    double alpha);
};

/// Expansion point of the linearization. Per-bus magnitudes and angles plus
/// a per-branch angle reference: for hot starts the branch reference equals
/// the endpoint difference, for cold starts it is 0 (alpha across PSTs) even
/// though that is not representable as a difference of bus angles.
struct ReferenceState {
    enum class Kind { cold, hot };
    Kind kind = Kind::cold;
    Eigen::VectorXd v_hat;              // per bus
    Eigen::VectorXd theta_hat;          // per bus, slack 0
    Eigen::VectorXd branch_theta_hat;   // per branch, theta_hat_ft
};

ReferenceState cold_ref(const IndexedGrid& grid);
/// Requires a converged state; copies the AC solution as the expansion point.
ReferenceState hot_ref(const IndexedGrid& grid, const ACState& state);

/// The sixteen linearization coefficients of one branch: offsets and the
/// 4x4 coupling of (p_f, p_t, q_f, q_t) to (theta_f, theta_t, u_f, u_t).
/// The angle couplings satisfy m_ptheta_ft = -m_ptheta_ff and
/// m_qtheta_ft = -m_qtheta_ff (and f<->t swapped), so only the diagonal
/// entries are stored.
struct BranchBlock {
    double p_hat_f = 0, p_hat_t = 0, q_hat_f = 0, q_hat_t = 0;
    double m_ptheta_ff = 0, m_ptheta_tt = 0;
    double m_qtheta_ff = 0, m_qtheta_tt = 0;
    double m_pu_ff = 0, m_pu_ft = 0, m_pu_tf = 0, m_pu_tt = 0;
    double m_qu_ff = 0, m_qu_ft = 0, m_qu_tf = 0, m_qu_tt = 0;
};

BranchBlock branch_block(const PiAdmittance& y, double v_hat_f, double v_hat_t,
                         double theta_hat_ft);

/// Shunt linearization: p = p_hat + n_pu * u, q = q_hat + n_qu * u, with no
/// angle coupling. b_shunt is the admittance-to-ground susceptance in the
/// case-file convention (capacitor positive).
struct ShuntBlock {
    double p_hat = 0, q_hat = 0;
    double n_pu = 0, n_qu = 0;
};

ShuntBlock shunt_block(double g_shunt, double b_shunt, double v_hat);

/// Assembled linear load-flow relation (p; q) = (p_hat; q_hat) + M (theta; u).
/// M is dense of dimension 2n+m; rows/columns for the slack angle and for
/// PV/slack voltages are absent. At a converged hot-start reference, M is
/// the Jacobian of the AC load-flow equations.
struct LinearModel {
    Eigen::MatrixXd M;
    Eigen::VectorXd p_hat;  // length n+m
    Eigen::VectorXd q_hat;  // length n
    ReferenceState ref;
    StateIndexer idx;
};

LinearModel assemble(const IndexedGrid& grid, const ReferenceState& ref);

/// Scatter helpers, exposed so tests can verify assembly linearity.
void scatter_branch(const StateIndexer& idx, int from, int to, const BranchBlock& blk,
                    Eigen::MatrixXd& M, Eigen::VectorXd& p_hat, Eigen::VectorXd& q_hat);
void scatter_shunt(const StateIndexer& idx, int bus, const ShuntBlock& blk, Eigen::MatrixXd& M,
                   Eigen::VectorXd& p_hat, Eigen::VectorXd& q_hat);

}  // namespace dcplus
