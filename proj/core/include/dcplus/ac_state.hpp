#pragma once

#include <Eigen/Dense>

namespace dcplus {

/// Solved (or attempted) AC operating point. Vectors are over internal bus
/// indices including the slack; the slack angle is 0 by construction.
struct ACState {
    Eigen::VectorXd v;      // magnitudes, pu
    Eigen::VectorXd theta;  // rad
    double p_slack = 0.0;
    double q_slack = 0.0;
    Eigen::VectorXd q_pv;   // reactive injections at PV buses, pu
    bool converged = false;
    double max_mismatch = 0.0;
    int iterations = 0;
};

}  // namespace dcplus
