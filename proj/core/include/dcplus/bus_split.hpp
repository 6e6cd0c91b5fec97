#pragma once

#include <map>

#include "dcplus/topology.hpp"

namespace dcplus {

/// Closes an ideal switch between two retained nodes f and t: the rank-3
/// update in the infinite-susceptance limit, where the inner bracket loses
/// its identity term. Requires equal reference magnitudes at both ends.
InverseOpPtr close_switch(InverseOpPtr open_inv, const StateIndexer& idx,
                          const ReferenceState& ref, int f, int t, double v_tol = 1e-8);

/// How a bus split distributes the merged bus's connections and injections
/// over the two busbars. Busbar A keeps the original bus id, busbar B is a
/// new PQ bus. Every in-service incident branch must be assigned.
struct SplitAssignment {
    int bus_ext = 0;
    std::map<BranchId, char> branch_busbar;  // 'A' or 'B'
    double p_inj_a = 0.0;                    // net pu injection kept on busbar A
    double q_inj_a = 0.0;                    // remainder goes to busbar B
};

/// Everything needed to evaluate the open-coupler topology: the rewired
/// grid with one extra PQ bus, its directly assembled matrix, and the
/// closed-coupler inverse obtained by padding the merged inverse.
struct SplitContext {
    IndexedGrid open_grid;
    ReferenceState open_ref;
    LinearModel open_model;
    InverseOpPtr padded_inv;        // closed-but-unmerged inverse
    std::vector<int> src_of_ext;    // extended coordinate -> merged coordinate
    int busbar_a = 0;               // internal index in open_grid
    int busbar_b = 0;
    int new_bus_ext = 0;
};

/// Builds the split context from the merged grid: validates the assignment
/// (PQ bus, no shunt, full branch coverage), rewires, assembles the open
/// matrix and pads the merged inverse. The split bus's reference values are
/// copied to both busbars, so theta_hat across the coupler is 0.
SplitContext pad_for_split(const IndexedGrid& merged, const ReferenceState& merged_ref,
                           InverseOpPtr merged_inv, const SplitAssignment& assignment);

/// Open-coupler inverse from the padded closed inverse and the directly
/// assembled open matrix; every term of the update is finite. Throws
/// TopologyError when the split disconnects the grid and
/// SingularMatrixError on a numerically degenerate bracket.
InverseOpPtr open_split(const SplitContext& ctx);

/// Lifts a merged-space vector into the extended space (shared coordinates
/// go to busbar A) and contracts an extended vector back by reading the
/// busbar-A coordinates.
Eigen::VectorXd lift_to_split(const SplitContext& ctx, const Eigen::VectorXd& merged);
Eigen::VectorXd contract_from_split(const SplitContext& ctx, const Eigen::VectorXd& extended);

}  // namespace dcplus
