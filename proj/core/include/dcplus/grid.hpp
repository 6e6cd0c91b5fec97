#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcplus/errors.hpp"

namespace dcplus {

enum class BusKind { pq, pv, slack };

/// One bus row of a case file. Powers in pu on the system base, shunt
/// admittance in pu, v_set meaningful for PV and slack buses.
struct BusRecord {
    int id = 0;
    BusKind kind = BusKind::pq;
    double p_load = 0.0;
    double q_load = 0.0;
    double g_shunt = 0.0;
    double b_shunt = 0.0;
    double v_set = 1.0;
    double base_kv = 0.0;

    bool operator==(const BusRecord&) const = default;
};

/// One branch row: series impedance r + jx, total line charging b_charging,
/// tap ratio tau on the from side, phase shift alpha in rad.
struct BranchRecord {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;
    double tau = 1.0;
    double alpha = 0.0;
    bool in_service = true;

    bool operator==(const BranchRecord&) const = default;
};

struct GenRecord {
    int bus = 0;
    double p_gen = 0.0;  // pu
    double q_gen = 0.0;  // pu
    double v_set = 1.0;
    bool in_service = true;

    bool operator==(const GenRecord&) const = default;
};

/// Parsed network. Validation enforces referential integrity, a unique slack
/// and a positive power base; it does not solve anything.
struct GridCase {
    std::string name;
    double base_mva = 100.0;
    std::vector<BusRecord> buses;
    std::vector<BranchRecord> branches;
    std::vector<GenRecord> gens;

    /// Throws GridError on a broken invariant.
    void validate() const;

    const BusRecord* find_bus(int id) const;

    bool operator==(const GridCase&) const = default;
};

/// Stable branch identity: endpoints as written plus a 1-based ordinal among
/// branches with the same ordered endpoint pair. Decoupled from row order.
struct BranchId {
    int from = 0;
    int to = 0;
    int ordinal = 1;

    auto operator<=>(const BranchId&) const = default;
    std::string str() const;
};

struct IndexedBranch {
    int from = 0;  // internal bus index
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;
    double tau = 1.0;
    double alpha = 0.0;
    bool in_service = true;
    BranchId id;  // external identity
};

/// Network with the PQ/PV/slack internal ordering applied. Internal bus
/// indices are 0-based: PQ buses 0..n-1, PV buses n..n+m-1, slack n+m.
/// Injections are net specified powers (generation minus load) in pu.
struct IndexedGrid {
    int n = 0;  // PQ count
    int m = 0;  // PV count
    std::vector<int> bus_ids;       // internal index -> external id
    std::map<int, int> index_of;    // external id -> internal index
    std::vector<BusKind> kind;      // by internal index
    std::vector<double> v_set;      // PV/slack setpoints, 1.0 for PQ
    std::vector<double> g_shunt;    // pu
    std::vector<double> b_shunt;    // pu, capacitor positive
    std::vector<double> base_kv;    // 0 when absent
    Eigen::VectorXd p_inj;          // net pu, all buses
    Eigen::VectorXd q_inj;
    std::vector<IndexedBranch> branches;

    int bus_count() const { return n + m + 1; }
    int slack() const { return n + m; }
    bool is_pq(int i) const { return i < n; }
    bool is_pv(int i) const { return i >= n && i < n + m; }

    const IndexedBranch* find_branch(const BranchId& id) const;
    int branch_index(const BranchId& id) const;  // -1 when absent
};

/// Orders buses PQ first, then PV, then slack, ascending external id within
/// each group, and folds generator records into net injections.
IndexedGrid index_grid(const GridCase& grid);

struct ConnectivityResult {
    bool connected = true;
    std::vector<int> islanded_buses;  // external ids of the component without the slack
};

/// Graph connectivity over in-service branches minus `removed_branches`
/// (indices into grid.branches).
ConnectivityResult connectivity_check(const IndexedGrid& grid,
                                      const std::vector<int>& removed_branches = {});

}  // namespace dcplus
