#include "dcplus/grid.hpp"

#include <algorithm>
#include <set>

namespace dcplus {

void GridCase::validate() const {
    if (base_mva <= 0.0) throw GridError("base_mva must be positive");
    std::set<int> ids;
    int slack_count = 0;
    for (const auto& b : buses) {
        if (!ids.insert(b.id).second)
            throw GridError("duplicate bus id " + std::to_string(b.id));
        if (b.kind == BusKind::slack) ++slack_count;
        if (b.kind != BusKind::pq && b.v_set <= 0.0)
            throw GridError("bus " + std::to_string(b.id) + ": v_set must be positive");
    }
    if (slack_count == 0) throw GridError("no slack bus");
    if (slack_count > 1) throw GridError("multiple slack buses");
    for (const auto& br : branches) {
        if (!ids.count(br.from_bus))
            throw GridError("unknown bus " + std::to_string(br.from_bus) + " in branch");
        if (!ids.count(br.to_bus))
            throw GridError("unknown bus " + std::to_string(br.to_bus) + " in branch");
        if (br.in_service && br.r == 0.0 && br.x == 0.0)
            throw GridError("branch " + std::to_string(br.from_bus) + "-" +
                            std::to_string(br.to_bus) + ": zero series impedance");
        if (br.tau <= 0.0)
            throw GridError("branch " + std::to_string(br.from_bus) + "-" +
                            std::to_string(br.to_bus) + ": tap ratio must be positive");
    }
    for (const auto& g : gens) {
        if (!ids.count(g.bus)) throw GridError("generator at unknown bus " + std::to_string(g.bus));
    }
}

const BusRecord* GridCase::find_bus(int id) const {
    for (const auto& b : buses)
        if (b.id == id) return &b;
    return nullptr;
}

std::string BranchId::str() const {
    std::string s = std::to_string(from) + "-" + std::to_string(to);
    if (ordinal != 1) s += "#" + std::to_string(ordinal);
    return s;
}

const IndexedBranch* IndexedGrid::find_branch(const BranchId& id) const {
    int k = branch_index(id);
    return k < 0 ? nullptr : &branches[k];
}

int IndexedGrid::branch_index(const BranchId& id) const {
    for (size_t k = 0; k < branches.size(); ++k)
        if (branches[k].id == id) return static_cast<int>(k);
    return -1;
}

IndexedGrid index_grid(const GridCase& grid) {
    grid.validate();

    IndexedGrid g;
    std::vector<const BusRecord*> pq, pv;
    const BusRecord* slack = nullptr;
    for (const auto& b : grid.buses) {
        switch (b.kind) {
            case BusKind::pq: pq.push_back(&b); break;
            case BusKind::pv: pv.push_back(&b); break;
            case BusKind::slack: slack = &b; break;
        }
    }
    auto by_id = [](const BusRecord* a, const BusRecord* b) { return a->id < b->id; };
    std::sort(pq.begin(), pq.end(), by_id);
    std::sort(pv.begin(), pv.end(), by_id);

    g.n = static_cast<int>(pq.size());
    g.m = static_cast<int>(pv.size());
    const int nb = g.bus_count();
    g.bus_ids.resize(nb);
    g.kind.resize(nb);
    g.v_set.assign(nb, 1.0);
    g.g_shunt.assign(nb, 0.0);
    g.b_shunt.assign(nb, 0.0);
    g.base_kv.assign(nb, 0.0);
    g.p_inj = Eigen::VectorXd::Zero(nb);
    g.q_inj = Eigen::VectorXd::Zero(nb);

    std::vector<const BusRecord*> ordered;
    ordered.insert(ordered.end(), pq.begin(), pq.end());
    ordered.insert(ordered.end(), pv.begin(), pv.end());
    ordered.push_back(slack);
    for (int i = 0; i < nb; ++i) {
        const BusRecord& b = *ordered[i];
        g.bus_ids[i] = b.id;
        g.index_of[b.id] = i;
        g.kind[i] = b.kind;
        g.v_set[i] = b.kind == BusKind::pq ? 1.0 : b.v_set;
        g.g_shunt[i] = b.g_shunt;
        g.b_shunt[i] = b.b_shunt;
        g.base_kv[i] = b.base_kv;
        g.p_inj(i) = -b.p_load;
        g.q_inj(i) = -b.q_load;
    }
    for (const auto& gen : grid.gens) {
        if (!gen.in_service) continue;
        int i = g.index_of.at(gen.bus);
        g.p_inj(i) += gen.p_gen;
        g.q_inj(i) += gen.q_gen;
    }

    std::map<std::pair<int, int>, int> seen;
    for (const auto& br : grid.branches) {
        IndexedBranch ib;
        ib.from = g.index_of.at(br.from_bus);
        ib.to = g.index_of.at(br.to_bus);
        ib.r = br.r;
        ib.x = br.x;
        ib.b_charging = br.b_charging;
        ib.tau = br.tau;
        ib.alpha = br.alpha;
        ib.in_service = br.in_service;
        int ord = ++seen[{br.from_bus, br.to_bus}];
        ib.id = BranchId{br.from_bus, br.to_bus, ord};
        g.branches.push_back(ib);
    }
    return g;
}

ConnectivityResult connectivity_check(const IndexedGrid& grid,
                                      const std::vector<int>& removed_branches) {
    const int nb = grid.bus_count();
    std::vector<char> removed(grid.branches.size(), 0);
    for (int k : removed_branches) removed[k] = 1;

    std::vector<std::vector<int>> adj(nb);
    for (size_t k = 0; k < grid.branches.size(); ++k) {
        const auto& br = grid.branches[k];
        if (!br.in_service || removed[k]) continue;
        adj[br.from].push_back(br.to);
        adj[br.to].push_back(br.from);
    }

    std::vector<char> seen(nb, 0);
    std::vector<int> stack = {grid.slack()};
    seen[grid.slack()] = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int v : adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                stack.push_back(v);
            }
    }

    ConnectivityResult res;
    for (int i = 0; i < nb; ++i)
        if (!seen[i]) res.islanded_buses.push_back(grid.bus_ids[i]);
    res.connected = res.islanded_buses.empty();
    return res;
}

}  // namespace dcplus
