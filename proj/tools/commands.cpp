#include "commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dcplus/ac_solver.hpp"
#include "dcplus/bus_split.hpp"
#include "dcplus/contingency.hpp"
#include "dcplus/linear_solver.hpp"
#include "dcplus/matpower.hpp"
#include "dcplus/topology.hpp"
#include "table.hpp"

namespace dcplus::tools {

namespace {

using nlohmann::ordered_json;
constexpr double kRad2Deg = 57.29577951308232;

struct Session {
    GridCase gc;
    IndexedGrid grid;
    ACState ac;
    ReferenceState ref;
    LinearModel model;
    InverseOpPtr minv;
    LinState base;
};

GridCase load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("case not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_matpower(ss.str());
}

Session open_session(const CommonArgs& args) {
    Session s;
    s.gc = load_case(args.case_path);
    s.grid = index_grid(s.gc);
    AcOptions opts;
    opts.tol = args.tol;
    s.ac = ac_solve(s.grid, opts);
    if (args.ref == "hot") {
        if (!s.ac.converged)
            throw ConvergenceError("AC load flow did not converge (max mismatch " +
                                   format_number(s.ac.max_mismatch) + " pu)");
        s.ref = hot_ref(s.grid, s.ac);
    } else {
        s.ref = cold_ref(s.grid);
    }
    s.model = assemble(s.grid, s.ref);
    s.minv = factor(s.model.M);
    s.base = solve(s.model, *s.minv, grid_injections(s.grid));
    return s;
}

BranchId parse_branch_id(const std::string& text) {
    BranchId id;
    char extra;
    const int n = std::sscanf(text.c_str(), "%d,%d,%d%c", &id.from, &id.to, &id.ordinal, &extra);
    if (n == 2) {
        id.ordinal = 1;
        return id;
    }
    if (n == 3) return id;
    throw ParseError("expected branch as from,to[,ordinal]: '" + text + "'");
}

void write_json(const std::string& path, const ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    out << j.dump(1) << '\n';
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
}

/// Rebuild-oracle suite: every handle must match dense re-inversion of the
/// directly assembled modified matrix on random vectors.
int selftest(const Session& s, const CommonArgs& args) {
    std::mt19937_64 rng(args.seed);
    std::normal_distribution<double> nd;
    const int dim = s.model.idx.dim();

    auto rel_err = [&](const InverseOp& handle, const Eigen::MatrixXd& rebuilt) {
        const Eigen::MatrixXd dense_inv = rebuilt.inverse();
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            Eigen::VectorXd x(dim);
            for (int i = 0; i < dim; ++i) x(i) = nd(rng);
            const Eigen::VectorXd a = handle.apply(x);
            const Eigen::VectorXd b = dense_inv * x;
            worst = std::max(worst, (a - b).lpNorm<Eigen::Infinity>() /
                                        std::max(1e-300, b.lpNorm<Eigen::Infinity>()));
        }
        return worst;
    };

    ordered_json rep;
    rep["case"] = s.gc.name;
    rep["seed"] = args.seed;
    double worst = 0.0;
    int checked = 0;
    ordered_json items = ordered_json::array();
    for (size_t k = 0; k < s.grid.branches.size(); ++k) {
        if (!s.grid.branches[k].in_service) continue;
        if (!connectivity_check(s.grid, {static_cast<int>(k)}).connected) continue;
        const LowRankUpdate upd = outage_delta(s.grid, s.ref, static_cast<int>(k));
        const InverseOpPtr handle = woodbury_update(s.minv, upd);
        IndexedGrid reduced = s.grid;
        reduced.branches[k].in_service = false;
        const LinearModel rebuilt = assemble(reduced, s.ref);
        const double err = rel_err(*handle, rebuilt.M);
        worst = std::max(worst, err);
        ++checked;
        ordered_json item;
        item["branch"] = s.grid.branches[k].id.str();
        item["rel_error"] = err;
        items.push_back(item);
    }
    rep["outages_checked"] = checked;
    rep["worst_rel_error"] = worst;
    rep["pass"] = worst <= 1e-8;
    rep["outages"] = items;
    write_json(args.out_dir + "/selftest_report.json", rep);
    std::cout << "selftest: " << checked << " outages, worst rel error "
              << format_number(worst) << (worst <= 1e-8 ? " (pass)\n" : " (FAIL)\n");
    return worst <= 1e-8 ? 0 : 1;
}

std::vector<int> buses_by_ext_id(const IndexedGrid& grid) {
    std::vector<int> order(grid.bus_count());
    for (int i = 0; i < grid.bus_count(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return grid.bus_ids[a] < grid.bus_ids[b]; });
    return order;
}

ordered_json summary_base(const Session& s, const CommonArgs& args) {
    ordered_json j;
    j["case"] = s.gc.name;
    j["buses"] = s.grid.bus_count();
    j["pq"] = s.grid.n;
    j["pv"] = s.grid.m;
    j["branches"] = s.gc.branches.size();
    j["reference"] = args.ref;
    j["ac_converged"] = s.ac.converged;
    j["ac_iterations"] = s.ac.iterations;
    j["ac_max_mismatch"] = s.ac.max_mismatch;
    return j;
}

}  // namespace

int run_loadflow(const CommonArgs& args) {
    ensure_dir(args.out_dir);
    Session s = open_session(args);
    if (args.selftest) return selftest(s, args);
    if (!s.ac.converged)
        throw ConvergenceError("AC load flow did not converge (max mismatch " +
                               format_number(s.ac.max_mismatch) + " pu)");

    const Recovered rec = recover(s.grid, s.model, s.base);
    const DcResult dc = dc_solve(s.grid, s.grid.p_inj);
    const bool with_kv = *std::max_element(s.grid.base_kv.begin(), s.grid.base_kv.end()) > 0.0;

    Table buses;
    buses.header = {"bus", "v_ac", "v_dcplus", "theta_ac", "theta_dcplus", "theta_dc"};
    if (with_kv)
        for (const char* c : {"v_kv_ac", "v_kv_dcplus", "theta_deg_ac", "theta_deg_dcplus",
                              "theta_deg_dc"})
            buses.header.push_back(c);
    for (int i : buses_by_ext_id(s.grid)) {
        auto& row = buses.add_row();
        row = {s.grid.bus_ids[i], s.ac.v(i),     rec.v(i),
               s.ac.theta(i),     rec.theta(i),  dc.theta(i)};
        if (with_kv) {
            const double kv = s.grid.base_kv[i];
            row.push_back(s.ac.v(i) * kv);
            row.push_back(rec.v(i) * kv);
            row.push_back(s.ac.theta(i) * kRad2Deg);
            row.push_back(rec.theta(i) * kRad2Deg);
            row.push_back(dc.theta(i) * kRad2Deg);
        }
    }
    buses.write(args.out_dir, "busses", args.format);

    const auto ac_flows = branch_flows(s.grid, s.ac);
    Table branches;
    branches.header = {"from",       "to",         "ordinal",    "p_f_ac",     "q_f_ac",
                       "p_t_ac",     "q_t_ac",     "p_f_dcplus", "q_f_dcplus", "p_t_dcplus",
                       "q_t_dcplus", "p_dc"};
    for (size_t k = 0; k < s.grid.branches.size(); ++k) {
        const auto& br = s.grid.branches[k];
        auto& row = branches.add_row();
        row = {br.id.from,        br.id.to,          br.id.ordinal,     ac_flows[k].p_f,
               ac_flows[k].q_f,   ac_flows[k].p_t,   ac_flows[k].q_t,   rec.flows[k].p_f,
               rec.flows[k].q_f,  rec.flows[k].p_t,  rec.flows[k].q_t,  dc.flow[k]};
    }
    branches.write(args.out_dir, "branches", args.format);

    if (args.dump_model) {
        std::ofstream dump(args.out_dir + "/model.csv");
        dump << model_to_csv(s.model);
    }

    ordered_json j = summary_base(s, args);
    j["slack_p_ac"] = s.ac.p_slack;
    j["slack_q_ac"] = s.ac.q_slack;
    j["slack_p_dcplus"] = rec.p_bus(s.grid.slack());
    j["slack_q_dcplus"] = rec.q_bus(s.grid.slack());
    write_json(args.out_dir + "/summary.json", j);
    return 0;
}

int run_n1(const CommonArgs& args) {
    ensure_dir(args.out_dir);
    Session s = open_session(args);
    if (args.selftest) return selftest(s, args);
    if (!s.ac.converged)
        throw ConvergenceError("AC load flow did not converge");

    const auto t0 = std::chrono::steady_clock::now();
    N1Options opts;
    opts.ac_tol = args.tol;
    const N1Result res = n1_scan(s.grid, s.model, s.minv, s.base, s.ac, opts);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    int feasible = 0;
    for (const auto& r : res.records)
        if (r.feasible && r.ac_converged) ++feasible;
    if (feasible == 0) throw EmptyResult("no feasible contingencies");

    Table out;
    out.header = {"outage_from", "outage_to",  "outage_ordinal", "bus",
                  "dv_dcplus",   "dtheta_dcplus", "dp_dcplus",   "dq_dcplus",
                  "dtheta_dc",   "dp_dc"};
    const std::vector<int> bus_order = buses_by_ext_id(s.grid);
    for (const auto& r : res.records) {
        if (!r.feasible || !r.ac_converged) continue;
        for (int i : bus_order) {
            auto& row = out.add_row();
            row = {r.branch.from,      r.branch.to,     r.branch.ordinal, s.grid.bus_ids[i],
                   r.dv_dcplus(i),     r.dtheta_dcplus(i), r.dp_dcplus(i), r.dq_dcplus(i),
                   r.dtheta_dc(i),     r.dp_dc(i)};
        }
    }
    out.write(args.out_dir, "outages", args.format);

    const struct {
        Quantity q;
        Method m;
        const char* stem;
    } cdfs[] = {
        {Quantity::theta, Method::dcplus, "cdf_theta_dcplus"},
        {Quantity::theta, Method::dc, "cdf_theta_dc"},
        {Quantity::v, Method::dcplus, "cdf_v_dcplus"},
        {Quantity::p, Method::dcplus, "cdf_p_dcplus"},
        {Quantity::p, Method::dc, "cdf_p_dc"},
        {Quantity::q, Method::dcplus, "cdf_q_dcplus"},
    };
    for (const auto& c : cdfs) {
        const ErrorCdf cdf = error_cdf(res.records, c.q, c.m);
        Table t;
        t.header = {"abs_error", "cum_fraction"};
        for (size_t i = 0; i < cdf.abs_error.size(); ++i) {
            auto& row = t.add_row();
            row = {cdf.abs_error[i], cdf.cum_fraction[i]};
        }
        t.write(args.out_dir, c.stem, args.format);
    }

    ordered_json j = summary_base(s, args);
    j["infeasible_outages"] = res.infeasible_count;
    ordered_json inf = ordered_json::array();
    for (const auto& r : res.records)
        if (!r.feasible) inf.push_back(r.branch.str());
    j["infeasible_branches"] = inf;
    j["ac_diverged_outages"] = res.ac_diverged_count;
    j["feasible_outages"] = feasible;
    j["median_dtheta_dcplus"] = error_cdf(res.records, Quantity::theta, Method::dcplus).median();
    j["median_dtheta_dc"] = error_cdf(res.records, Quantity::theta, Method::dc).median();
    j["wall_time_s"] = wall;
    write_json(args.out_dir + "/summary.json", j);
    return 0;
}

int run_lmdf(const LmdfArgs& args) {
    ensure_dir(args.common.out_dir);
    Session s = open_session(args.common);
    if (args.common.selftest) return selftest(s, args.common);

    const BranchId mod_id = parse_branch_id(args.modified);
    const int mod_k = s.grid.branch_index(mod_id);
    if (mod_k < 0) throw GridError("unknown branch " + mod_id.str());

    LineMod lm = LineMod::outage_of(s.grid.branches[mod_k]);
    if (args.dg) lm.dg_s = *args.dg;
    if (args.db) lm.db_s = *args.db;

    std::vector<std::string> warnings;
    LmdfEngine engine(s.model, *s.minv, s.grid, mod_k, lm, {}, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

    std::vector<int> monitored;
    if (args.monitored.empty()) {
        for (size_t k = 0; k < s.grid.branches.size(); ++k)
            if (s.grid.branches[k].in_service) monitored.push_back(static_cast<int>(k));
    } else {
        for (const auto& text : args.monitored) {
            const int k = s.grid.branch_index(parse_branch_id(text));
            if (k < 0) throw GridError("unknown branch " + text);
            monitored.push_back(k);
        }
    }

    Table t;
    t.header = {"monitored_from", "monitored_to", "monitored_ordinal",
                "l_theta_theta",  "l_theta_u",    "l_u_theta",
                "l_u_u",          "dtheta_pred",  "du_pred"};
    for (int k : monitored) {
        const Eigen::Matrix2d l = engine.factor_for(k);
        const Eigen::Vector2d d = engine.deltas_for(k, s.base);
        const BranchId& id = s.grid.branches[k].id;
        auto& row = t.add_row();
        row = {id.from, id.to, id.ordinal, l(0, 0), l(0, 1), l(1, 0), l(1, 1), d(0), d(1)};
    }
    t.write(args.common.out_dir, "lmdf", args.common.format);

    ordered_json j = summary_base(s, args.common);
    j["modified"] = mod_id.str();
    j["dg_s"] = lm.dg_s;
    j["db_s"] = lm.db_s;
    j["warnings"] = warnings;
    write_json(args.common.out_dir + "/summary.json", j);
    return 0;
}

namespace {

SplitAssignment read_assignment(const std::string& path, double base_mva, int bus) {
    std::ifstream in(path);
    if (!in) throw ParseError("assignment file not found: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("invalid assignment JSON: " + std::string(e.what()));
    }
    SplitAssignment asg;
    asg.bus_ext = j.value("bus", bus);
    if (bus != 0 && asg.bus_ext != bus)
        throw TopologyError("assignment file names bus " + std::to_string(asg.bus_ext) +
                            " but --bus " + std::to_string(bus) + " was given");
    if (!j.contains("branches") || !j["branches"].is_array())
        throw TopologyError("assignment file must list branches");
    for (const auto& e : j["branches"]) {
        BranchId id;
        id.from = e.at("from").get<int>();
        id.to = e.at("to").get<int>();
        id.ordinal = e.value("ordinal", 1);
        const std::string bar = e.at("busbar").get<std::string>();
        if (bar != "A" && bar != "B") throw TopologyError("busbar must be \"A\" or \"B\"");
        asg.branch_busbar[id] = bar[0];
    }
    if (j.contains("injection_a")) {
        asg.p_inj_a = j["injection_a"].value("p_mw", 0.0) / base_mva;
        asg.q_inj_a = j["injection_a"].value("q_mvar", 0.0) / base_mva;
    }
    return asg;
}

ordered_json busbar_report(const IndexedGrid& grid, const Recovered& rec, const ACState& ac,
                           int bus) {
    ordered_json j;
    j["bus"] = grid.bus_ids[bus];
    j["v_dcplus"] = rec.v(bus);
    j["v_ac"] = ac.v(bus);
    j["theta_dcplus"] = rec.theta(bus);
    j["theta_ac"] = ac.theta(bus);
    const double kv = grid.base_kv[bus];
    if (kv > 0) {
        j["v_kv_dcplus"] = rec.v(bus) * kv;
        j["v_kv_ac"] = ac.v(bus) * kv;
    }
    j["theta_deg_dcplus"] = rec.theta(bus) * kRad2Deg;
    j["theta_deg_ac"] = ac.theta(bus) * kRad2Deg;
    return j;
}

}  // namespace

int run_split(const SplitArgs& args) {
    ensure_dir(args.common.out_dir);
    Session s = open_session(args.common);
    if (args.common.selftest) return selftest(s, args.common);

    const SplitAssignment asg = read_assignment(args.assign_path, s.gc.base_mva, args.bus);
    SplitContext ctx = pad_for_split(s.grid, s.ref, s.minv, asg);
    const InverseOpPtr open_inv = open_split(ctx);
    const LinState open_state = solve(ctx.open_model, *open_inv, grid_injections(ctx.open_grid));
    const Recovered rec = recover(ctx.open_grid, ctx.open_model, open_state);

    AcOptions ac_opts;
    ac_opts.tol = args.common.tol;
    const ACState ac_open = ac_solve(ctx.open_grid, ac_opts);
    if (!ac_open.converged)
        throw ConvergenceError("AC load flow diverged on the split topology");

    ordered_json j = summary_base(s, args.common);
    j["split_bus"] = asg.bus_ext;
    j["new_bus"] = ctx.new_bus_ext;
    j["busbar_a"] = busbar_report(ctx.open_grid, rec, ac_open, ctx.busbar_a);
    j["busbar_b"] = busbar_report(ctx.open_grid, rec, ac_open, ctx.busbar_b);

    const auto ac_flows = branch_flows(ctx.open_grid, ac_open);
    ordered_json flows = ordered_json::array();
    for (size_t k = 0; k < ctx.open_grid.branches.size(); ++k) {
        const auto& br = ctx.open_grid.branches[k];
        if (!br.in_service) continue;
        if (br.from != ctx.busbar_a && br.to != ctx.busbar_a && br.from != ctx.busbar_b &&
            br.to != ctx.busbar_b)
            continue;
        ordered_json f;
        f["branch"] = br.id.str();
        f["busbar"] = (br.from == ctx.busbar_b || br.to == ctx.busbar_b) ? "B" : "A";
        f["p_f_dcplus"] = rec.flows[k].p_f;
        f["p_f_ac"] = ac_flows[k].p_f;
        f["q_f_dcplus"] = rec.flows[k].q_f;
        f["q_f_ac"] = ac_flows[k].q_f;
        flows.push_back(f);
    }
    j["incident_flows"] = flows;
    write_json(args.common.out_dir + "/split_report.json", j);
    return 0;
}

int run_merge(const MergeArgs& args) {
    ensure_dir(args.common.out_dir);
    Session s = open_session(args.common);
    if (args.common.selftest) return selftest(s, args.common);

    const auto ia = s.grid.index_of.find(args.bus_a);
    const auto ib = s.grid.index_of.find(args.bus_b);
    if (ia == s.grid.index_of.end() || ib == s.grid.index_of.end())
        throw GridError("merge: unknown bus");
    const int a = ia->second, b = ib->second;
    if (!s.grid.is_pq(a) || !s.grid.is_pq(b))
        throw TopologyError("merge: both buses must be PQ");

    const InverseOpPtr closed = close_switch(s.minv, s.model.idx, s.ref, a, b, 1e-6);
    const LinState st = solve(s.model, *closed, grid_injections(s.grid));
    const Recovered rec = recover(s.grid, s.model, st);

    // AC oracle: the two buses merged into one node.
    GridCase merged = s.gc;
    for (auto& br : merged.branches) {
        if (br.from_bus == args.bus_b) br.from_bus = args.bus_a;
        if (br.to_bus == args.bus_b) br.to_bus = args.bus_a;
    }
    for (auto& g : merged.gens)
        if (g.bus == args.bus_b) g.bus = args.bus_a;
    BusRecord* keep = nullptr;
    for (auto& bus : merged.buses)
        if (bus.id == args.bus_a) keep = &bus;
    for (auto it = merged.buses.begin(); it != merged.buses.end(); ++it) {
        if (it->id != args.bus_b) continue;
        keep->p_load += it->p_load;
        keep->q_load += it->q_load;
        keep->g_shunt += it->g_shunt;
        keep->b_shunt += it->b_shunt;
        merged.buses.erase(it);
        break;
    }
    const IndexedGrid mgrid = index_grid(merged);
    AcOptions ac_opts;
    ac_opts.tol = args.common.tol;
    const ACState mac = ac_solve(mgrid, ac_opts);
    if (!mac.converged) throw ConvergenceError("AC load flow diverged on the merged topology");
    const int ma = mgrid.index_of.at(args.bus_a);

    ordered_json j = summary_base(s, args.common);
    j["bus_a"] = args.bus_a;
    j["bus_b"] = args.bus_b;
    j["v_dcplus_a"] = rec.v(a);
    j["v_dcplus_b"] = rec.v(b);
    j["theta_dcplus_a"] = rec.theta(a);
    j["theta_dcplus_b"] = rec.theta(b);
    j["v_ac_merged"] = mac.v(ma);
    j["theta_ac_merged"] = mac.theta(ma);
    write_json(args.common.out_dir + "/merge_report.json", j);
    return 0;
}

int run_multi_outage(const MultiOutageArgs& args) {
    ensure_dir(args.common.out_dir);
    Session s = open_session(args.common);
    if (args.common.selftest) return selftest(s, args.common);
    if (args.branches.empty()) throw ParseError("multi-outage: at least one --branch required");

    std::vector<std::pair<int, BranchParams>> mods;
    std::vector<int> removed;
    for (const auto& text : args.branches) {
        const int k = s.grid.branch_index(parse_branch_id(text));
        if (k < 0) throw GridError("unknown branch " + text);
        mods.emplace_back(k, BranchParams::outage());
        removed.push_back(k);
    }
    const auto conn = connectivity_check(s.grid, removed);
    if (!conn.connected)
        throw TopologyError("multi-outage islands bus " +
                            std::to_string(conn.islanded_buses.front()));

    const LowRankUpdate upd = multi_branch_delta(s.grid, s.ref, mods);
    const InverseOpPtr updated = woodbury_update(s.minv, upd);
    const LinState delta = state_delta(s.model, *updated, upd, s.base);
    LinState post;
    post.theta = s.base.theta + delta.theta;
    post.u = s.base.u + delta.u;

    IndexedGrid reduced = s.grid;
    for (int k : removed) reduced.branches[k].in_service = false;
    const Recovered rec = recover(reduced, s.model, post);

    AcOptions ac_opts;
    ac_opts.tol = args.common.tol;
    ac_opts.warm = s.ac;
    ACState ac = ac_solve(reduced, ac_opts);
    if (!ac.converged) {
        ac_opts.warm.reset();
        ac = ac_solve(reduced, ac_opts);
    }
    if (!ac.converged)
        throw ConvergenceError("AC load flow diverged on the reduced topology");

    Table t;
    t.header = {"bus", "v_dcplus", "v_ac", "theta_dcplus", "theta_ac"};
    for (int i : buses_by_ext_id(s.grid)) {
        auto& row = t.add_row();
        row = {s.grid.bus_ids[i], rec.v(i), ac.v(i), rec.theta(i), ac.theta(i)};
    }
    t.write(args.common.out_dir, "multi_outage", args.common.format);

    ordered_json j = summary_base(s, args.common);
    ordered_json outs = ordered_json::array();
    for (int k : removed) outs.push_back(s.grid.branches[k].id.str());
    j["outages"] = outs;
    j["rank"] = upd.rank();
    j["max_dv"] = (rec.v - ac.v).cwiseAbs().maxCoeff();
    j["max_dtheta"] = (rec.theta - ac.theta).cwiseAbs().maxCoeff();
    write_json(args.common.out_dir + "/summary.json", j);
    return 0;
}

int run_guarded(int (*fn)(const void*), const void* args) {
    auto diag = [](const char* kind, const std::string& detail) {
        ordered_json j;
        j["error"] = kind;
        j["detail"] = detail;
        std::cerr << j.dump() << '\n';
    };
    try {
        return fn(args);
    } catch (const EmptyResult& e) {
        diag("empty result", e.what());
        return 4;
    } catch (const TopologyError& e) {
        diag("invalid topology action", e.what());
        return 5;
    } catch (const SingularMatrixError& e) {
        diag("invalid topology action", e.what());
        return 5;
    } catch (const ConvergenceError& e) {
        diag("ac failure", e.what());
        return 3;
    } catch (const ParseError& e) {
        diag("input error", e.what());
        return 2;
    } catch (const GridError& e) {
        diag("input error", e.what());
        return 2;
    } catch (const std::exception& e) {
        diag("internal error", e.what());
        return 1;
    }
}

}  // namespace dcplus::tools
