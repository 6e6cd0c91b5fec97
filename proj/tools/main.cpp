#include <CLI11.hpp>

#include "commands.hpp"

namespace {

void add_common(CLI::App* cmd, dcplus::tools::CommonArgs& args) {
    cmd->add_option("case", args.case_path, "MATPOWER case file")->required();
    cmd->add_option("--ref", args.ref, "linearization reference")
        ->check(CLI::IsMember({"cold", "hot"}))
        ->capture_default_str();
    cmd->add_option("--tol", args.tol, "AC solver tolerance, pu")->capture_default_str();
    cmd->add_option("--out", args.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--format", args.format, "data file format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    cmd->add_option("--seed", args.seed, "random seed for self tests")->capture_default_str();
    cmd->add_flag("--selftest", args.selftest,
                  "run the rebuild-oracle suite instead of the command body");
    cmd->add_flag("--dump-model", args.dump_model,
                  "also write the assembled matrix and offsets as csv triplets");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Voltage-sensitive linear load-flow toolkit"};
    app.require_subcommand(1);

    using namespace dcplus::tools;

    CommonArgs loadflow_args;
    CLI::App* loadflow = app.add_subcommand("loadflow", "AC, DC+ and DC solutions side by side");
    add_common(loadflow, loadflow_args);

    CommonArgs n1_args;
    CLI::App* n1 = app.add_subcommand("n1", "N-1 branch outage scan with error statistics");
    add_common(n1, n1_args);

    LmdfArgs lmdf_args;
    CLI::App* lmdf = app.add_subcommand("lmdf", "line modification distribution factors");
    add_common(lmdf, lmdf_args.common);
    lmdf->add_option("--modified", lmdf_args.modified, "modified branch as from,to[,ordinal]")
        ->required();
    lmdf->add_option("--monitored", lmdf_args.monitored,
                     "monitored branch (repeatable; default all)");
    lmdf->add_option("--dg", lmdf_args.dg, "series conductance change, pu");
    lmdf->add_option("--db", lmdf_args.db, "series susceptance change, pu");

    SplitArgs split_args;
    CLI::App* split = app.add_subcommand("split", "busbar split what-if evaluation");
    add_common(split, split_args.common);
    split->add_option("--bus", split_args.bus, "bus to split")->required();
    split->add_option("--assign", split_args.assign_path, "assignment JSON file")->required();

    MergeArgs merge_args;
    CLI::App* merge = app.add_subcommand("merge", "close an ideal coupler between two buses");
    add_common(merge, merge_args.common);
    merge->add_option("--bus-a", merge_args.bus_a, "first bus")->required();
    merge->add_option("--bus-b", merge_args.bus_b, "second bus")->required();

    MultiOutageArgs multi_args;
    CLI::App* multi = app.add_subcommand("multi-outage", "simultaneous branch outages");
    add_common(multi, multi_args.common);
    multi->add_option("--branch", multi_args.branches, "outaged branch (repeatable)")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (loadflow->parsed()) return guarded(run_loadflow, loadflow_args);
    if (n1->parsed()) return guarded(run_n1, n1_args);
    if (lmdf->parsed()) return guarded(run_lmdf, lmdf_args);
    if (split->parsed()) return guarded(run_split, split_args);
    if (merge->parsed()) return guarded(run_merge, merge_args);
    if (multi->parsed()) return guarded(run_multi_outage, multi_args);
    return 2;
}
