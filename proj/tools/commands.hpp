#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcplus::tools {

/// Result signaled when a command legitimately produced nothing to report.
struct EmptyResult : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonArgs {
    std::string case_path;
    std::string ref = "hot";  // cold | hot
    double tol = 1e-8;
    std::string out_dir = ".";
    std::string format = "csv";  // csv | json
    unsigned seed = 1;
    bool selftest = false;
    bool dump_model = false;  // also write the assembled M, p_hat, q_hat
};

struct LmdfArgs {
    CommonArgs common;
    std::string modified;              // "from,to[,ordinal]"
    std::vector<std::string> monitored;  // empty = all branches
    std::optional<double> dg, db;      // default: full outage
};

struct SplitArgs {
    CommonArgs common;
    int bus = 0;
    std::string assign_path;
};

struct MergeArgs {
    CommonArgs common;
    int bus_a = 0;
    int bus_b = 0;
};

struct MultiOutageArgs {
    CommonArgs common;
    std::vector<std::string> branches;  // "from,to[,ordinal]" each
};

int run_loadflow(const CommonArgs& args);
int run_n1(const CommonArgs& args);
int run_lmdf(const LmdfArgs& args);
int run_split(const SplitArgs& args);
int run_merge(const MergeArgs& args);
int run_multi_outage(const MultiOutageArgs& args);

/// Maps an in-flight exception to the documented exit codes and prints a
/// one-line JSON diagnostic to stderr. 0 success, 2 input error, 3 AC
/// failure, 4 empty result, 5 invalid topology action.
int run_guarded(int (*fn)(const void*), const void* args);

template <typename Args>
int guarded(int (*fn)(const Args&), const Args& args) {
    struct Thunk {
        int (*fn)(const Args&);
        const Args* a;
    } thunk{fn, &args};
    return run_guarded(
        [](const void* p) {
            const auto* t = static_cast<const Thunk*>(p);
            return t->fn(*t->a);
        },
        &thunk);
}

}  // namespace dcplus::tools
