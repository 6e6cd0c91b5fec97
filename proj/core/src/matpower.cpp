#include "dcplus/matpower.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace dcplus {
namespace {

constexpr double kPi = 3.14159265358979323846;

struct Tokenizer {
    explicit Tokenizer(const std::string& text) : text_(text) {}

    // Strips MATLAB comments, tracks line numbers.
    bool next_line(std::string& out) {
        while (pos_ < text_.size()) {
            size_t end = text_.find('\n', pos_);
            if (end == std::string::npos) end = text_.size();
            std::string line = text_.substr(pos_, end - pos_);
            pos_ = end + 1;
            ++lineno_;
            size_t c = line.find('%');
            if (c != std::string::npos) line.erase(c);
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            out = line;
            return true;
        }
        return false;
    }

    int lineno() const { return lineno_; }

  private:
    const std::string& text_;
    size_t pos_ = 0;
    int lineno_ = 0;
};

std::vector<double> parse_row(const std::string& line, int lineno) {
    std::vector<double> vals;
    std::string cleaned = line;
    for (char& ch : cleaned)
        if (ch == ';' || ch == ',' || ch == ']') ch = ' ';
    std::istringstream iss(cleaned);
    std::string tok;
    while (iss >> tok) {
        try {
            size_t used = 0;
            double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            vals.push_back(v);
        } catch (const std::exception&) {
            throw ParseError("unexpected token '" + tok + "'", lineno);
        }
    }
    return vals;
}

// Reads rows until the closing ']'. The opening line may already carry data.
std::vector<std::vector<double>> parse_matrix(Tokenizer& tok, std::string first_line) {
    std::vector<std::vector<double>> rows;
    std::string line = std::move(first_line);
    bool done = false;
    while (!done) {
        done = line.find(']') != std::string::npos;
        auto vals = parse_row(line, tok.lineno());
        if (!vals.empty()) rows.push_back(std::move(vals));
        if (!done && !tok.next_line(line)) throw ParseError("unterminated matrix", tok.lineno());
    }
    return rows;
}

void require_cols(const std::vector<double>& row, size_t need, const char* what, int lineno) {
    if (row.size() < need)
        throw ParseError(std::string(what) + " row has " + std::to_string(row.size()) +
                             " columns, expected at least " + std::to_string(need),
                         lineno);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

GridCase parse_matpower(const std::string& text) {
    GridCase grid;
    Tokenizer tok(text);
    std::string line;
    bool saw_bus = false, saw_branch = false, saw_base = false;

    while (tok.next_line(line)) {
        size_t fn = line.find("function");
        if (fn != std::string::npos && line.find("mpc") != std::string::npos) {
            size_t eq = line.find('=');
            if (eq != std::string::npos) {
                std::istringstream iss(line.substr(eq + 1));
                std::string name;
                iss >> name;  // skip "mpc"
                // function mpc = casename
                grid.name = name == "mpc" ? "" : name;
                if (grid.name.empty()) {
                    size_t fe = line.find_last_of('=');
                    std::istringstream tail(line.substr(fe + 1));
                    tail >> grid.name;
                }
            }
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        key.erase(0, key.find_first_not_of(" \t"));
        key.erase(key.find_last_not_of(" \t") + 1);
        std::string rest = line.substr(eq + 1);

        if (key == "mpc.baseMVA") {
            auto vals = parse_row(rest, tok.lineno());
            if (vals.empty()) throw ParseError("missing baseMVA value", tok.lineno());
            grid.base_mva = vals[0];
            saw_base = true;
        } else if (key == "mpc.bus" || key == "mpc.gen" || key == "mpc.branch") {
            size_t open = rest.find('[');
            if (open == std::string::npos) throw ParseError("expected '[' after " + key, tok.lineno());
            auto rows = parse_matrix(tok, rest.substr(open + 1));
            if (key == "mpc.bus") {
                saw_bus = true;
                for (const auto& row : rows) {
                    require_cols(row, 13, "bus", tok.lineno());
                    BusRecord b;
                    b.id = static_cast<int>(row[0]);
                    int type = static_cast<int>(row[1]);
                    switch (type) {
                        case 1: b.kind = BusKind::pq; break;
                        case 2: b.kind = BusKind::pv; break;
                        case 3: b.kind = BusKind::slack; break;
                        default:
                            throw ParseError("unknown bus type code " + std::to_string(type) +
                                                 " at bus " + std::to_string(b.id),
                                             tok.lineno());
                    }
                    b.p_load = row[2] / grid.base_mva;
                    b.q_load = row[3] / grid.base_mva;
                    b.g_shunt = row[4] / grid.base_mva;
                    b.b_shunt = row[5] / grid.base_mva;
                    b.v_set = row[7];
                    b.base_kv = row[9];
                    grid.buses.push_back(b);
                }
            } else if (key == "mpc.gen") {
                for (const auto& row : rows) {
                    require_cols(row, 8, "gen", tok.lineno());
                    GenRecord g;
                    g.bus = static_cast<int>(row[0]);
                    g.p_gen = row[1] / grid.base_mva;
                    g.q_gen = row[2] / grid.base_mva;
                    g.v_set = row[5];
                    g.in_service = row[7] > 0;
                    grid.gens.push_back(g);
                }
            } else {
                saw_branch = true;
                for (const auto& row : rows) {
                    require_cols(row, 11, "branch", tok.lineno());
                    BranchRecord b;
                    b.from_bus = static_cast<int>(row[0]);
                    b.to_bus = static_cast<int>(row[1]);
                    b.r = row[2];
                    b.x = row[3];
                    b.b_charging = row[4];
                    b.tau = row[8] == 0.0 ? 1.0 : row[8];
                    b.alpha = row[9] * kPi / 180.0;
                    b.in_service = row[10] > 0;
                    grid.branches.push_back(b);
                }
            }
        }
    }

    if (!saw_base) throw ParseError("missing mpc.baseMVA");
    if (!saw_bus) throw ParseError("missing mpc.bus matrix");
    if (!saw_branch) throw ParseError("missing mpc.branch matrix");

    // Fold generator voltage setpoints into PV/slack bus records; the first
    // in-service generator wins, later conflicts get a warning.
    for (auto& bus : grid.buses) {
        if (bus.kind == BusKind::pq) continue;
        bool have = false;
        for (const auto& g : grid.gens) {
            if (g.bus != bus.id || !g.in_service) continue;
            if (!have) {
                bus.v_set = g.v_set;
                have = true;
            } else if (g.v_set != bus.v_set) {
                std::cerr << "warning: conflicting v_set at bus " << bus.id << ", keeping "
                          << bus.v_set << "\n";
            }
        }
    }

    grid.validate();
    return grid;
}

std::string serialize_matpower(const GridCase& grid) {
    std::ostringstream os;
    os << "function mpc = " << (grid.name.empty() ? "case" : grid.name) << "\n";
    os << "mpc.baseMVA = " << fmt(grid.base_mva) << ";\n";
    os << "mpc.bus = [\n";
    for (const auto& b : grid.buses) {
        int type = b.kind == BusKind::pq ? 1 : (b.kind == BusKind::pv ? 2 : 3);
        os << "\t" << b.id << "\t" << type << "\t" << fmt(b.p_load * grid.base_mva) << "\t"
           << fmt(b.q_load * grid.base_mva) << "\t" << fmt(b.g_shunt * grid.base_mva) << "\t"
           << fmt(b.b_shunt * grid.base_mva) << "\t1\t" << fmt(b.v_set) << "\t0\t"
           << fmt(b.base_kv) << "\t1\t1.1\t0.9;\n";
    }
    os << "];\n";
    os << "mpc.gen = [\n";
    for (const auto& g : grid.gens) {
        os << "\t" << g.bus << "\t" << fmt(g.p_gen * grid.base_mva) << "\t"
           << fmt(g.q_gen * grid.base_mva) << "\t0\t0\t" << fmt(g.v_set) << "\t"
           << fmt(grid.base_mva) << "\t" << (g.in_service ? 1 : 0) << "\t0\t0;\n";
    }
    os << "];\n";
    os << "mpc.branch = [\n";
    for (const auto& b : grid.branches) {
        os << "\t" << b.from_bus << "\t" << b.to_bus << "\t" << fmt(b.r) << "\t" << fmt(b.x)
           << "\t" << fmt(b.b_charging) << "\t0\t0\t0\t" << fmt(b.tau) << "\t"
           << fmt(b.alpha * 180.0 / kPi) << "\t" << (b.in_service ? 1 : 0) << "\t-360\t360;\n";
    }
    os << "];\n";
    return os.str();
}

std::string to_json(const GridCase& grid) {
    nlohmann::ordered_json j;
    j["name"] = grid.name;
    j["base_mva"] = grid.base_mva;
    j["buses"] = nlohmann::ordered_json::array();
    for (const auto& b : grid.buses) {
        nlohmann::ordered_json jb;
        jb["id"] = b.id;
        jb["kind"] = b.kind == BusKind::pq ? "pq" : (b.kind == BusKind::pv ? "pv" : "slack");
        jb["p_load"] = b.p_load;
        jb["q_load"] = b.q_load;
        jb["g_shunt"] = b.g_shunt;
        jb["b_shunt"] = b.b_shunt;
        jb["v_set"] = b.v_set;
        jb["base_kv"] = b.base_kv;
        j["buses"].push_back(jb);
    }
    j["gens"] = nlohmann::ordered_json::array();
    for (const auto& g : grid.gens) {
        nlohmann::ordered_json jg;
        jg["bus"] = g.bus;
        jg["p_gen"] = g.p_gen;
        jg["q_gen"] = g.q_gen;
        jg["v_set"] = g.v_set;
        jg["in_service"] = g.in_service;
        j["gens"].push_back(jg);
    }
    j["branches"] = nlohmann::ordered_json::array();
    for (const auto& b : grid.branches) {
        nlohmann::ordered_json jb;
        jb["from_bus"] = b.from_bus;
        jb["to_bus"] = b.to_bus;
        jb["r"] = b.r;
        jb["x"] = b.x;
        jb["b_charging"] = b.b_charging;
        jb["tau"] = b.tau;
        jb["alpha"] = b.alpha;
        jb["in_service"] = b.in_service;
        j["branches"].push_back(jb);
    }
    return j.dump(2);
}

}  // namespace dcplus
