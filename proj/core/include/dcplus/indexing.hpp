#pragma once

#include <array>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dcplus/errors.hpp"

namespace dcplus {

/// Signed unit selector over the state space: at most two (position, sign)
/// entries, never materialized as a dense vector. Applying one is O(1).
class Selector {
  public:
    Selector() = default;

    static Selector unit(int pos) {
        Selector s;
        s.add(pos, 1.0);
        return s;
    }

    void add(int pos, double sign) {
        // Opposite signs at the same position cancel (self-differences).
        for (int k = 0; k < count_; ++k) {
            if (pos_[k] == pos) {
                sign_[k] += sign;
                if (sign_[k] == 0.0) {
                    pos_[k] = pos_[count_ - 1];
                    sign_[k] = sign_[count_ - 1];
                    --count_;
                }
                return;
            }
        }
        pos_[count_] = pos;
        sign_[count_] = sign;
        ++count_;
    }

    bool zero() const { return count_ == 0; }
    int size() const { return count_; }
    int pos(int k) const { return pos_[k]; }
    double sign(int k) const { return sign_[k]; }

    /// selector . x
    double dot(const Eigen::VectorXd& x) const {
        double s = 0.0;
        for (int k = 0; k < count_; ++k) s += sign_[k] * x(pos_[k]);
        return s;
    }

    /// x += scale * selector
    void add_to(Eigen::VectorXd& x, double scale = 1.0) const {
        for (int k = 0; k < count_; ++k) x(pos_[k]) += scale * sign_[k];
    }

    /// selector_a . selector_b without materializing either side
    double dot(const Selector& o) const {
        double s = 0.0;
        for (int a = 0; a < count_; ++a)
            for (int b = 0; b < o.count_; ++b)
                if (pos_[a] == o.pos_[b]) s += sign_[a] * o.sign_[b];
        return s;
    }

    Eigen::VectorXd dense(int dim) const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
        add_to(v);
        return v;
    }

    friend Selector operator-(const Selector& a, const Selector& b) {
        Selector s = a;
        for (int k = 0; k < b.count_; ++k) s.add(b.pos_[k], -b.sign_[k]);
        return s;
    }

  private:
    int count_ = 0;
    std::array<int, 2> pos_{};
    std::array<double, 2> sign_{};
};

/// Sparse vector for low-rank factor columns/rows: a handful of
/// (position, coefficient) terms scattered over the state space.
struct SparseVec {
    std::vector<std::pair<int, double>> terms;

    void add(const Selector& sel, double coeff) {
        if (coeff == 0.0) return;
        for (int k = 0; k < sel.size(); ++k) terms.emplace_back(sel.pos(k), coeff * sel.sign(k));
    }

    double dot(const Eigen::VectorXd& x) const {
        double s = 0.0;
        for (const auto& [p, c] : terms) s += c * x(p);
        return s;
    }

    void add_to(Eigen::VectorXd& x, double scale = 1.0) const {
        for (const auto& [p, c] : terms) x(p) += scale * c;
    }

    Eigen::VectorXd dense(int dim) const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
        add_to(v);
        return v;
    }
};

/// Coordinate bookkeeping over the 2n+m state space: angle coordinates for
/// PQ and PV buses come first, then relative-voltage coordinates for PQ
/// buses. The slack has no state row. Bus indices are the 0-based internal
/// ordering of IndexedGrid.
class StateIndexer {
  public:
    StateIndexer() = default;
    StateIndexer(int n_pq, int n_pv) : n_(n_pq), m_(n_pv) {}

    int n() const { return n_; }
    int m() const { return m_; }
    int dim() const { return 2 * n_ + m_; }
    int slack() const { return n_ + m_; }

    int angle_coord(int bus) const { return bus; }           // valid for bus < n+m
    int u_coord(int bus) const { return n_ + m_ + bus; }     // valid for bus < n

    /// Real-power / angle selector. The slack bus has no angle coordinate.
    Selector eta(int bus) const {
        if (bus < 0 || bus >= n_ + m_)
            throw GridError("eta: bus " + std::to_string(bus) + " carries no angle state");
        return Selector::unit(angle_coord(bus));
    }

    /// Like eta, but the slack maps to the zero selector. Branch updates use
    /// this so that slack-incident branches scatter correctly.
    Selector eta_or_zero(int bus) const {
        if (bus == slack()) return Selector{};
        return eta(bus);
    }

    /// Reactive-power / voltage selector; zero for PV and slack buses.
    Selector zeta(int bus) const {
        if (bus < 0 || bus > n_ + m_) throw GridError("zeta: bus index out of range");
        if (bus >= n_) return Selector{};
        return Selector::unit(u_coord(bus));
    }

    Selector mu(int i, int j) const { return eta_or_zero(i) - eta_or_zero(j); }
    Selector nu(int i, int j) const { return zeta(i) - zeta(j); }

  private:
    int n_ = 0;
    int m_ = 0;
};

}  // namespace dcplus
