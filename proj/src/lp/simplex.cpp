#include "batchdex/lp/simplex.hpp"

namespace batchdex {

BoundedSimplex::BoundedSimplex(int rows, int cols)
    : m_(rows), n_(cols), total_(cols + rows),
      a_(rows, std::vector<Rat>(total_)),
      rhs_(rows), lo_(total_), hi_(total_), c_(total_),
      x_(total_), xb_(rows), state_(total_, VarState::AtLo), basis_(rows) {
    // artificial columns n_..n_+m_-1 get bounds [0, inf) for phase 1
    for (int i = 0; i < m_; i++) hi_[n_ + i] = std::nullopt;
}

void BoundedSimplex::set_coeff(int row, int col, const Rat& v) { a_[row][col] = v; }
void BoundedSimplex::set_rhs(int row, const Rat& v) { rhs_[row] = v; }
void BoundedSimplex::set_lower(int col, const Rat& lo) { lo_[col] = lo; }
void BoundedSimplex::set_upper(int col, const Rat& hi) { hi_[col] = hi; }
void BoundedSimplex::set_objective(int col, const Rat& c) { c_[col] = c; }

std::vector<Rat> BoundedSimplex::reduced_costs(const std::vector<Rat>& obj) const {
    std::vector<Rat> d = obj;
    for (int i = 0; i < m_; i++) {
        const Rat& cb = obj[basis_[i]];
        if (cb.is_zero()) continue;
        for (int k = 0; k < total_; k++) {
            if (!a_[i][k].is_zero()) d[k] = d[k] - cb * a_[i][k];
        }
    }
    return d;
}

void BoundedSimplex::pivot(int row, int col) {
    Rat piv = a_[row][col];
    for (int k = 0; k < total_; k++) {
        if (!a_[row][k].is_zero()) a_[row][k] = a_[row][k] / piv;
    }
    for (int i = 0; i < m_; i++) {
        if (i == row) continue;
        Rat f = a_[i][col];
        if (f.is_zero()) continue;
        for (int k = 0; k < total_; k++) {
            if (!a_[row][k].is_zero()) a_[i][k] = a_[i][k] - f * a_[row][k];
        }
    }
}

void BoundedSimplex::sync_values() {
    for (int j = 0; j < total_; j++) {
        switch (state_[j]) {
        case VarState::AtLo: x_[j] = lo_[j]; break;
        case VarState::AtHi: x_[j] = *hi_[j]; break;
        case VarState::Basic: break;
        }
    }
    for (int i = 0; i < m_; i++) x_[basis_[i]] = xb_[i];
}

BoundedSimplex::Status BoundedSimplex::optimize(const std::vector<Rat>& obj, size_t pivot_cap,
                                                bool allow_artificial) {
    size_t pivots = 0;
    int degenerate_run = 0;
    while (true) {
        if (++pivots > pivot_cap) return Status::Stalled;
        bool bland = degenerate_run >= 12;

        std::vector<Rat> d = reduced_costs(obj);
        int enter = -1;
        Rat best;
        for (int j = 0; j < total_; j++) {
            if (state_[j] == VarState::Basic) continue;
            if (!allow_artificial && j >= n_) continue;
            bool eligible = (state_[j] == VarState::AtLo && d[j].sign() > 0) ||
                            (state_[j] == VarState::AtHi && d[j].sign() < 0);
            if (!eligible) continue;
            if (bland) { enter = j; break; }
            Rat mag = d[j].sign() > 0 ? d[j] : -d[j];
            if (enter < 0 || mag > best) { enter = j; best = mag; }
        }
        if (enter < 0) return Status::Optimal;

        int dir = state_[enter] == VarState::AtLo ? 1 : -1;

        // ratio test: largest step t >= 0 keeping every basic var in bounds
        bool t_unbounded = !hi_[enter].has_value();
        Rat t;
        if (hi_[enter]) t = *hi_[enter] - lo_[enter];
        int leave_row = -1;
        bool leave_to_lo = false;
        for (int i = 0; i < m_; i++) {
            const Rat& coef = a_[i][enter];
            if (coef.is_zero()) continue;
            // xb_i moves at rate -dir * coef per unit of t
            Rat rate = dir > 0 ? -coef : coef;
            Rat limit;
            bool to_lo;
            if (rate.sign() < 0) {
                limit = (xb_[i] - lo_[basis_[i]]) / -rate;
                to_lo = true;
            } else {
                if (!hi_[basis_[i]]) continue;
                limit = (*hi_[basis_[i]] - xb_[i]) / rate;
                to_lo = false;
            }
            if (t_unbounded || limit < t ||
                (limit == t && leave_row >= 0 && basis_[i] < basis_[leave_row])) {
                t = limit;
                t_unbounded = false;
                leave_row = i;
                leave_to_lo = to_lo;
            }
        }
        if (t_unbounded) return Status::Stalled; // unbounded; not expected here
        if (t.sign() == 0) degenerate_run++;
        else degenerate_run = 0;

        if (leave_row < 0) {
            // bound flip
            for (int i = 0; i < m_; i++) {
                const Rat& coef = a_[i][enter];
                if (coef.is_zero()) continue;
                Rat rate = dir > 0 ? -coef : coef;
                xb_[i] = xb_[i] + rate * t;
            }
            state_[enter] = dir > 0 ? VarState::AtHi : VarState::AtLo;
            continue;
        }

        // update values, then the tableau
        for (int i = 0; i < m_; i++) {
            if (i == leave_row) continue;
            const Rat& coef = a_[i][enter];
            if (coef.is_zero()) continue;
            Rat rate = dir > 0 ? -coef : coef;
            xb_[i] = xb_[i] + rate * t;
        }
        int leaving = basis_[leave_row];
        state_[leaving] = leave_to_lo ? VarState::AtLo : VarState::AtHi;
        Rat enter_start = state_[enter] == VarState::AtLo ? lo_[enter] : *hi_[enter];
        Rat enter_val = dir > 0 ? enter_start + t : enter_start - t;

        pivot(leave_row, enter);
        basis_[leave_row] = enter;
        state_[enter] = VarState::Basic;
        xb_[leave_row] = enter_val;
    }
}

BoundedSimplex::Status BoundedSimplex::solve(size_t pivot_cap) {
    // start: structural variables at their lower bounds, artificial basis
    std::vector<Rat> phase1(total_);
    for (int i = 0; i < m_; i++) {
        Rat r = rhs_[i];
        for (int j = 0; j < n_; j++) {
            if (!a_[i][j].is_zero()) r = r - a_[i][j] * lo_[j];
        }
        int s = r.sign() < 0 ? -1 : 1;
        a_[i][n_ + i] = Rat(s);
        if (s < 0) {
            // scale the row so the artificial basis column is +1
            for (int k = 0; k < total_; k++)
                if (!a_[i][k].is_zero()) a_[i][k] = -a_[i][k];
            rhs_[i] = -rhs_[i];
            r = -r;
        }
        basis_[i] = n_ + i;
        state_[n_ + i] = VarState::Basic;
        xb_[i] = r;
        lo_[n_ + i] = Rat(0);
        phase1[n_ + i] = Rat(-1);
    }
    for (int j = 0; j < n_; j++) state_[j] = VarState::AtLo;

    Status s1 = optimize(phase1, pivot_cap, true);
    if (s1 == Status::Stalled) return s1;
    for (int i = 0; i < m_; i++) {
        if (basis_[i] >= n_ && xb_[i].sign() != 0) return Status::Infeasible;
    }
    for (int j = 0; j < total_; j++) {
        if (j >= n_ && state_[j] != VarState::Basic && state_[j] != VarState::AtLo)
            state_[j] = VarState::AtLo;
        if (j >= n_) hi_[j] = Rat(0); // freeze artificials at zero
    }

    Status s2 = optimize(c_, pivot_cap, false);
    if (s2 != Status::Optimal) return s2;
    sync_values();
    return Status::Optimal;
}

Rat BoundedSimplex::objective_value() const {
    Rat v;
    for (int j = 0; j < n_; j++) {
        if (!c_[j].is_zero() && !x_[j].is_zero()) v = v + c_[j] * x_[j];
    }
    return v;
}

} // namespace batchdex
