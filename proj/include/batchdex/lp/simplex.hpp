#pragma once

#include <optional>
#include <vector>

#include "batchdex/lp/rational.hpp"

namespace batchdex {

// Dense two-phase simplex with bounded variables over exact rationals.
// Box bounds stay out of the constraint matrix, so the tableau has one row
// per equality constraint only. Deterministic pivoting: Dantzig rule with
// index tie-breaks, switching to Bland's rule after a run of degenerate
// pivots so termination is guaranteed.
class BoundedSimplex {
  public:
    enum class Status { Optimal, Infeasible, Stalled };

    BoundedSimplex(int rows, int cols);

    void set_coeff(int row, int col, const Rat& v);
    void set_rhs(int row, const Rat& v);
    void set_lower(int col, const Rat& lo);
    void set_upper(int col, const Rat& hi); // absent = unbounded above
    void set_objective(int col, const Rat& c);

    Status solve(size_t pivot_cap);

    const Rat& value(int col) const { return x_[col]; }
    Rat objective_value() const;

  private:
    enum class VarState : uint8_t { AtLo, AtHi, Basic };

    int m_, n_, total_;
    std::vector<std::vector<Rat>> a_; // m x total tableau (B^-1 A)
    std::vector<Rat> rhs_;
    std::vector<Rat> lo_;
    std::vector<std::optional<Rat>> hi_;
    std::vector<Rat> c_;
    std::vector<Rat> x_;       // current values, all variables
    std::vector<Rat> xb_;      // basic variable values by row
    std::vector<VarState> state_;
    std::vector<int> basis_;   // row -> var

    std::vector<Rat> reduced_costs(const std::vector<Rat>& obj) const;
    Status optimize(const std::vector<Rat>& obj, size_t pivot_cap, bool allow_artificial);
    void pivot(int row, int col);
    void sync_values();
};

} // namespace batchdex
