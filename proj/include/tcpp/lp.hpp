/**
 * @file lp.hpp
 * @brief Dense two-phase simplex solver.
 *
 * Solves
 *
 *   minimize / maximize   c^T x
 *   subject to            a_i^T x  (<=, =, >=)  b_i
 *                         l <= x <= u            (either side may be infinite)
 *
 * The program is rewritten into standard form (shifted / mirrored / split
 * variables, slack and surplus columns, nonnegative right-hand side),
 * phase one drives artificial variables to zero and phase two optimizes the
 * real objective. Entering and leaving variables follow Bland's rule, so the
 * method terminates on degenerate programs. Once the optimal basis is known
 * the basic solution and the row multipliers are recomputed from a fresh
 * factorization of the basis matrix, which removes the drift accumulated by
 * tableau updates.
 *
 * Multiplier convention: for the returned `dual_point` y and the original
 * program, c = A^T y + r where r are the reduced costs.
 */
#pragma once

#include "tcpp/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace tcpp::lp {

enum class Relation { less_equal, equal, greater_equal };
enum class Sense { minimize, maximize };
enum class Status { optimal, infeasible, unbounded };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
  }
  return "unknown";
}

struct Constraint {
  std::vector<double> coefficients;
  Relation relation = Relation::less_equal;
  double bound = 0.0;
};

struct LinearProgram {
  Sense sense = Sense::minimize;
  std::vector<double> objective;
  std::vector<Constraint> constraints;
  std::vector<double> lower;
  std::vector<double> upper;

  LinearProgram() = default;
  explicit LinearProgram(std::size_t n, Sense s = Sense::minimize)
      : sense(s), objective(n, 0.0), lower(n, 0.0), upper(n, kInfinity) {}

  [[nodiscard]] std::size_t num_variables() const { return objective.size(); }

  /// Appends a variable; existing rows are widened with a zero coefficient.
  std::size_t add_variable(double cost = 0.0, double lo = 0.0, double hi = kInfinity) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    for (auto& c : constraints) c.coefficients.push_back(0.0);
    return objective.size() - 1;
  }

  void add_constraint(std::vector<double> coefficients, Relation rel, double bound) {
    constraints.push_back({std::move(coefficients), rel, bound});
  }

  /// Sparse convenience form: (variable index, coefficient) terms.
  void add_constraint(const std::vector<std::pair<std::size_t, double>>& terms, Relation rel,
                      double bound) {
    std::vector<double> row(num_variables(), 0.0);
    for (const auto& [j, a] : terms) {
      if (j >= row.size()) throw Error(Errc::malformed_program, "term references unknown variable");
      row[j] += a;
    }
    add_constraint(std::move(row), rel, bound);
  }
};

struct LpSolution {
  Status status = Status::infeasible;
  double value = 0.0;
  std::vector<double> point;
  std::vector<double> dual_point;
  std::size_t iterations = 0;
};

namespace detail {

/// Solves M z = rhs in place with partial pivoting; false when a pivot falls below `tol`.
inline bool dense_solve(std::vector<std::vector<double>> m, std::vector<double>& rhs, double tol) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t best = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m[r][col]) > std::abs(m[best][col])) best = r;
    if (std::abs(m[best][col]) < tol) return false;
    std::swap(m[best], m[col]);
    std::swap(rhs[best], rhs[col]);
    const double inv = 1.0 / m[col][col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = m[r][col] * inv;
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) m[r][k] -= f * m[col][k];
      rhs[r] -= f * rhs[col];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= m[i][k] * rhs[k];
    rhs[i] = s / m[i][i];
  }
  return true;
}

struct StandardColumn {
  std::size_t original;  // index into the user's variables, or npos for slack/artificial
  double sign;           // x_original += sign * column value
};

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

class Simplex {
 public:
  Simplex(const LinearProgram& lp, const NumericSettings& settings) : lp_(lp), s_(settings) {}

  LpSolution run() {
    validate();
    LpSolution out;
    if (!build_standard_form()) {
      out.status = Status::infeasible;
      return out;
    }
    build_tableau();
    if (!phase_one()) {
      out.status = Status::infeasible;
      out.iterations = iterations_;
      return out;
    }
    if (!phase_two()) {
      out.status = Status::unbounded;
      out.iterations = iterations_;
      return out;
    }
    finish(out);
    out.iterations = iterations_;
    return out;
  }

 private:
  void validate() const {
    const std::size_t n = lp_.objective.size();
    if (lp_.lower.size() != n || lp_.upper.size() != n)
      throw Error(Errc::malformed_program, "bound vectors do not match objective dimension");
    for (std::size_t i = 0; i < lp_.constraints.size(); ++i) {
      const auto& c = lp_.constraints[i];
      if (c.coefficients.size() != n)
        throw Error(Errc::malformed_program,
                    "constraint " + std::to_string(i) + " has " +
                        std::to_string(c.coefficients.size()) + " coefficients, expected " +
                        std::to_string(n));
      if (!std::isfinite(c.bound))
        throw Error(Errc::malformed_program, "constraint " + std::to_string(i) + " bound not finite");
      for (double a : c.coefficients)
        if (!std::isfinite(a))
          throw Error(Errc::malformed_program, "constraint " + std::to_string(i) + " coefficient not finite");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(lp_.objective[j]))
        throw Error(Errc::malformed_program, "objective coefficient not finite");
      if (std::isnan(lp_.lower[j]) || std::isnan(lp_.upper[j]) || lp_.lower[j] == kInfinity ||
          lp_.upper[j] == -kInfinity)
        throw Error(Errc::malformed_program, "variable " + std::to_string(j) + " has undefined bounds");
    }
  }

  // Returns false when a variable's bounds are contradictory.
  bool build_standard_form() {
    const std::size_t n = lp_.objective.size();
    shift_.assign(n, 0.0);
    std::vector<std::pair<std::size_t, double>> upper_rows;  // (column, bound)
    for (std::size_t j = 0; j < n; ++j) {
      const double lo = lp_.lower[j];
      const double hi = lp_.upper[j];
      if (std::isfinite(lo) && std::isfinite(hi) && hi < lo - s_.feasibility_tol) return false;
      if (std::isfinite(lo)) {
        shift_[j] = lo;
        cols_.push_back({j, 1.0});
        if (std::isfinite(hi)) upper_rows.emplace_back(cols_.size() - 1, std::max(0.0, hi - lo));
      } else if (std::isfinite(hi)) {
        shift_[j] = hi;
        cols_.push_back({j, -1.0});
      } else {
        cols_.push_back({j, 1.0});
        cols_.push_back({j, -1.0});
      }
    }
    structural_ = cols_.size();

    const double sense_sign = lp_.sense == Sense::maximize ? -1.0 : 1.0;
    cost_.assign(structural_, 0.0);
    for (std::size_t k = 0; k < structural_; ++k)
      cost_[k] = sense_sign * lp_.objective[cols_[k].original] * cols_[k].sign;

    // Rows over structural columns.
    for (const auto& c : lp_.constraints) {
      std::vector<double> row(structural_, 0.0);
      double rhs = c.bound;
      for (std::size_t k = 0; k < structural_; ++k) row[k] = c.coefficients[cols_[k].original] * cols_[k].sign;
      for (std::size_t j = 0; j < n; ++j) rhs -= c.coefficients[j] * shift_[j];
      rows_.push_back(std::move(row));
      rhs_.push_back(rhs);
      rel_.push_back(c.relation);
    }
    for (const auto& [k, b] : upper_rows) {
      std::vector<double> row(structural_, 0.0);
      row[k] = 1.0;
      rows_.push_back(std::move(row));
      rhs_.push_back(b);
      rel_.push_back(Relation::less_equal);
    }
    return true;
  }

  void build_tableau() {
    const std::size_t m = rows_.size();
    // Slack / surplus columns.
    std::vector<std::size_t> slack_of(m, npos);
    std::size_t next = structural_;
    for (std::size_t i = 0; i < m; ++i)
      if (rel_[i] != Relation::equal) slack_of[i] = next++;
    slack_end_ = next;
    flip_.assign(m, 1.0);
    for (std::size_t i = 0; i < m; ++i)
      if (rhs_[i] < 0.0) flip_[i] = -1.0;

    // Rows needing an artificial: no slack column with +1 after the flip.
    std::vector<std::size_t> art_of(m, npos);
    for (std::size_t i = 0; i < m; ++i) {
      const bool usable = slack_of[i] != npos &&
                          (rel_[i] == Relation::less_equal ? 1.0 : -1.0) * flip_[i] > 0.0;
      if (!usable) art_of[i] = next++;
    }
    total_ = next;

    std_matrix_.assign(m, std::vector<double>(slack_end_, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < structural_; ++k) std_matrix_[i][k] = flip_[i] * rows_[i][k];
      if (slack_of[i] != npos)
        std_matrix_[i][slack_of[i]] = flip_[i] * (rel_[i] == Relation::less_equal ? 1.0 : -1.0);
      std_rhs_.push_back(flip_[i] * rhs_[i]);
    }

    tab_.assign(m, std::vector<double>(total_ + 1, 0.0));
    basis_.assign(m, npos);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < slack_end_; ++k) tab_[i][k] = std_matrix_[i][k];
      tab_[i][total_] = std_rhs_[i];
      if (art_of[i] != npos) {
        tab_[i][art_of[i]] = 1.0;
        basis_[i] = art_of[i];
      } else {
        basis_[i] = slack_of[i];
      }
    }
    active_.assign(m, true);
  }

  [[nodiscard]] bool is_artificial(std::size_t col) const { return col >= slack_end_; }

  void pivot(std::size_t r, std::size_t c, std::vector<double>& z) {
    auto& prow = tab_[r];
    const double inv = 1.0 / prow[c];
    for (double& v : prow) v *= inv;
    prow[c] = 1.0;
    for (std::size_t i = 0; i < tab_.size(); ++i) {
      if (i == r || !active_[i]) continue;
      const double f = tab_[i][c];
      if (f == 0.0) continue;
      auto& row = tab_[i];
      for (std::size_t k = 0; k <= total_; ++k) row[k] -= f * prow[k];
      row[c] = 0.0;
    }
    const double f = z[c];
    if (f != 0.0) {
      for (std::size_t k = 0; k <= total_; ++k) z[k] -= f * prow[k];
      z[c] = 0.0;
    }
    basis_[r] = c;
  }

  // Bland's rule on reduced-cost row z; returns false on unboundedness.
  bool iterate(std::vector<double>& z) {
    for (;;) {
      if (++iterations_ > s_.max_lp_iterations)
        throw Error(Errc::numerical_breakdown, "simplex iteration limit reached");
      std::size_t enter = npos;
      for (std::size_t k = 0; k < total_; ++k) {
        if (is_artificial(k)) continue;
        if (z[k] < -s_.optimality_tol) {
          enter = k;
          break;
        }
      }
      if (enter == npos) return true;
      double best = kInfinity;
      for (std::size_t i = 0; i < tab_.size(); ++i) {
        if (!active_[i] || tab_[i][enter] <= s_.pivot_tol) continue;
        best = std::min(best, tab_[i][total_] / tab_[i][enter]);
      }
      std::size_t leave = npos;
      if (best < kInfinity) {
        // Ties within rounding go to the smallest basic variable index.
        const double slack = 1e-12 * (1.0 + std::abs(best));
        for (std::size_t i = 0; i < tab_.size(); ++i) {
          if (!active_[i] || tab_[i][enter] <= s_.pivot_tol) continue;
          if (tab_[i][total_] / tab_[i][enter] > best + slack) continue;
          if (leave == npos || basis_[i] < basis_[leave]) leave = i;
        }
      }
      if (leave == npos) {
        // Distinguish true unboundedness from a column whose entries are all tiny.
        for (std::size_t i = 0; i < tab_.size(); ++i)
          if (active_[i] && tab_[i][enter] > 0.0)
            throw Error(Errc::numerical_breakdown,
                        "pivot magnitude below tolerance with no valid alternative; rescale the program");
        return false;
      }
      pivot(leave, enter, z);
    }
  }

  bool phase_one() {
    std::vector<double> z(total_ + 1, 0.0);
    bool any = false;
    for (std::size_t k = slack_end_; k < total_; ++k) z[k] = 1.0;
    for (std::size_t i = 0; i < tab_.size(); ++i) {
      if (!is_artificial(basis_[i])) continue;
      any = true;
      for (std::size_t k = 0; k <= total_; ++k) z[k] -= tab_[i][k];
    }
    if (any) iterate(z);  // artificials only ever leave the basis
    double scale = 1.0;
    for (double b : std_rhs_) scale = std::max(scale, std::abs(b));
    if (-z[total_] > s_.feasibility_tol * scale) return false;

    // Drive remaining artificials out of the basis; drop rows that are redundant.
    constexpr double redundancy_tol = 1e-9;
    for (std::size_t i = 0; i < tab_.size(); ++i) {
      if (!active_[i] || !is_artificial(basis_[i])) continue;
      // Entries at rounding level mean the row is a combination of the others.
      std::size_t col = npos;
      double best = redundancy_tol;
      for (std::size_t k = 0; k < slack_end_; ++k) {
        if (std::abs(tab_[i][k]) > best) {
          best = std::abs(tab_[i][k]);
          col = k;
        }
      }
      if (col == npos) {
        active_[i] = false;
      } else {
        pivot(i, col, z);
      }
    }
    return true;
  }

  bool phase_two() {
    std::vector<double> z(total_ + 1, 0.0);
    for (std::size_t k = 0; k < structural_; ++k) z[k] = cost_[k];
    for (std::size_t i = 0; i < tab_.size(); ++i) {
      if (!active_[i]) continue;
      const double cb = basis_[i] < structural_ ? cost_[basis_[i]] : 0.0;
      if (cb == 0.0) continue;
      for (std::size_t k = 0; k <= total_; ++k) z[k] -= cb * tab_[i][k];
    }
    return iterate(z);
  }

  void finish(LpSolution& out) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < tab_.size(); ++i)
      if (active_[i]) rows.push_back(i);
    const std::size_t m = rows.size();

    std::vector<double> xstd(slack_end_, 0.0);
    std::vector<double> ystd(tab_.size(), 0.0);
    if (m > 0) {
      std::vector<std::vector<double>> bmat(m, std::vector<double>(m, 0.0));
      std::vector<std::vector<double>> bt(m, std::vector<double>(m, 0.0));
      std::vector<double> rhs(m), cb(m);
      for (std::size_t a = 0; a < m; ++a) {
        const std::size_t col = basis_[rows[a]];
        for (std::size_t b = 0; b < m; ++b) {
          bmat[b][a] = std_matrix_[rows[b]][col];
          bt[a][b] = std_matrix_[rows[b]][col];
        }
        rhs[a] = std_rhs_[rows[a]];
        cb[a] = col < structural_ ? cost_[col] : 0.0;
      }
      std::vector<double> xb = rhs;
      if (!dense_solve(bmat, xb, s_.pivot_tol) || !dense_solve(bt, cb, s_.pivot_tol))
        throw Error(Errc::numerical_breakdown, "optimal basis is numerically singular; rescale the program");
      for (std::size_t a = 0; a < m; ++a) {
        double v = xb[a];
        if (v < 0.0 && v > -s_.feasibility_tol) v = 0.0;
        xstd[basis_[rows[a]]] = v;
        ystd[rows[a]] = cb[a];
      }
    }

    const std::size_t n = lp_.objective.size();
    out.point = shift_;
    for (std::size_t k = 0; k < structural_; ++k) out.point[cols_[k].original] += cols_[k].sign * xstd[k];
    out.value = 0.0;
    for (std::size_t j = 0; j < n; ++j) out.value += lp_.objective[j] * out.point[j];

    const double sense_sign = lp_.sense == Sense::maximize ? -1.0 : 1.0;
    out.dual_point.assign(lp_.constraints.size(), 0.0);
    for (std::size_t i = 0; i < lp_.constraints.size(); ++i)
      out.dual_point[i] = sense_sign * flip_[i] * ystd[i];
    out.status = Status::optimal;
  }

  const LinearProgram& lp_;
  const NumericSettings& s_;
  std::vector<StandardColumn> cols_;
  std::vector<double> shift_, cost_;
  std::size_t structural_ = 0, slack_end_ = 0, total_ = 0;
  std::vector<std::vector<double>> rows_;
  std::vector<double> rhs_;
  std::vector<Relation> rel_;
  std::vector<double> flip_;
  std::vector<std::vector<double>> std_matrix_;
  std::vector<double> std_rhs_;
  std::vector<std::vector<double>> tab_;
  std::vector<std::size_t> basis_;
  std::vector<bool> active_;
  std::size_t iterations_ = 0;
};

}  // namespace detail

inline LpSolution solve(const LinearProgram& lp, const NumericSettings& settings = {}) {
  return detail::Simplex(lp, settings).run();
}

/// Dual objective y^T b plus the bound terms of the reduced costs r = c - A^T y.
/// At an optimum this equals the primal value (strong duality).
inline double dual_objective(const LinearProgram& lp, const LpSolution& sol) {
  const std::size_t n = lp.objective.size();
  double value = 0.0;
  std::vector<double> r = lp.objective;
  for (std::size_t i = 0; i < lp.constraints.size(); ++i) {
    value += sol.dual_point[i] * lp.constraints[i].bound;
    for (std::size_t j = 0; j < n; ++j) r[j] -= sol.dual_point[i] * lp.constraints[i].coefficients[j];
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (r[j] == 0.0) continue;
    // The bound the variable rests on; with a free variable r_j is ~0.
    const bool at_lower = std::isfinite(lp.lower[j]) &&
                          (!std::isfinite(lp.upper[j]) ||
                           std::abs(sol.point[j] - lp.lower[j]) <= std::abs(sol.point[j] - lp.upper[j]));
    value += r[j] * (at_lower ? lp.lower[j] : (std::isfinite(lp.upper[j]) ? lp.upper[j] : sol.point[j]));
  }
  return value;
}

}  // namespace tcpp::lp
