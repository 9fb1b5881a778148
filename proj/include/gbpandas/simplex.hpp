#pragma once

// Dense two-phase tableau simplex for small problems in standard form:
//   minimize c.x  subject to  A x = b,  x >= 0.
// Pricing is Dantzig's rule; after a run of degenerate pivots it falls back
// to Bland's rule, which cannot cycle.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "gbpandas/errors.hpp"

namespace gbp {

struct LinearProgram {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;  // row-major rows x cols
  std::vector<double> b;
  std::vector<double> c;

  LinearProgram(std::size_t r, std::size_t n) : rows(r), cols(n), a(r * n, 0.0), b(r, 0.0), c(n, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  double objective = 0.0;
  std::vector<double> x;
  std::size_t pivots = 0;
};

struct SimplexOptions {
  double tolerance = 1e-10;
  std::size_t max_pivots = 1'000'000;
  std::size_t degenerate_run_before_bland = 50;
};

namespace detail {

class Tableau {
 public:
  Tableau(const LinearProgram& lp, const SimplexOptions& opt)
      : rows_(lp.rows), structural_(lp.cols), width_(lp.cols + lp.rows + 1), opt_(opt) {
    t_.assign((rows_ + 1) * width_, 0.0);
    basis_.resize(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
      const double sign = lp.b[i] < 0.0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < structural_; ++j) cell(i, j) = sign * lp.at(i, j);
      cell(i, structural_ + i) = 1.0;
      cell(i, width_ - 1) = sign * lp.b[i];
      basis_[i] = structural_ + i;
    }
  }

  // Returns false on unboundedness.
  bool optimize(const std::vector<double>& cost, bool allow_artificial) {
    load_objective(cost);
    std::size_t degenerate_run = 0;
    while (true) {
      const bool bland = degenerate_run >= opt_.degenerate_run_before_bland;
      const std::size_t enter = choose_entering(allow_artificial, bland);
      if (enter == npos) return true;
      const std::size_t leave = choose_leaving(enter);
      if (leave == npos) return false;
      const bool degenerate = cell(leave, width_ - 1) <= opt_.tolerance;
      degenerate_run = degenerate ? degenerate_run + 1 : 0;
      pivot(leave, enter);
      if (++pivots_ > opt_.max_pivots) {
        throw NumericalError("simplex exceeded " + std::to_string(opt_.max_pivots) + " pivots");
      }
    }
  }

  // Pivot basic artificials (at value zero) out of the basis where possible.
  void expel_artificials() {
    for (std::size_t i = 0; i < rows_; ++i) {
      if (basis_[i] < structural_) continue;
      for (std::size_t j = 0; j < structural_; ++j) {
        if (std::abs(cell(i, j)) > 1e-9) {
          pivot(i, j);
          break;
        }
      }
      // Otherwise the row is redundant; its artificial stays basic at zero.
    }
  }

  double objective_value() const { return -cell(rows_, width_ - 1); }

  std::vector<double> solution() const {
    std::vector<double> x(structural_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      if (basis_[i] < structural_) x[basis_[i]] = std::max(0.0, cell(i, width_ - 1));
    }
    return x;
  }

  std::size_t pivots() const { return pivots_; }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  double& cell(std::size_t i, std::size_t j) { return t_[i * width_ + j]; }
  double cell(std::size_t i, std::size_t j) const { return t_[i * width_ + j]; }

  void load_objective(const std::vector<double>& cost) {
    for (std::size_t j = 0; j < width_; ++j) cell(rows_, j) = j < cost.size() ? cost[j] : 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      const double cb = basis_[i] < cost.size() ? cost[basis_[i]] : 0.0;
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < width_; ++j) cell(rows_, j) -= cb * cell(i, j);
    }
  }

  std::size_t choose_entering(bool allow_artificial, bool bland) const {
    const std::size_t limit = allow_artificial ? width_ - 1 : structural_;
    std::size_t best = npos;
    double best_value = -opt_.tolerance;
    for (std::size_t j = 0; j < limit; ++j) {
      const double r = cell(rows_, j);
      if (r < best_value) {
        if (bland) return j;
        best = j;
        best_value = r;
      }
    }
    return best;
  }

  std::size_t choose_leaving(std::size_t enter) const {
    std::size_t best = npos;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows_; ++i) {
      const double coef = cell(i, enter);
      if (coef <= opt_.tolerance) continue;
      const double ratio = cell(i, width_ - 1) / coef;
      if (ratio < best_ratio - opt_.tolerance ||
          (ratio <= best_ratio + opt_.tolerance && best != npos && basis_[i] < basis_[best])) {
        best = i;
        best_ratio = std::min(best_ratio, ratio);
      }
    }
    return best;
  }

  void pivot(std::size_t row, std::size_t col) {
    const double inv = 1.0 / cell(row, col);
    double* prow = &t_[row * width_];
    for (std::size_t j = 0; j < width_; ++j) prow[j] *= inv;
    prow[col] = 1.0;
    for (std::size_t i = 0; i <= rows_; ++i) {
      if (i == row) continue;
      double* r = &t_[i * width_];
      const double factor = r[col];
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j < width_; ++j) r[j] -= factor * prow[j];
      r[col] = 0.0;
    }
    basis_[row] = col;
  }

  std::size_t rows_;
  std::size_t structural_;
  std::size_t width_;
  SimplexOptions opt_;
  std::vector<double> t_;
  std::vector<std::size_t> basis_;
  std::size_t pivots_ = 0;
};

}  // namespace detail

inline LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& opt = {}) {
  detail::Tableau tab(lp, opt);
  LpSolution out;

  std::vector<double> phase1(lp.cols + lp.rows, 0.0);
  for (std::size_t i = 0; i < lp.rows; ++i) phase1[lp.cols + i] = 1.0;
  tab.optimize(phase1, /*allow_artificial=*/true);
  double scale = 1.0;
  for (double v : lp.b) scale = std::max(scale, std::abs(v));
  if (tab.objective_value() > 1e-9 * scale) {
    out.status = LpStatus::infeasible;
    out.pivots = tab.pivots();
    return out;
  }
  tab.expel_artificials();

  if (!tab.optimize(lp.c, /*allow_artificial=*/false)) {
    out.status = LpStatus::unbounded;
    out.pivots = tab.pivots();
    return out;
  }
  out.status = LpStatus::optimal;
  out.x = tab.solution();
  out.objective = 0.0;
  for (std::size_t j = 0; j < lp.cols; ++j) out.objective += lp.c[j] * out.x[j];
  out.pivots = tab.pivots();
  return out;
}

}  // namespace gbp
