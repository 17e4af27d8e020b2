#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "proxopt/errors.hpp"
#include "proxopt/gpa.hpp"
#include "proxopt/ledger.hpp"

namespace proxopt {

struct SweepRow {
  double gamma = 0.0;
  bool accepted = false;
  std::string reason;  ///< why the row was rejected or the run failed
  long n1_actual = -1;
  std::int64_t n1_bound = -1;
};

/// Default grid: n points γ_max·i/(n+1), i = 1..n, strictly inside (0, γ_max).
inline std::vector<double> default_gamma_grid(double gamma_max, int n) {
  std::vector<double> grid;
  for (int i = 1; i <= n; ++i) {
    grid.push_back(gamma_max * static_cast<double>(i) / static_cast<double>(n + 1));
  }
  return grid;
}

/**
 * For each step size, the number of gradient-projection steps until the
 * residual first reaches C, next to the bound N₁(C). Step sizes outside
 * (0, min{1/L₁, R/L₀}) are reported as rejected rows.
 */
inline std::vector<SweepRow> gamma_sweep(const ObjectiveMap& objective,
                                         const ConstraintMap& c, const Vector& x0,
                                         const ConstantsLedger& ledger,
                                         const std::vector<double>& grid,
                                         long max_steps = 1000000) {
  if (!ledger.C.known() || !ledger.delta_f.known() || !ledger.L0.known() ||
      !ledger.L1.known() || !ledger.R.known()) {
    throw Error(ErrorKind::IncompleteLedger, "sweep needs L0, L1, R, C and delta_f");
  }
  ObjectiveMap obj = objective;
  obj.L0 = ledger.L0.value;
  obj.L1 = ledger.L1.value;
  ConstraintMap cons = c;
  cons.prox_radius = ledger.R.value;
  const double gamma_max = step_size_bounds(obj.L0, obj.L1, cons.prox_radius).gamma_max;

  std::vector<SweepRow> rows;
  for (double gamma : grid) {
    SweepRow row;
    row.gamma = gamma;
    if (!(gamma > 0.0) || !(gamma < gamma_max)) {
      row.reason = "gamma outside (0, min{1/L1, R/L0})";
      rows.push_back(std::move(row));
      continue;
    }
    row.n1_bound = n1_bound(ledger.delta_f.value, gamma, obj.L1, ledger.C.value);
    GpaConfig cfg;
    cfg.gamma = gamma;
    cfg.switch_C = ledger.C.value;
    cfg.max_steps = max_steps;
    try {
      row.n1_actual = run_gpa(obj, cons, x0, cfg).steps;
      row.accepted = true;
    } catch (const Error& e) {
      row.reason = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Grid point minimizing N₁ among accepted rows; nullopt when none.
inline std::optional<double> bound_minimizer(const std::vector<SweepRow>& rows) {
  std::optional<double> best;
  std::int64_t best_bound = std::numeric_limits<std::int64_t>::max();
  for (const auto& r : rows) {
    if (r.n1_bound >= 0 && r.n1_bound < best_bound) {
      best_bound = r.n1_bound;
      best = r.gamma;
    }
  }
  return best;
}

}  // namespace proxopt
