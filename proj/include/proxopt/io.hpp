#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "json.hpp"
#include "proxopt/combined.hpp"
#include "proxopt/diagnostics.hpp"
#include "proxopt/ledger.hpp"
#include "proxopt/trace.hpp"

namespace proxopt::io {

using Json = nlohmann::ordered_json;

/// Fixed column order of serialized traces.
inline constexpr const char* kTraceColumns[] = {
    "k", "phase", "f", "residual", "step_len", "descent_ok", "residual_ineq_ok",
    "kkt_norm"};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline Json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline Json vector_json(const Vector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(number(v(i)));
  return arr;
}

inline void write_trace_csv(const IterationTrace& trace, std::ostream& os) {
  for (std::size_t i = 0; i < std::size(kTraceColumns); ++i) {
    os << (i ? "," : "") << kTraceColumns[i];
  }
  os << '\n';
  for (const auto& row : trace) {
    os << row.k << ',' << to_string(row.phase) << ',' << format_double(row.f)
       << ',' << format_double(row.residual) << ','
       << format_double(row.step_len) << ',' << (row.descent_ok ? 1 : 0) << ','
       << (row.residual_ineq_ok ? 1 : 0) << ',' << format_double(row.kkt_norm)
       << '\n';
  }
}

inline Json trace_json(const IterationTrace& trace) {
  Json rows = Json::array();
  for (const auto& row : trace) {
    Json j;
    j["k"] = row.k;
    j["phase"] = std::string(to_string(row.phase));
    j["f"] = number(row.f);
    j["residual"] = number(row.residual);
    j["step_len"] = number(row.step_len);
    j["descent_ok"] = row.descent_ok;
    j["residual_ineq_ok"] = row.residual_ineq_ok;
    j["kkt_norm"] = number(row.kkt_norm);
    rows.push_back(std::move(j));
  }
  return rows;
}

inline Json ledger_json(const ConstantsLedger& ledger) {
  Json out;
  ledger.for_each([&](const char* name, const Constant& c) {
    Json entry;
    entry["value"] = c.known() ? number(c.value) : Json(nullptr);
    entry["provenance"] = std::string(to_string(c.source));
    out[name] = std::move(entry);
  });
  return out;
}

inline Json certificate_json(const BasinCertificate& cert) {
  Json j;
  j["K"] = number(cert.K);
  j["inv_norm"] = number(cert.inv_norm);
  j["h"] = number(cert.h);
  j["t0"] = number(cert.t0);
  j["r"] = number(cert.r);
  j["certified"] = cert.certified;
  return j;
}

inline Json solve_result_json(const SolveResult& r) {
  Json j;
  j["converged"] = r.converged;
  j["residual"] = number(r.residual);
  j["final_point"] = vector_json(r.x);
  j["gamma"] = number(r.gamma);
  Json phases;
  phases["n1_actual"] = r.n1_actual;
  phases["n2_actual"] = r.n2_actual;
  phases["finished_in_gpa"] = r.finished_in_gpa;
  phases["fallbacks"] = r.fallbacks;
  j["phase_counts"] = std::move(phases);
  Json bounds;
  bounds["n1_bound"] = r.n1_bound ? Json(*r.n1_bound) : Json(nullptr);
  bounds["n2_bound"] = r.n2_bound ? Json(*r.n2_bound) : Json(nullptr);
  j["bounds"] = std::move(bounds);
  Json verdicts;
  verdicts["step_bounds"] = std::string(to_string(r.verdict));
  verdicts["switch_binding"] =
      r.binding ? Json(std::string(to_string(*r.binding))) : Json(nullptr);
  j["verdicts"] = std::move(verdicts);
  j["C_initial"] = number(r.C_initial);
  j["C_final"] = number(r.C_final);
  Json certs = Json::array();
  for (const auto& c : r.certificates) certs.push_back(certificate_json(c));
  j["basin_certificates"] = std::move(certs);
  if (r.newton) {
    Json nj;
    nj["K"] = number(r.newton->K);
    nj["observed_rate"] = number(r.newton->observed_rate);
    nj["rate_ok"] = r.newton->rate_ok;
    j["newton"] = std::move(nj);
  }
  j["ledger"] = ledger_json(r.ledger);
  return j;
}

inline Json teb_json(const TebReport& r) {
  Json j;
  j["mu_hat"] = number(r.mu_hat);
  j["samples_used"] = r.samples_used;
  j["samples_excluded"] = r.samples_excluded;
  j["vacuous"] = r.vacuous;
  return j;
}

inline Json geb_json(const GebReport& r) {
  Json j;
  j["nu_hat"] = number(r.nu_hat);
  j["nu_floor"] = r.nu_floor ? number(*r.nu_floor) : Json(nullptr);
  j["worst_gamma"] = number(r.worst_gamma);
  j["samples_used"] = r.samples_used;
  j["passes"] = r.passes;
  return j;
}

inline Json nondegeneracy_json(const NondegeneracyReport& r) {
  Json j;
  j["sigma0"] = number(r.sigma0);
  j["any_degenerate"] = r.any_degenerate;
  Json pts = Json::array();
  for (const auto& p : r.points) {
    Json pj;
    pj["sigma_min"] = number(p.sigma_min);
    pj["degenerate"] = p.degenerate;
    pts.push_back(std::move(pj));
  }
  j["points"] = std::move(pts);
  return j;
}

inline Json inverse_bound_json(const InverseBoundReport& r) {
  Json j;
  j["radius"] = number(r.radius);
  j["bound"] = number(r.bound);
  j["max_ratio"] = number(r.max_ratio);
  j["samples"] = r.samples;
  j["violations"] = r.violations;
  return j;
}

inline Json fd_json(const FdReport& r) {
  Json j;
  j["passed"] = r.passed;
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    Json ej;
    ej["evaluator"] = e.evaluator;
    ej["max_rel_error"] = number(e.max_rel_error);
    ej["passed"] = e.passed;
    entries.push_back(std::move(ej));
  }
  j["checks"] = std::move(entries);
  return j;
}

}  // namespace proxopt::io
