#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <random>
#include <string_view>

namespace proxopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

using Rng = std::mt19937_64;

/// Draws a point of the feasible set.
using Sampler = std::function<Vector(Rng&)>;

/// Where a numerical constant came from.
enum class Provenance { unset, user, sampled, closed_form };

inline constexpr std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::unset: return "unset";
    case Provenance::user: return "user";
    case Provenance::sampled: return "sampled";
    case Provenance::closed_form: return "closed_form";
  }
  return "unset";
}

/// Which solver phase produced an iterate.
enum class Phase { gpa, newton };

inline constexpr std::string_view to_string(Phase p) {
  return p == Phase::gpa ? "gpa" : "newton";
}

}  // namespace proxopt
