#pragma once

#include "klgauss/measure.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace klgauss {

/// A concentrating problem: V1^eps (possibly eps-dependent), its limit V1, V2,
/// and the box used to search for the modes of V1.
struct Problem {
  std::string name;
  int dim = 1;
  std::function<Potential(double)> v1_family;
  Potential v1_limit;
  Potential v2;
  MultistartConfig search;

  Potential v1_at(double epsilon) const { return v1_family ? v1_family(epsilon) : v1_limit; }
  TargetMeasure measure(double epsilon) const { return TargetMeasure(v1_at(epsilon), v2, epsilon); }
  ModeSet modes() const { return find_modes(v1_limit, v2, search); }
};

/// 1/2 k |x - c|^2.
Potential quadratic_potential(int dim, double stiffness = 1.0, Vector center = {});
/// (x_1^2 - 1)^2 + 1/2 sum_{i>1} x_i^2.
Potential double_well_potential(int dim = 1);
/// c^T x.
Potential linear_potential(Vector coefficients);

/// Builds a potential from {"id": ..., "params": {...}}. Ids: "zero",
/// "quadratic" {stiffness, center}, "double-well", "linear" {coefficients},
/// "elliptic-exp" / "elliptic-square" {f, truth, eta}. Elliptic potentials
/// depend on eps through sqrt(eps) eta; the returned function is eps -> V1^eps.
std::function<Potential(double)> potential_family_from_json(const nlohmann::json& j, int dim);
Potential potential_from_json(const nlohmann::json& j, int dim);

/// "quadratic", "double-well", "shifted-double-well", "elliptic-exp", "elliptic-square".
std::vector<std::string> builtin_problem_names();
/// Throws std::invalid_argument for unknown names.
Problem builtin_problem(const std::string& name);

/// {name, dim, v1: {id, params}, v2: {id, params}, search?: {half_width, starts, seed}}.
Problem problem_from_json(const nlohmann::json& j);

/// A builtin name, or a path to a JSON problem document.
Problem load_problem(const std::string& spec);

}  // namespace klgauss
