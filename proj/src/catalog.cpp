#include "klgauss/catalog.hpp"

#include "klgauss/inverse.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace klgauss {

namespace {

using json = nlohmann::json;

Vector vector_param(const json& params, const char* key, int dim, double fill) {
  if (!params.contains(key)) return Vector::Constant(dim, fill);
  const json& v = params.at(key);
  if (v.is_number()) return Vector::Constant(dim, v.get<double>());
  const auto raw = v.get<std::vector<double>>();
  if (static_cast<int>(raw.size()) != dim) {
    throw std::invalid_argument(std::string("parameter '") + key + "' has the wrong length");
  }
  return Eigen::Map<const Vector>(raw.data(), dim);
}

json params_of(const json& j) { return j.contains("params") ? j.at("params") : json::object(); }

}  // namespace

Potential quadratic_potential(int dim, double stiffness, Vector center) {
  if (center.size() == 0) center = Vector::Zero(dim);
  if (center.size() != dim) throw std::invalid_argument("quadratic center has the wrong length");
  if (!(stiffness > 0.0)) throw std::invalid_argument("quadratic stiffness must be positive");
  Potential v(
      dim, [=](const Vector& x) { return 0.5 * stiffness * (x - center).squaredNorm(); },
      [=](const Vector& x) -> Vector { return stiffness * (x - center); },
      [=](const Vector&) -> Matrix { return stiffness * Matrix::Identity(dim, dim); });
  v.nonnegative = true;
  v.coercivity = Coercivity{0.0, 0.5 * stiffness};
  v.growth_bound = stiffness * (1.0 + center.squaredNorm());
  return v;
}

Potential double_well_potential(int dim) {
  if (dim < 1) throw std::invalid_argument("dimension must be positive");
  Potential v(
      dim,
      [](const Vector& x) {
        const double a = x[0] * x[0] - 1.0;
        return a * a + 0.5 * x.tail(x.size() - 1).squaredNorm();
      },
      [](const Vector& x) -> Vector {
        Vector g = x;
        g[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0);
        return g;
      },
      [dim](const Vector& x) -> Matrix {
        Matrix H = Matrix::Identity(dim, dim);
        H(0, 0) = 12.0 * x[0] * x[0] - 4.0;
        return H;
      });
  v.nonnegative = true;
  v.coercivity = Coercivity{1.0, 0.5};
  v.growth_bound = 24.0;
  return v;
}

Potential linear_potential(Vector coefficients) {
  const int dim = static_cast<int>(coefficients.size());
  if (dim < 1) throw std::invalid_argument("linear potential needs coefficients");
  return Potential(
      dim, [=](const Vector& x) { return coefficients.dot(x); },
      [=](const Vector&) -> Vector { return coefficients; },
      [=](const Vector&) -> Matrix { return Matrix::Zero(dim, dim); });
}

std::function<Potential(double)> potential_family_from_json(const json& j, int dim) {
  const std::string id = j.at("id").get<std::string>();
  const json params = params_of(j);
  if (id == "elliptic-exp" || id == "elliptic-square") {
    const Variant variant = id == "elliptic-exp" ? Variant::exp : Variant::square;
    const EllipticProblem p(dim, vector_param(params, "f", dim, 81.0), variant);
    const Vector truth = vector_param(params, "truth", dim, variant == Variant::exp ? 0.0 : 1.0);
    const Vector eta = vector_param(params, "eta", dim, 0.0);
    const Vector clean = forward(p, truth);
    return [p, clean, eta](double eps) {
      return misfit_potential(p, clean + std::sqrt(eps) * eta);
    };
  }
  const Potential v = potential_from_json(j, dim);
  return [v](double) { return v; };
}

Potential potential_from_json(const json& j, int dim) {
  const std::string id = j.at("id").get<std::string>();
  const json params = params_of(j);
  if (id == "zero") return zero_potential(dim);
  if (id == "quadratic") {
    return quadratic_potential(dim, params.value("stiffness", 1.0), vector_param(params, "center", dim, 0.0));
  }
  if (id == "double-well") return double_well_potential(dim);
  if (id == "linear") {
    Vector c = Vector::Zero(dim);
    c[0] = 1.0;
    if (params.contains("coefficients")) c = vector_param(params, "coefficients", dim, 0.0);
    return linear_potential(c);
  }
  if (id == "elliptic-exp" || id == "elliptic-square") return potential_family_from_json(j, dim)(1.0);
  throw std::invalid_argument("unknown potential id '" + id + "'");
}

std::vector<std::string> builtin_problem_names() {
  return {"quadratic", "double-well", "shifted-double-well", "elliptic-exp", "elliptic-square"};
}

Problem builtin_problem(const std::string& name) {
  if (name == "quadratic") {
    return problem_from_json(json{{"name", name}, {"dim", 1}, {"v1", {{"id", "quadratic"}}}, {"v2", {{"id", "zero"}}}});
  }
  if (name == "double-well") {
    return problem_from_json(json{{"name", name}, {"dim", 1}, {"v1", {{"id", "double-well"}}}, {"v2", {{"id", "zero"}}}});
  }
  if (name == "shifted-double-well") {
    return problem_from_json(
        json{{"name", name}, {"dim", 1}, {"v1", {{"id", "double-well"}}}, {"v2", {{"id", "linear"}}}});
  }
  if (name == "elliptic-exp" || name == "elliptic-square") {
    return problem_from_json(json{{"name", name},
                                  {"dim", 1},
                                  {"v1", {{"id", name}}},
                                  {"v2", {{"id", "quadratic"}}},
                                  {"search", {{"half_width", 4.0}}}});
  }
  throw std::invalid_argument("unknown builtin problem '" + name + "'");
}

Problem problem_from_json(const json& j) {
  Problem p;
  p.name = j.value("name", std::string("custom"));
  p.dim = j.at("dim").get<int>();
  if (p.dim < 1) throw std::invalid_argument("problem dimension must be positive");
  p.v1_family = potential_family_from_json(j.at("v1"), p.dim);
  p.v1_limit = p.v1_family(0.0);
  p.v2 = potential_from_json(j.at("v2"), p.dim);
  const json search = j.contains("search") ? j.at("search") : json::object();
  p.search = MultistartConfig::box(p.dim, search.value("half_width", 3.0), search.value("starts", 64));
  p.search.seed = search.value("seed", p.search.seed);
  return p;
}

Problem load_problem(const std::string& spec) {
  for (const auto& name : builtin_problem_names())
    if (name == spec) return builtin_problem(spec);
  std::ifstream in(spec);
  if (!in) throw std::invalid_argument("unknown problem '" + spec + "' (not a builtin, file not readable)");
  std::stringstream buf;
  buf << in.rdbuf();
  return problem_from_json(json::parse(buf.str()));
}

}  // namespace klgauss
