#ifndef FINSLERHJ_CLI_HPP_
#define FINSLERHJ_CLI_HPP_

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "finslerhj/eikonal.hpp"
#include "finslerhj/evolution.hpp"
#include "finslerhj/expression.hpp"
#include "finslerhj/io.hpp"
#include "finslerhj/stationary.hpp"
#include "finslerhj/verify.hpp"

namespace finslerhj::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr char kVersion[] = "0.1.0";

enum ExitCode { kOk = 0, kVerificationFailed = 1, kSchemaError = 2, kSolverError = 3 };

//! Malformed configuration (unknown key, wrong type, missing file).
class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

struct RunOptions {
  //! Empty: config output.directory, then $FINSLERHJ_OUT, then "out".
  std::string out_dir;
  //! Directory relative file references are resolved against.
  fs::path base_dir = ".";
  //! Replaces the config's verify list when set.
  std::optional<std::vector<std::string>> verify;
  //! Field to verify instead of solving (verify subcommand).
  std::optional<fs::path> field;
  //! Expected problem type; mismatch is a schema error.
  std::string expect_type;
  std::ostream* log = &std::cout;
};

struct RunResult {
  int exit_code = kOk;
  std::vector<VerificationReport> reports;
  std::vector<fs::path> files;
  fs::path out_dir;
  std::string message;
};

namespace detail {

inline void AllowKeys(json const& j, std::string const& where,
                      std::set<std::string> const& keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.count(it.key())) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

inline json const& Require(json const& j, std::string const& key, std::string const& where) {
  if (!j.contains(key)) throw ConfigError(where + " needs '" + key + "'");
  return j.at(key);
}

inline double Number(json const& j, std::string const& where) {
  if (j.is_string() && (j == "inf" || j == "+inf")) return kInf;
  if (!j.is_number()) throw ConfigError(where + " must be a number");
  return j.get<double>();
}

inline double NumberOr(json const& j, std::string const& key, double fallback,
                       std::string const& where) {
  return j.contains(key) ? Number(j.at(key), where + "." + key) : fallback;
}

inline std::string String(json const& j, std::string const& where) {
  if (j.is_number()) return j.dump();
  if (!j.is_string()) throw ConfigError(where + " must be a string");
  return j.get<std::string>();
}

inline Point2 PointOf(json const& j, std::string const& where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(where + " must be [x1, x2]");
  return {Number(j[0], where), Number(j[1], where)};
}

inline Expression ParseExpr(json const& j, std::string const& where,
                            std::set<std::string> const& vars) {
  try {
    return Expression::Parse(String(j, where), vars);
  } catch (ConfigError const&) {
    throw;
  } catch (InputError const& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline fs::path ExistingFile(json const& j, fs::path const& base, std::string const& where) {
  fs::path p = String(j, where);
  if (p.is_relative()) p = base / p;
  if (!fs::exists(p)) throw ConfigError(where + ": file not found: " + p.string());
  return p;
}

inline ExprEnv SpaceEnv(Point2 const& x) {
  ExprEnv e;
  e.x1 = x[0];
  e.x2 = x[1];
  return e;
}

inline void ValidateMetric(json const& m, std::string const& where) {
  std::string const kind = String(Require(m, "kind", where), where + ".kind");
  if (kind == "euclidean") {
    AllowKeys(m, where, {"kind"});
  } else if (kind == "riemannian") {
    AllowKeys(m, where, {"kind", "matrix"});
    auto const& a = Require(m, "matrix", where);
    if (!a.is_array() || a.size() != 2 || !a[0].is_array() || !a[1].is_array() ||
        a[0].size() != 2 || a[1].size() != 2) {
      throw ConfigError(where + ".matrix must be a 2x2 array of expressions");
    }
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) ParseExpr(a[r][c], where + ".matrix", {"x1", "x2"});
    }
  } else if (kind == "weighted-p") {
    AllowKeys(m, where, {"kind", "p", "weights"});
    Number(Require(m, "p", where), where + ".p");
    auto const& w = Require(m, "weights", where);
    if (!w.is_array() || w.size() != 2) throw ConfigError(where + ".weights must have 2 entries");
    for (auto const& e : w) ParseExpr(e, where + ".weights", {"x1", "x2"});
  } else if (kind == "scaled") {
    AllowKeys(m, where, {"kind", "base", "factor"});
    ValidateMetric(Require(m, "base", where), where + ".base");
    ParseExpr(Require(m, "factor", where), where + ".factor", {"x1", "x2"});
  } else {
    throw ConfigError(where + ".kind must be euclidean, riemannian, weighted-p or scaled");
  }
}

inline NormField2 BuildMetric(json const& m, Box<2> const& box) {
  std::string const kind = m.at("kind").get<std::string>();
  if (kind == "euclidean") return NormField2::Euclidean(box);
  if (kind == "riemannian") {
    auto const& a = m.at("matrix");
    std::array<Expression, 4> e{ParseExpr(a[0][0], "matrix", {"x1", "x2"}),
                                ParseExpr(a[0][1], "matrix", {"x1", "x2"}),
                                ParseExpr(a[1][0], "matrix", {"x1", "x2"}),
                                ParseExpr(a[1][1], "matrix", {"x1", "x2"})};
    return NormField2::Riemannian(box, [e](Point2 const& x) {
      ExprEnv const env = SpaceEnv(x);
      NormField2::Matrix mat;
      mat << e[0](env), e[1](env), e[2](env), e[3](env);
      return mat;
    });
  }
  if (kind == "weighted-p") {
    auto const w0 = ParseExpr(m.at("weights")[0], "weights", {"x1", "x2"});
    auto const w1 = ParseExpr(m.at("weights")[1], "weights", {"x1", "x2"});
    return NormField2::WeightedP(box, Number(m.at("p"), "p"), [w0, w1](Point2 const& x) {
      ExprEnv const env = SpaceEnv(x);
      return Vec2{w0(env), w1(env)};
    });
  }
  auto const c = ParseExpr(m.at("factor"), "factor", {"x1", "x2"});
  return NormField2::Scaled(BuildMetric(m.at("base"), box),
                            [c](Point2 const& x) { return c(SpaceEnv(x)); });
}

struct GridSpec {
  Box<2> bounds;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::optional<Expression> mask;
  std::optional<fs::path> raster;
};

inline GridSpec ParseGrid(json const& g, fs::path const& base) {
  AllowKeys(g, "grid", {"bounds", "resolution", "mask", "mask_raster"});
  GridSpec s;
  auto const& b = Require(g, "bounds", "grid");
  if (!b.is_array() || b.size() != 4) {
    throw ConfigError("grid.bounds must be [x1min, x2min, x1max, x2max]");
  }
  s.bounds = {{Number(b[0], "grid.bounds"), Number(b[1], "grid.bounds")},
              {Number(b[2], "grid.bounds"), Number(b[3], "grid.bounds")}};
  if (!(s.bounds.lo[0] < s.bounds.hi[0] && s.bounds.lo[1] < s.bounds.hi[1])) {
    throw ConfigError("grid.bounds must have min < max on both axes");
  }
  auto const& r = Require(g, "resolution", "grid");
  auto count = [](json const& v) {
    if (!v.is_number_integer() || v.get<long>() < 3) {
      throw ConfigError("grid.resolution entries must be integers >= 3");
    }
    return static_cast<std::size_t>(v.get<long>());
  };
  if (r.is_array()) {
    if (r.size() != 2) throw ConfigError("grid.resolution must be n or [nx, ny]");
    s.nx = count(r[0]);
    s.ny = count(r[1]);
  } else {
    s.nx = s.ny = count(r);
  }
  if (g.contains("mask") && g.contains("mask_raster")) {
    throw ConfigError("grid takes mask or mask_raster, not both");
  }
  if (g.contains("mask")) s.mask = ParseExpr(g.at("mask"), "grid.mask", {"x1", "x2"});
  if (g.contains("mask_raster")) s.raster = ExistingFile(g.at("mask_raster"), base, "grid.mask_raster");
  return s;
}

inline GridDomain BuildGrid(GridSpec const& s) {
  if (s.mask) {
    Expression const e = *s.mask;
    // Interior where the mask expression is negative.
    return GridDomain::Masked(s.bounds, s.nx, s.ny,
                              [e](Point2 const& x) { return e(SpaceEnv(x)) < 0.0; });
  }
  if (s.raster) {
    auto const f = FieldFromCsv(ReadFile(*s.raster));
    if (f.field.nx() != s.nx || f.field.ny() != s.ny) {
      throw ConfigError("mask raster resolution differs from grid.resolution");
    }
    std::vector<bool> inside(f.field.size());
    for (std::size_t k = 0; k < inside.size(); ++k) inside[k] = f.field[k] != 0.0;
    return GridDomain::FromRaster(s.bounds, s.nx, s.ny, inside);
  }
  return GridDomain::Rectangle(s.bounds, s.nx, s.ny);
}

inline std::set<std::string> const& KnownChecks() {
  static std::set<std::string> const names = [] {
    std::set<std::string> out;
    for (auto const& [k, v] : CheckRegistry()) out.insert(k);
    return out;
  }();
  return names;
}

//! Full schema pass; throws ConfigError on the first problem.
inline void ValidateConfig(json const& c, fs::path const& base) {
  AllowKeys(c, "config", {"metric", "grid", "x0", "stencil", "problem", "verify", "output"});
  if (c.contains("metric")) ValidateMetric(c.at("metric"), "metric");
  ParseGrid(Require(c, "grid", "config"), base);
  if (c.contains("x0")) PointOf(c.at("x0"), "x0");
  if (c.contains("stencil")) {
    auto const& s = c.at("stencil");
    if (!s.is_number_integer() || (s != 8 && s != 16 && s != 32)) {
      throw ConfigError("stencil must be 8, 16 or 32");
    }
  }
  if (c.contains("verify")) {
    auto const& v = c.at("verify");
    if (!v.is_array()) throw ConfigError("verify must be an array of check names");
    for (auto const& n : v) {
      if (!n.is_string() || !KnownChecks().count(n.get<std::string>())) {
        throw ConfigError("unknown check " + n.dump());
      }
    }
  }
  if (c.contains("output")) {
    auto const& o = c.at("output");
    AllowKeys(o, "output", {"directory", "formats"});
    if (o.contains("directory")) String(o.at("directory"), "output.directory");
    if (o.contains("formats")) {
      for (auto const& f : o.at("formats")) {
        if (f != "csv" && f != "json") throw ConfigError("output.formats entries are csv or json");
      }
    }
  }
  auto const& p = Require(c, "problem", "config");
  std::string const type = String(Require(p, "type", "problem"), "problem.type");
  if (type == "eikonal") {
    AllowKeys(p, "problem", {"type", "boundary", "waive_lipschitz"});
    auto const& b = Require(p, "boundary", "problem");
    AllowKeys(b, "problem.boundary", {"constant", "expression", "csv"});
    if (b.size() != 1) throw ConfigError("problem.boundary takes exactly one of constant, expression, csv");
    if (b.contains("constant")) Number(b.at("constant"), "problem.boundary.constant");
    if (b.contains("expression")) ParseExpr(b.at("expression"), "problem.boundary.expression", {"x1", "x2", "d"});
    if (b.contains("csv")) ExistingFile(b.at("csv"), base, "problem.boundary.csv");
  } else if (type == "stationary") {
    AllowKeys(p, "problem", {"type", "builtin", "a", "b", "f", "f_range", "radii", "hamiltonian",
                             "k0", "k1", "lower", "upper", "lipschitz", "certificate",
                             "coercivity", "tol", "max_sweeps", "jacobi", "threads", "stability"});
    if (p.contains("builtin") == p.contains("hamiltonian")) {
      throw ConfigError("problem needs exactly one of builtin, hamiltonian");
    }
    if (p.contains("builtin")) {
      static std::set<std::string> const ids{"ex1", "ex2", "ex3", "ex4", "ex5"};
      if (!ids.count(String(p.at("builtin"), "problem.builtin"))) {
        throw ConfigError("problem.builtin must be one of ex1..ex5");
      }
    } else {
      ParseExpr(p.at("hamiltonian"), "problem.hamiltonian", {"x1", "x2", "t", "d"});
    }
    if (p.contains("f")) ParseExpr(p.at("f"), "problem.f", {"x1", "x2", "d"});
    if (p.contains("certificate")) {
      auto const& ce = p.at("certificate");
      AllowKeys(ce, "problem.certificate", {"omega", "c"});
      ParseExpr(Require(ce, "omega", "problem.certificate"), "problem.certificate.omega", {"s", "r"});
    }
    if (p.contains("coercivity")) {
      auto const v = String(p.at("coercivity"), "problem.coercivity");
      if (v != "uniform" && v != "locally-uniform" && v != "none") {
        throw ConfigError("problem.coercivity must be uniform, locally-uniform or none");
      }
    }
    if (p.contains("stability")) {
      auto const& s = p.at("stability");
      AllowKeys(s, "problem.stability", {"shift", "hamiltonian", "k0", "k1"});
      if (s.contains("shift") == s.contains("hamiltonian")) {
        throw ConfigError("problem.stability needs exactly one of shift, hamiltonian");
      }
      if (s.contains("hamiltonian")) {
        ParseExpr(s.at("hamiltonian"), "problem.stability.hamiltonian", {"x1", "x2", "t", "d"});
      }
    }
  } else if (type == "evolution") {
    AllowKeys(p, "problem", {"type", "hamiltonian", "initial", "T", "cfl", "dt", "stride",
                             "full_history", "lipschitz_m", "k0", "k1", "certificate",
                             "comparison_shift", "monotonicity", "threads"});
    ParseExpr(Require(p, "hamiltonian", "problem"), "problem.hamiltonian", {"x1", "x2", "t", "m", "d"});
    auto const& init = Require(p, "initial", "problem");
    if (init.is_object()) {
      AllowKeys(init, "problem.initial", {"csv"});
      ExistingFile(Require(init, "csv", "problem.initial"), base, "problem.initial.csv");
    } else {
      ParseExpr(init, "problem.initial", {"x1", "x2", "d"});
    }
    Number(Require(p, "T", "problem"), "problem.T");
    if (p.contains("certificate")) {
      auto const& ce = p.at("certificate");
      AllowKeys(ce, "problem.certificate", {"omega", "c"});
      ParseExpr(Require(ce, "omega", "problem.certificate"), "problem.certificate.omega", {"s", "d", "r"});
    }
    if (p.contains("monotonicity")) {
      AllowKeys(p.at("monotonicity"), "problem.monotonicity", {"shift", "initial_shift"});
    }
  } else if (type == "distance") {
    AllowKeys(p, "problem", {"type", "seeds", "quadrature", "cutoff"});
    auto const& s = Require(p, "seeds", "problem");
    if (!s.is_array() || s.empty()) throw ConfigError("problem.seeds must be a non-empty array");
    for (auto const& e : s) {
      if (!e.is_array() || (e.size() != 2 && e.size() != 3)) {
        throw ConfigError("problem.seeds entries are [x1, x2] or [x1, x2, value]");
      }
    }
    if (p.contains("quadrature")) {
      auto const q = String(p.at("quadrature"), "problem.quadrature");
      if (q != "midpoint" && q != "simpson") throw ConfigError("problem.quadrature is midpoint or simpson");
    }
  } else {
    throw ConfigError("problem.type must be eikonal, stationary, evolution or distance");
  }
}

inline std::vector<std::string> DefaultChecks(std::string const& type) {
  if (type == "eikonal") return {"eikonal-boundary", "eikonal-lipschitz", "ridge"};
  if (type == "stationary") return {"stationary-bounds", "stationary-lipschitz"};
  if (type == "evolution") return {"evolution-envelope"};
  return {};
}

//! Everything a run builds from a config, kept alive for the checks.
struct Built {
  json config;
  std::string type;
  GridSpec grid_spec;
  std::unique_ptr<GridDomain> grid;
  std::unique_ptr<NormField2> metric;
  int stencil = 16;
  Point2 x0{0.0, 0.0};
  std::unique_ptr<DistanceFrom> from_x0;

  DistanceFrom const& D() {
    if (!from_x0) {
      DistanceOptions o;
      o.stencil_order = stencil;
      from_x0 = std::make_unique<DistanceFrom>(*metric, *grid, x0, o);
    }
    return *from_x0;
  }

  //! f(x) for an expression over x1, x2 (and d when used).
  std::function<double(Point2 const&)> Spatial(Expression const& e) {
    if (e.Uses("d")) {
      DistanceFrom const d = D();
      return [e, d](Point2 const& x) {
        ExprEnv env = SpaceEnv(x);
        env.d = d(x);
        return e(env);
      };
    }
    return [e](Point2 const& x) { return e(SpaceEnv(x)); };
  }
};

class Writer {
 public:
  Writer(fs::path dir, Box<2> bounds, bool csv, bool json_out)
      : dir_(std::move(dir)), bounds_(bounds), csv_(csv), json_(json_out) {}

  void Field(std::string const& name, ScalarField const& f) {
    if (!csv_) return;
    Put(name, FieldToCsv(f, bounds_));
  }
  void Json(std::string const& name, json const& j) {
    if (!json_) return;
    Put(name, j.dump(2) + "\n");
  }
  std::vector<fs::path> const& files() const { return files_; }
  std::vector<std::pair<std::string, std::string>> const& hashes() const { return hashes_; }
  fs::path const& dir() const { return dir_; }

 private:
  void Put(std::string const& name, std::string const& content) {
    WriteFile(dir_ / name, content);
    files_.push_back(dir_ / name);
    hashes_.emplace_back(name, Fnv1a(content));
  }

  fs::path dir_;
  Box<2> bounds_;
  bool csv_;
  bool json_;
  std::vector<fs::path> files_;
  std::vector<std::pair<std::string, std::string>> hashes_;
};

inline json SolveInfo(VerificationReport const& r) { return ToJson(r); }

inline StationaryHamiltonian BuildStationary(Built& b, json const& p, SuiteContext& ctx,
                                             std::optional<BuiltinProblem>& builtin) {
  if (p.contains("builtin")) {
    std::string const id = p.at("builtin").get<std::string>();
    auto const& d = b.D();
    if (id == "ex1") {
      builtin = MakeEx1(NumberOr(p, "a", 3.0, "problem"), d);
    } else if (id == "ex2") {
      builtin = MakeEx2(d);
    } else if (id == "ex3") {
      builtin = MakeEx3(NumberOr(p, "a", 1.0, "problem"), NumberOr(p, "b", 2.0, "problem"), d);
    } else if (id == "ex4") {
      std::vector<double> radii{1.0, 2.0, 4.0};
      if (p.contains("radii")) {
        radii.clear();
        for (auto const& r : p.at("radii")) radii.push_back(Number(r, "problem.radii"));
      }
      builtin = MakeEx4(d, radii);
    } else {
      auto const f = b.Spatial(ParseExpr(p.contains("f") ? p.at("f") : json("cos(d)"),
                                         "problem.f", {"x1", "x2", "d"}));
      auto range = SampleRange(*b.grid, f);
      if (p.contains("f_range")) {
        auto const& r = p.at("f_range");
        range = {Number(r.at(0), "problem.f_range"), Number(r.at(1), "problem.f_range")};
      }
      builtin = MakeEx5(f, range.first, range.second);
    }
    builtin->x0 = b.x0;
    ctx.lower = builtin->lower;
    ctx.upper = builtin->upper;
    ctx.lipschitz = builtin->lipschitz;
    return builtin->hamiltonian;
  }
  auto const e = ParseExpr(p.at("hamiltonian"), "problem.hamiltonian", {"x1", "x2", "t", "d"});
  StationaryHamiltonian h;
  h.name = e.source();
  std::optional<DistanceFrom> d;
  if (e.Uses("d")) d = b.D();
  h.eval = [e, d](Point2 const& x, double t) {
    ExprEnv env = SpaceEnv(x);
    env.t = t;
    if (d) env.d = (*d)(x);
    return e(env);
  };
  auto const range = SampleRange(*b.grid, [&](Point2 const& x) { return h(x, 0.0); });
  h.k0 = NumberOr(p, "k0", range.first, "problem");
  h.k1 = NumberOr(p, "k1", range.second, "problem");
  if (p.contains("certificate")) {
    auto const& ce = p.at("certificate");
    auto const om = ParseExpr(ce.at("omega"), "problem.certificate.omega", {"s", "r"});
    h.certificate = ConditionACertificate{[om](double s, double r) {
                                            ExprEnv env;
                                            env.s = s;
                                            env.r = r;
                                            return om(env);
                                          },
                                          NumberOr(ce, "c", 0.0, "problem.certificate")};
  }
  std::string const co = p.contains("coercivity") ? p.at("coercivity").get<std::string>() : "uniform";
  h.coercivity = co == "uniform"           ? CoercivityClass::kUniform
                 : co == "locally-uniform" ? CoercivityClass::kLocallyUniform
                                           : CoercivityClass::kNone;
  if (p.contains("lower")) ctx.lower = Number(p.at("lower"), "problem.lower");
  if (p.contains("upper")) ctx.upper = Number(p.at("upper"), "problem.upper");
  if (p.contains("lipschitz")) {
    ctx.lipschitz = LipschitzRule{false, Number(p.at("lipschitz"), "problem.lipschitz"), {}};
  }
  return h;
}

inline EvolutionHamiltonian EvolutionFromExpr(Built& b, Expression const& e, double lip) {
  EvolutionHamiltonian h;
  h.name = e.source();
  std::optional<DistanceFrom> d;
  if (e.Uses("d")) d = b.D();
  h.eval = [e, d](double t, Point2 const& x, double m) {
    ExprEnv env = SpaceEnv(x);
    env.t = t;
    env.m = m;
    if (d) env.d = (*d)(x);
    return e(env);
  };
  h.lipschitz_m = lip;
  return h;
}

inline EvolutionHamiltonian ShiftedEvolution(EvolutionHamiltonian const& h, double c) {
  EvolutionHamiltonian out = h;
  auto base = h.eval;
  out.eval = [base, c](double t, Point2 const& x, double m) { return base(t, x, m) + c; };
  out.name = h.name + "+shift";
  return out;
}

inline int Status(std::vector<VerificationReport> const& reports) {
  for (auto const& r : reports) {
    if (!r.pass) return kVerificationFailed;
  }
  return kOk;
}

}  // namespace detail

//! Validates, solves, verifies and writes artifacts. Exceptions propagate;
//! `Main` maps them to exit codes.
inline RunResult Run(json const& config, RunOptions const& opts) {
  using namespace detail;
  auto const t_start = std::chrono::steady_clock::now();
  ValidateConfig(config, opts.base_dir);
  Built b;
  b.config = config;
  auto const& p = config.at("problem");
  b.type = p.at("type").get<std::string>();
  if (!opts.expect_type.empty() && b.type != opts.expect_type) {
    throw ConfigError("subcommand expects problem.type " + opts.expect_type + ", config has " + b.type);
  }
  b.grid_spec = ParseGrid(config.at("grid"), opts.base_dir);
  b.grid = std::make_unique<GridDomain>(BuildGrid(b.grid_spec));
  b.metric = std::make_unique<NormField2>(
      BuildMetric(config.contains("metric") ? config.at("metric") : json{{"kind", "euclidean"}},
                  b.grid_spec.bounds));
  if (config.contains("stencil")) b.stencil = config.at("stencil").get<int>();
  if (config.contains("x0")) b.x0 = PointOf(config.at("x0"), "x0");
  GridDomain const& g = *b.grid;
  NormField2 const& nf = *b.metric;

  std::vector<std::string> checks = DefaultChecks(b.type);
  if (config.contains("verify")) checks = config.at("verify").get<std::vector<std::string>>();
  if (opts.verify) checks = *opts.verify;
  for (auto const& n : checks) {
    if (!KnownChecks().count(n)) throw ConfigError("unknown check " + n);
  }
  auto wants = [&](std::string const& n) {
    return std::find(checks.begin(), checks.end(), n) != checks.end();
  };

  fs::path out = opts.out_dir;
  bool csv = true;
  bool js = true;
  if (config.contains("output")) {
    auto const& o = config.at("output");
    if (out.empty() && o.contains("directory")) {
      out = o.at("directory").get<std::string>();
      if (out.is_relative()) out = opts.base_dir / out;
    }
    if (o.contains("formats")) {
      auto const f = o.at("formats").get<std::vector<std::string>>();
      csv = std::find(f.begin(), f.end(), "csv") != f.end();
      js = std::find(f.begin(), f.end(), "json") != f.end();
    }
  }
  if (out.empty()) {
    char const* env = std::getenv("FINSLERHJ_OUT");
    out = env && *env ? fs::path(env) : fs::path("out");
  }
  Writer w(out, b.grid_spec.bounds, csv, js);

  SuiteContext ctx;
  ctx.metric = &nf;
  ctx.grid = &g;
  ctx.x0 = b.x0;
  ctx.provenance = Fnv1a(config.dump());
  ctx.eikonal_options.stencil_order = b.stencil;
  ctx.stationary_options.stencil_order = b.stencil;

  // Storage the context points into.
  ScalarField u, u2, init, init2;
  BoundaryData boundary;
  StationaryHamiltonian hs, hs2;
  std::optional<BuiltinProblem> builtin;
  EvolutionHamiltonian he, he2;
  EvolutionSolution sol, sol_upper, sol_h2;
  json solve_info;
  std::ostream& log = *opts.log;
  auto load_field = [&](fs::path const& path) {
    auto f = FieldFromCsv(ReadFile(path));
    if (f.field.nx() != g.nx() || f.field.ny() != g.ny()) {
      throw ConfigError("field " + path.string() + " does not match the grid");
    }
    return f.field;
  };

  if (b.type == "distance") {
    std::vector<Seed> seeds;
    for (auto const& e : p.at("seeds")) {
      Point2 const x{Number(e[0], "seed"), Number(e[1], "seed")};
      if (!b.grid_spec.bounds.Contains(x)) throw InputError("seed outside the grid bounds");
      seeds.push_back({g.NearestNode(x), e.size() == 3 ? Number(e[2], "seed") : 0.0});
    }
    DistanceOptions o;
    o.stencil_order = b.stencil;
    o.cutoff = NumberOr(p, "cutoff", kInf, "problem");
    if (p.contains("quadrature") && p.at("quadrature") == "simpson") o.rule = QuadratureRule::kSimpson;
    auto const df = opts.field ? DistanceField{seeds, load_field(*opts.field), b.stencil, {}}
                               : ComputeDistanceField(nf, g, seeds, o);
    u = df.values;
    w.Field("distance.csv", df.values);
    json sj = json::array();
    for (auto const& s : df.seeds) sj.push_back({{"node", s.node}, {"value", s.value}});
    w.Json("distance.json", {{"bounds", {g.bounds().lo[0], g.bounds().lo[1], g.bounds().hi[0], g.bounds().hi[1]}},
                             {"resolution", {g.nx(), g.ny()}},
                             {"stencil_order", df.stencil_order},
                             {"seeds", sj},
                             {"unreachable", df.unreachable.size()}});
    ctx.eikonal = &u;
  } else if (b.type == "eikonal") {
    auto const& bd = p.at("boundary");
    if (bd.contains("constant")) {
      boundary = BoundaryData::Constant(g, Number(bd.at("constant"), "boundary"));
    } else if (bd.contains("expression")) {
      boundary = BoundaryData::FromFunction(
          g, b.Spatial(ParseExpr(bd.at("expression"), "boundary", {"x1", "x2", "d"})));
    } else {
      auto const f = load_field(ExistingFile(bd.at("csv"), opts.base_dir, "boundary.csv"));
      for (std::size_t k : g.boundary_nodes()) boundary.entries.push_back({k, f[k]});
    }
    EikonalOptions eo;
    eo.stencil_order = b.stencil;
    eo.waive_lipschitz = p.value("waive_lipschitz", false);
    if (opts.field) {
      u = load_field(*opts.field);
    } else {
      auto s = SolveEikonal(nf, g, boundary, eo);
      u = std::move(s.u);
      solve_info["boundary_check"] = ToJson(s.boundary_check);
      solve_info["unreachable"] = s.unreachable.size();
      w.Field("u.csv", u);
    }
    ctx.eikonal = &u;
    ctx.boundary = &boundary;
  } else if (b.type == "stationary") {
    if (!g.IsFullRectangle()) throw ConfigError("stationary problems run on the full rectangle (no mask)");
    hs = BuildStationary(b, p, ctx, builtin);
    ctx.hamiltonian = &hs;
    ctx.from_x0 = &b.D();
    StationaryOptions so;
    so.tol = NumberOr(p, "tol", so.tol, "problem");
    so.max_sweeps = static_cast<int>(NumberOr(p, "max_sweeps", so.max_sweeps, "problem"));
    so.jacobi = p.value("jacobi", false);
    so.threads = static_cast<unsigned>(NumberOr(p, "threads", 1, "problem"));
    if (opts.field) {
      u = load_field(*opts.field);
    } else {
      auto s = SolveStationary(hs, nf, g, so);
      u = std::move(s.u);
      solve_info = {{"sweeps", s.sweeps}, {"last_update", s.last_update},
                    {"k0", hs.k0}, {"k1", hs.k1}};
      w.Field("u.csv", u);
    }
    ctx.stationary = &u;
    if (wants("stationary-stability")) {
      auto const& st = Require(p, "stability", "problem (needed by stationary-stability)");
      if (st.contains("shift")) {
        hs2 = hs.Shifted(Number(st.at("shift"), "stability.shift"));
      } else {
        json sub = p;
        sub.erase("builtin");
        sub["hamiltonian"] = st.at("hamiltonian");
        for (auto const* k : {"k0", "k1"}) {
          if (st.contains(k)) sub[k] = st.at(k); else sub.erase(k);
        }
        SuiteContext scratch;
        std::optional<BuiltinProblem> none;
        hs2 = BuildStationary(b, sub, scratch, none);
      }
      u2 = SolveStationary(hs2, nf, g, so).u;
      w.Field("u2.csv", u2);
      ctx.hamiltonian2 = &hs2;
      ctx.stationary2 = &u2;
    }
  } else {
    auto const e = ParseExpr(p.at("hamiltonian"), "problem.hamiltonian", {"x1", "x2", "t", "m", "d"});
    he = EvolutionFromExpr(b, e, NumberOr(p, "lipschitz_m", 0.0, "problem"));
    auto const& in = p.at("initial");
    init = in.is_object() ? load_field(ExistingFile(in.at("csv"), opts.base_dir, "initial.csv"))
                          : g.Sample(b.Spatial(ParseExpr(in, "problem.initial", {"x1", "x2", "d"})));
    double const horizon = Number(p.at("T"), "problem.T");
    EvolutionOptions eo;
    eo.cfl = NumberOr(p, "cfl", eo.cfl, "problem");
    eo.dt = NumberOr(p, "dt", 0.0, "problem");
    eo.stride = static_cast<std::size_t>(NumberOr(p, "stride", 10, "problem"));
    eo.full_history = p.value("full_history", false);
    eo.threads = static_cast<unsigned>(NumberOr(p, "threads", 1, "problem"));
    sol = SolveEvolution(he, nf, g, init, horizon, eo);
    char name[64];
    for (std::size_t s = 0; s < sol.snapshots.size(); ++s) {
      std::snprintf(name, sizeof name, "snapshot_%05zu.csv", s);
      w.Field(name, sol.snapshots[s]);
    }
    w.Field("final.csv", sol.final_field);
    json times = sol.times;
    solve_info = {{"dt", sol.dt}, {"steps", sol.steps}, {"stride", sol.stride},
                  {"cfl", sol.cfl}, {"nu", sol.nu}, {"lipschitz_m", sol.lipschitz_m},
                  {"times", times}, {"horizon", sol.horizon}};
    ctx.evolution = &sol;
    ctx.initial = &init;
    ctx.evolution_hamiltonian = &he;
    double const lip = GraphLipschitz(init, nf, g, b.stencil, [](std::size_t) { return true; });
    auto const kk = EnvelopeConstants(he, g, horizon, lip);
    ctx.k0 = NumberOr(p, "k0", kk.first, "problem");
    ctx.k1 = NumberOr(p, "k1", kk.second, "problem");
    solve_info["k0"] = *ctx.k0;
    solve_info["k1"] = *ctx.k1;
    if (p.contains("certificate")) {
      auto const& ce = p.at("certificate");
      auto const om = ParseExpr(ce.at("omega"), "certificate.omega", {"s", "d", "r"});
      ctx.evolution_certificate = EvolutionCertificate{
          [om](double s, double d, double r) {
            ExprEnv env;
            env.s = s;
            env.d = d;
            env.r = r;
            return om(env);
          },
          NumberOr(ce, "c", 0.0, "certificate")};
    }
    if (wants("evolution-comparison")) {
      ScalarField upper = init;
      double const shift = NumberOr(p, "comparison_shift", 0.5, "problem");
      for (std::size_t k = 0; k < upper.size(); ++k) upper[k] += shift;
      eo.dt = sol.dt;
      sol_upper = SolveEvolution(he, nf, g, upper, horizon, eo);
      ctx.evolution_upper = &sol_upper;
    }
    if (wants("evolution-monotonicity")) {
      json const mono = p.contains("monotonicity") ? p.at("monotonicity") : json::object();
      double const shift = NumberOr(mono, "shift", 0.05, "monotonicity");
      double const ishift = NumberOr(mono, "initial_shift", 0.0, "monotonicity");
      he2 = ShiftedEvolution(he, shift);
      init2 = init;
      for (std::size_t k = 0; k < init2.size(); ++k) init2[k] -= ishift;
      eo.dt = sol.dt;
      // Same time grid for both runs; H + shift has the same m-Lipschitz bound.
      he2.lipschitz_m = sol.lipschitz_m;
      sol_h2 = SolveEvolution(he2, nf, g, init2, horizon, eo);
      ctx.evolution_h2 = &sol_h2;
      ctx.evolution_hamiltonian2 = &he2;
      ctx.initial2 = &init2;
    }
  }
  auto const t_solved = std::chrono::steady_clock::now();

  RunResult res;
  res.reports = RunSuite(checks, ctx);
  auto const t_verified = std::chrono::steady_clock::now();
  for (auto const& r : res.reports) {
    log << (r.pass ? "PASS " : "FAIL ") << r.check << "\n";
  }
  if (!solve_info.is_null()) w.Json("solve.json", solve_info);
  w.Json("reports.json", ToJson(res.reports));

  json manifest;
  manifest["version"] = kVersion;
  manifest["config_hash"] = ctx.provenance;
  manifest["problem"] = b.type;
  manifest["timings"] = {
      {"solve_s", std::chrono::duration<double>(t_solved - t_start).count()},
      {"verify_s", std::chrono::duration<double>(t_verified - t_solved).count()}};
  manifest["files"] = json::array();
  for (auto const& [name, hash] : w.hashes()) {
    manifest["files"].push_back({{"path", name}, {"fnv1a", hash}});
  }
  WriteFile(out / "manifest.json", manifest.dump(2) + "\n");
  res.files = w.files();
  res.files.push_back(out / "manifest.json");
  res.out_dir = out;
  res.exit_code = Status(res.reports);
  if (res.exit_code != kOk) {
    res.message = "verification failed; reports in " + (out / "reports.json").string();
    log << res.message << "\n";
  }
  return res;
}

//! One row per built-in problem.
inline json BuiltinsJson() {
  return json::array({
      {{"id", "ex1"}, {"hamiltonian", "min(t, a) - cos d(x0,x)"}, {"params", {"a > 2", "x0"}},
       {"lower", -1}, {"upper", 1}, {"lipschitz", "a"}},
      {{"id", "ex2"}, {"hamiltonian", "t - cos d(x0,x)"}, {"params", {"x0"}},
       {"lower", -1}, {"upper", 1}, {"lipschitz", "2"}},
      {{"id", "ex3"}, {"hamiltonian", "min(t, 1) - (a + d(x0,x)) / (b + d(x0,x))"},
       {"params", {"0 < a < b", "x0"}}, {"lower", "a/b"}, {"upper", 1}, {"lipschitz", "1 - a/b"}},
      {{"id", "ex4"}, {"hamiltonian", "(1 + 2|t|) / (1 + |t| + d(x0,x))"}, {"params", {"x0"}},
       {"lower", -1}, {"upper", 0}, {"lipschitz", "R in B(x0, R/4)"}},
      {{"id", "ex5"}, {"hamiltonian", "t - f(x)"}, {"params", {"f bounded"}},
       {"lower", "inf f"}, {"upper", "sup f"}, {"lipschitz", "sup f - inf f"}},
  });
}

inline void PrintBuiltins(std::ostream& out, bool as_json, std::string const& id) {
  json rows = json::array();
  for (auto const& r : BuiltinsJson()) {
    if (id.empty() || r.at("id") == id) rows.push_back(r);
  }
  if (rows.empty()) throw ConfigError("no builtin named " + id);
  if (as_json) {
    out << rows.dump(2) << "\n";
    return;
  }
  auto cell = [](json const& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s %-42s %-8s %-8s %s\n", "id", "H(x, t)", "lower", "upper",
                "lipschitz");
  out << buf;
  for (auto const& r : rows) {
    std::snprintf(buf, sizeof buf, "%-4s %-42s %-8s %-8s %s\n", cell(r.at("id")).c_str(),
                  cell(r.at("hamiltonian")).c_str(), cell(r.at("lower")).c_str(),
                  cell(r.at("upper")).c_str(), cell(r.at("lipschitz")).c_str());
    out << buf;
  }
}

namespace detail {

inline json LoadConfig(std::string const& path, fs::path& base) {
  fs::path const p = path;
  if (!fs::exists(p)) throw ConfigError("config not found: " + path);
  base = p.has_parent_path() ? p.parent_path() : fs::path(".");
  try {
    return json::parse(ReadFile(p));
  } catch (json::parse_error const& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

inline std::vector<double> SplitNumbers(std::string const& s, std::size_t n, char const* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (std::exception const&) {
      throw ConfigError(std::string("bad number in ") + what + ": " + item);
    }
  }
  if (out.size() != n) throw ConfigError(std::string(what) + " needs " + std::to_string(n) + " numbers");
  return out;
}

}  // namespace detail

//! Entry point of the finslerhj executable.
inline int Main(int argc, char** argv, std::ostream& out = std::cout,
                std::ostream& err = std::cerr) {
  CLI::App app{"Viscosity solutions of eikonal and Hamilton-Jacobi equations on Finsler grids"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  struct Common {
    std::string config;
    std::string out_dir;
    std::vector<std::string> verify;
  };
  auto add_common = [](CLI::App* sub, Common& c, bool need_config) {
    auto* opt = sub->add_option("--config", c.config, "problem config (JSON)");
    if (need_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", c.out_dir, "output directory (default: config, $FINSLERHJ_OUT, ./out)");
    sub->add_option("--verify", c.verify, "checks to run (comma separated)")->delimiter(',');
  };

  Common eik, sta, evo, dist, ver;
  auto* s_eik = app.add_subcommand("solve-eikonal", "solve ||du||_x = 1 with boundary data");
  add_common(s_eik, eik, true);

  auto* s_sta = app.add_subcommand("solve-stationary", "solve u + H(x, ||du||_x) = 0");
  add_common(s_sta, sta, false);
  std::string builtin, x0s = "0,0", bounds = "-4,-4,4,4", f_expr;
  int res = 201;
  double a = 3.0, bpar = 2.0;
  s_sta->add_option("--builtin", builtin, "ex1..ex5 instead of a config");
  s_sta->add_option("--x0", x0s, "x0 for d(x0, x)");
  s_sta->add_option("--bounds", bounds, "x1min,x2min,x1max,x2max");
  s_sta->add_option("--res", res, "nodes per axis");
  s_sta->add_option("--a", a, "parameter a (ex1, ex3)");
  s_sta->add_option("--b", bpar, "parameter b (ex3)");
  s_sta->add_option("--f", f_expr, "f(x) for ex5 (default cos(d))");

  auto* s_evo = app.add_subcommand("solve-evolution", "march u_t + H(t, x, ||u_x||_x) = 0");
  add_common(s_evo, evo, true);

  auto* s_dist = app.add_subcommand("distance", "Finsler distance field from seeds");
  add_common(s_dist, dist, true);

  auto* s_ver = app.add_subcommand("verify", "run checks on a config (optionally on a given field)");
  add_common(s_ver, ver, true);
  std::string field;
  s_ver->add_option("--field", field, "field CSV to verify instead of solving")->check(CLI::ExistingFile);

  auto* s_list = app.add_subcommand("list-builtins", "print the built-in stationary problems");
  bool as_json = false;
  std::string id;
  s_list->add_flag("--json", as_json, "machine-readable output");
  s_list->add_option("--id", id, "show one builtin");

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const& e) {
    int const code = app.exit(e, out, err);
    return code == 0 ? kOk : kSchemaError;
  }

  try {
    if (s_list->parsed()) {
      PrintBuiltins(out, as_json, id);
      return kOk;
    }
    RunOptions ro;
    ro.log = &out;
    json config;
    Common* c = nullptr;
    if (s_eik->parsed()) {
      c = &eik;
      ro.expect_type = "eikonal";
    } else if (s_sta->parsed()) {
      c = &sta;
      ro.expect_type = "stationary";
    } else if (s_evo->parsed()) {
      c = &evo;
      ro.expect_type = "evolution";
    } else if (s_dist->parsed()) {
      c = &dist;
      ro.expect_type = "distance";
    } else {
      c = &ver;
      if (!field.empty()) ro.field = field;
    }
    if (!c->config.empty()) {
      if (!builtin.empty()) throw ConfigError("give --builtin or --config, not both");
      config = detail::LoadConfig(c->config, ro.base_dir);
    } else if (!builtin.empty()) {
      auto const bb = detail::SplitNumbers(bounds, 4, "--bounds");
      auto const xx = detail::SplitNumbers(x0s, 2, "--x0");
      json prob = {{"type", "stationary"}, {"builtin", builtin}};
      if (builtin == "ex1" || builtin == "ex3") prob["a"] = a;
      if (builtin == "ex3") prob["b"] = bpar;
      if (builtin == "ex5" && !f_expr.empty()) prob["f"] = f_expr;
      config = {{"grid", {{"bounds", bb}, {"resolution", res}}}, {"x0", xx}, {"problem", prob}};
    } else {
      throw ConfigError("solve-stationary needs --config or --builtin");
    }
    ro.out_dir = c->out_dir;
    if (!c->verify.empty()) ro.verify = c->verify;
    auto const r = Run(config, ro);
    return r.exit_code;
  } catch (InputError const& e) {
    err << "input error: " << e.what() << "\n";
    return kSchemaError;
  } catch (nlohmann::json::exception const& e) {
    err << "config error: " << e.what() << "\n";
    return kSchemaError;
  } catch (Error const& e) {
    err << "solver error: " << e.what() << "\n";
    return kSolverError;
  } catch (std::exception const& e) {
    err << "error: " << e.what() << "\n";
    return kSolverError;
  }
}

}  // namespace finslerhj::cli

#endif  // FINSLERHJ_CLI_HPP_
