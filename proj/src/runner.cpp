#include "wot/runner.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "wot/cascade.hpp"
#include "wot/csv.hpp"
#include "wot/entropic.hpp"
#include "wot/error.hpp"
#include "wot/identities.hpp"
#include "wot/inequalities.hpp"

#ifndef WOT_VERSION
#define WOT_VERSION "0.0.0"
#endif

namespace wot {

namespace fs = std::filesystem;
using nlohmann::json;

std::string tool_version() { return WOT_VERSION; }

std::string_view to_string(JobKind kind) {
  switch (kind) {
    case JobKind::Solve: return "solve";
    case JobKind::VerifyMa: return "verify-ma";
    case JobKind::VerifyDual: return "verify-dual";
    case JobKind::VerifyBound: return "verify-bound";
    case JobKind::Cascade: return "cascade";
    case JobKind::Inequalities: return "inequalities";
    case JobKind::OracleCompare: return "oracle-compare";
  }
  return "?";
}

JobKind job_kind_from_string(std::string_view name) {
  for (auto k : {JobKind::Solve, JobKind::VerifyMa, JobKind::VerifyDual, JobKind::VerifyBound, JobKind::Cascade,
                 JobKind::Inequalities, JobKind::OracleCompare})
    if (to_string(k) == name) return k;
  throw Error(Errc::ConfigInvalid, "unknown job kind '" + std::string(name) + "'");
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(Errc::ConfigInvalid, msg); }

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) invalid(where + ": missing '" + key + "'");
  return j.at(key);
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) invalid(where + ": expected a number");
  return j.get<double>();
}

Vec as_vec(const json& j, const std::string& where) {
  if (!j.is_array()) invalid(where + ": expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = as_number(j[i], where);
  return v;
}

Mat as_mat(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) invalid(where + ": expected a nonempty matrix");
  const auto rows = j.size();
  const auto cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) invalid(where + ": expected a nonempty matrix");
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) invalid(where + ": ragged matrix");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = as_number(j[r][c], where);
  }
  return m;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(std::string("parameter '") + key + "' has the wrong type");
  }
}

GridPtr default_gh(int dim) {
  const int pts = dim == 1 ? 200 : dim == 2 ? 60 : dim == 3 ? 24 : 12;
  return make_grid(GridSpec{GridScheme::GaussHermiteTensor, dim, pts});
}

PotentialDensity parse_density(const std::string& name, const json& j, const fs::path& base) {
  const std::string where = "density '" + name + "'";
  const auto family = require(j, "family", where).get<std::string>();
  bool normalize_default = true;
  std::optional<PotentialDensity> d;
  if (family == "reference") {
    d = PotentialDensity::reference(static_cast<int>(as_number(require(j, "dim", where), where)));
    normalize_default = false;
  } else if (family == "gaussian") {
    d = PotentialDensity::gaussian(as_vec(require(j, "mean", where), where), as_mat(require(j, "cov", where), where));
    normalize_default = false;
  } else if (family == "mean-shift") {
    d = PotentialDensity::mean_shift(as_vec(require(j, "shift", where), where));
    normalize_default = false;
  } else if (family == "quadratic") {
    const Mat Q = as_mat(require(j, "Q", where), where);
    const Vec b = j.contains("b") ? as_vec(j["b"], where) : Vec::Zero(Q.rows());
    d = PotentialDensity::quadratic(Q, b, j.contains("c") ? as_number(j["c"], where) : 0.0);
  } else if (family == "separable") {
    std::vector<Polynomial1D> profiles;
    for (const auto& p : require(j, "profiles", where)) {
      const Vec c = as_vec(p, where);
      profiles.push_back(Polynomial1D{std::vector<double>(c.data(), c.data() + c.size())});
    }
    d = PotentialDensity::separable(std::move(profiles));
  } else if (family == "mixture") {
    std::vector<MixtureComponent> comps;
    for (const auto& c : require(j, "components", where))
      comps.push_back({as_number(require(c, "weight", where), where), as_mat(require(c, "B", where), where),
                       as_vec(require(c, "m", where), where)});
    d = PotentialDensity::mixture(std::move(comps));
  } else if (family == "tabulated") {
    fs::path p = require(j, "path", where).get<std::string>();
    if (p.is_relative()) p = base / p;
    d = load_tabulated_csv(p.string());
  } else {
    invalid(where + ": unknown family '" + family + "'");
  }
  if (get_or<bool>(j, "normalize", normalize_default)) {
    if (const auto* t = d->as_tabulated()) d = normalize(*d, *make_mesh(t->mesh));
    else d = normalize(*d, *default_gh(d->dim()));
  }
  return *d;
}

GridSpec parse_grid(const std::string& name, const json& j, std::uint64_t seed) {
  const std::string where = "grid '" + name + "'";
  GridSpec g;
  g.scheme = grid_scheme_from_string(get_or<std::string>(j, "scheme", "gauss-hermite"));
  g.dim = static_cast<int>(as_number(require(j, "dim", where), where));
  g.resolution = static_cast<int>(as_number(require(j, "resolution", where), where));
  g.truncation_radius = get_or<double>(j, "truncation_radius", g.truncation_radius);
  g.seed = get_or<std::uint64_t>(j, "seed", seed);
  if (g.dim < 1 || g.resolution < 1) invalid(where + ": dim and resolution must be positive");
  return g;
}

json grid_json(const GridSpec& g) {
  return {{"scheme", std::string(to_string(g.scheme))},
          {"dim", g.dim},
          {"resolution", g.resolution},
          {"truncation_radius", g.truncation_radius},
          {"seed", g.seed}};
}

void check_ref(const ExperimentConfig& c, const json& p, const char* key, bool grid, const std::string& where,
               bool required = true) {
  if (!p.contains(key)) {
    if (required) invalid(where + ": missing '" + key + "'");
    return;
  }
  if (!p[key].is_string()) invalid(where + ": '" + key + "' must name a " + (grid ? "grid" : "density"));
  const auto name = p[key].get<std::string>();
  if (grid ? !c.grids.count(name) : !c.densities.count(name))
    invalid(where + ": unknown " + (grid ? "grid" : "density") + " '" + name + "'");
}

void validate_job(const ExperimentConfig& c, const JobSpec& job) {
  const std::string where = "job '" + job.name + "'";
  const auto& p = job.params;
  switch (job.kind) {
    case JobKind::Solve:
    case JobKind::VerifyMa:
    case JobKind::VerifyDual:
    case JobKind::OracleCompare:
      check_ref(c, p, "rho", false, where);
      check_ref(c, p, "nu", false, where);
      check_ref(c, p, "grid", true, where);
      break;
    case JobKind::Cascade:
      check_ref(c, p, "rho", false, where);
      check_ref(c, p, "nu", false, where);
      if (p.contains("schedule")) {
        if (!p["schedule"].is_array()) invalid(where + ": schedule must be a list");
        for (const auto& s : p["schedule"]) {
          try {
            cascade_op_from_string(require(s, "op", where).get<std::string>());
          } catch (const Error& e) {
            invalid(where + ": " + e.what());
          }
          if (!require(s, "params", where).is_array()) invalid(where + ": stage params must be a list");
        }
      }
      break;
    case JobKind::VerifyBound:
      check_ref(c, p, "grid", true, where, false);
      if (!require(p, "cases", where).is_array()) invalid(where + ": cases must be a list");
      for (const auto& cs : p["cases"]) {
        check_ref(c, cs, "rho", false, where);
        check_ref(c, cs, "nu", false, where);
        as_number(require(cs, "c", where), where);
      }
      break;
    case JobKind::Inequalities:
      check_ref(c, p, "grid", true, where, false);
      check_ref(c, p, "mesh", true, where, false);
      for (const auto& d : get_or<std::vector<std::string>>(p, "densities", {}))
        if (!c.densities.count(d)) invalid(where + ": unknown density '" + d + "'");
      for (const auto& pr : get_or<std::vector<std::vector<std::string>>>(p, "pairs", {})) {
        if (pr.size() != 2) invalid(where + ": pairs must have two entries");
        for (const auto& d : pr)
          if (!c.densities.count(d)) invalid(where + ": unknown density '" + d + "'");
      }
      break;
  }
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char ch : s) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.') ? ch : '_';
  return out.empty() ? "job" : out;
}

std::string dump(const json& j) { return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n"; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::InvalidArgument, "cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_atomic(const fs::path& p, const std::string& content) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::JobFailed, "cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, p);
}

struct JobContext {
  const ExperimentConfig& cfg;
  std::uint64_t seed;
  fs::path run_dir;
  fs::path dir;
  JobOutcome& out;

  void write(const std::string& file, const std::string& content) {
    write_atomic(dir / file, content);
    out.files.push_back(
        {(fs::relative(dir, run_dir) / file).generic_string(), sha256_hex(content), content.size()});
  }
  const PotentialDensity& density(const json& p, const char* key) const {
    return cfg.densities.at(p.at(key).get<std::string>());
  }
  GridPtr grid(const json& p, const char* key, int dim) const {
    if (!p.contains(key)) return default_gh(dim);
    auto spec = cfg.grids.at(p.at(key).get<std::string>());
    if (spec.dim != dim) throw Error(Errc::DimensionMismatch, std::string("grid '") + p.at(key).get<std::string>() +
                                                                  "' has the wrong dimension");
    return make_grid(spec);
  }
};

struct Solved {
  TransportSolution solution;
  std::optional<EntropicResult> entropic;
};

Solved solve_pair(const std::string& method, const PotentialDensity& rho, const PotentialDensity& nu,
                  const GridPtr& grid) {
  if (rho.dim() != nu.dim() || rho.dim() != grid->dim())
    throw Error(Errc::DimensionMismatch, "densities and grid must share a dimension");
  const auto pair = gaussian_pair(rho, nu);
  if (method == "gaussian" || (method == "auto" && pair)) {
    if (!pair) throw Error(Errc::NoApplicableMethod, "pair is not Gaussian");
    return {solve_gaussian(*pair, grid), {}};
  }
  if (method == "quantile" || method == "1d" || (method == "auto" && rho.dim() == 1)) {
    if (rho.dim() != 1) throw Error(Errc::NoApplicableMethod, "quantile oracle needs a 1-D pair");
    return {solve_1d(rho, nu, grid), {}};
  }
  if (method == "separable" || (method == "auto" && rho.factors() && nu.factors()))
    return {solve_separable(rho, nu, grid), {}};
  if (method == "entropic" || method == "auto") {
    auto r = solve_entropic(rho, nu, grid);
    auto sol = r.solution;
    return {sol, std::move(r)};
  }
  throw Error(Errc::NoApplicableMethod, "unknown method '" + method + "'");
}

std::string solution_csv(const TransportSolution& s) {
  const int d = s.grid->dim();
  std::vector<std::string> header;
  for (int a = 0; a < d; ++a) header.push_back("x_" + std::to_string(a + 1));
  header.insert(header.end(), {"phi", "psi"});
  for (int a = 0; a < d; ++a) header.push_back("T_" + std::to_string(a + 1));
  for (int a = 0; a < d; ++a) header.push_back("S_" + std::to_string(a + 1));
  CsvTable t(header);
  for (std::size_t i = 0; i < s.grid->size(); ++i) {
    std::vector<std::string> row;
    const auto x = s.grid->node(i);
    for (int a = 0; a < d; ++a) row.push_back(format_double(x[a]));
    row.push_back(format_double(s.phi[i]));
    row.push_back(format_double(s.psi[i]));
    for (int a = 0; a < d; ++a) row.push_back(format_double(s.T(a, static_cast<Eigen::Index>(i))));
    for (int a = 0; a < d; ++a) row.push_back(format_double(s.S(a, static_cast<Eigen::Index>(i))));
    t.row(std::move(row));
  }
  return t.str();
}

bool run_solve(JobContext& ctx) {
  const auto& p = ctx.out.resolved;
  const auto& rho = ctx.density(p, "rho");
  const auto& nu = ctx.density(p, "nu");
  auto solved = solve_pair(p["method"].get<std::string>(), rho, nu, ctx.grid(p, "grid", rho.dim()));
  auto j = to_json(solved.solution);
  j["seed"] = ctx.seed;
  ctx.write("solution.json", dump(j));
  ctx.write("solution.csv", solution_csv(solved.solution));
  if (solved.entropic) ctx.write("entropic.csv", entropic_diagnostics_csv(*solved.entropic));
  ctx.out.summary["cost"] = solved.solution.cost;
  ctx.out.summary["solver"] = solved.solution.solver_tag;
  return true;
}

bool write_residuals(JobContext& ctx, const std::vector<ResidualReport>& reports) {
  auto table = residual_table();
  json arr = json::array();
  bool ok = true;
  for (const auto& r : reports) {
    append_row(table, r);
    arr.push_back(to_json(r));
    ok = ok && r.pass;
  }
  ctx.write("residuals.csv", table.str());
  ctx.write("residuals.json", dump(json{{"seed", ctx.seed}, {"reports", arr}}));
  ctx.out.summary["checks"] = reports.size();
  ctx.out.summary["all_pass"] = ok;
  return ok;
}

bool run_verify(JobContext& ctx, bool ma) {
  const auto& p = ctx.out.resolved;
  const auto& rho = ctx.density(p, "rho");
  const auto& nu = ctx.density(p, "nu");
  const auto grid = ctx.grid(p, "grid", rho.dim());
  const auto solved = solve_pair(p["method"].get<std::string>(), rho, nu, grid);
  ResidualOptions opts;
  opts.tol = p["tol"].get<double>();
  opts.richardson = p["richardson"].get<bool>();
  std::vector<ResidualReport> reports;
  if (ma) {
    const auto dir = p["direction"].get<std::string>();
    if (dir == "backward" || dir == "both")
      reports.push_back(monge_ampere_residual(MaDirection::Backward, solved.solution, rho, nu, opts));
    if (dir == "forward" || dir == "both")
      reports.push_back(monge_ampere_residual(MaDirection::Forward, solved.solution, rho, nu, opts));
  } else {
    for (const auto& c : p["checks"]) {
      const auto name = c.get<std::string>();
      if (name == "dual") reports.push_back(dual_identity_residual(solved.solution, rho, nu, opts));
      else if (name == "inverse") reports.push_back(inverse_relation_residual(solved.solution, rho, nu, opts));
      else throw Error(Errc::ConfigInvalid, "unknown check '" + name + "'");
    }
  }
  for (auto& r : reports) r.metadata["solver"] = solved.solution.solver_tag;
  return write_residuals(ctx, reports);
}

MapPtr oracle_map(const PotentialDensity& rho, const PotentialDensity& nu) {
  if (auto pair = gaussian_pair(rho, nu)) return gaussian_map(*pair);
  if (rho.dim() == 1) return quantile_map(rho, nu);
  if (rho.factors() && nu.factors()) return separable_map(rho, nu);
  throw Error(Errc::NoApplicableMethod, "no continuous oracle for this pair");
}

bool run_bound(JobContext& ctx) {
  const auto& p = ctx.out.resolved;
  CsvTable table({"case", "rho", "nu", "dim", "c", "alpha", "lhs", "rhs", "slack", "pass"});
  json arr = json::array();
  bool ok = true;
  int index = 0;
  for (const auto& cs : p["cases"]) {
    ++index;
    const auto& rho = ctx.density(cs, "rho");
    const auto& nu = ctx.density(cs, "nu");
    const double c = cs["c"].get<double>();
    const auto name = get_or<std::string>(cs, "name", "case-" + std::to_string(index));
    std::vector<std::string> row{name, cs["rho"].get<std::string>(), cs["nu"].get<std::string>(),
                                 std::to_string(rho.dim()), format_double(c)};
    try {
      const auto grid = p.contains("grid") ? ctx.grid(p, "grid", rho.dim()) : default_gh(rho.dim());
      const auto rep = regularity_bound_check(oracle_map(rho, nu), rho, nu, c, *grid);
      row.insert(row.end(), {format_double(rep.metadata["alpha"].get<double>()), format_double(rep.norms.at("lhs")),
                             format_double(rep.norms.at("rhs")), format_double(rep.norms.at("slack")),
                             rep.pass ? "true" : "false"});
      auto j = to_json(rep);
      j["case"] = name;
      arr.push_back(j);
      ok = ok && rep.pass;
    } catch (const Error& e) {
      row.insert(row.end(), {"", "", "", "", "refused"});
      arr.push_back(json{{"case", name}, {"error", e.what()}});
      ok = false;
    }
    table.row(row);
  }
  ctx.write("bound.csv", table.str());
  ctx.write("bound.json", dump(json{{"seed", ctx.seed}, {"cases", arr}}));
  ctx.out.summary["cases"] = index;
  ctx.out.summary["all_pass"] = ok;
  return ok;
}

bool run_cascade(JobContext& ctx) {
  const auto& p = ctx.out.resolved;
  CylindricalPair pair{ctx.out.name, ctx.density(p, "rho"), ctx.density(p, "nu"),
                       as_vec(p["direction"], "direction")};
  std::vector<ScheduleEntry> schedule;
  for (const auto& s : p["schedule"]) {
    ScheduleEntry e{cascade_op_from_string(s["op"].get<std::string>()), {}};
    for (const auto& v : s["params"]) e.params.push_back(v.get<double>());
    schedule.push_back(e);
  }
  CascadeOptions opts;
  opts.solver = p["solver"].get<std::string>() == "entropic" ? CascadeSolver::Entropic : CascadeSolver::Oracle;
  opts.mesh = MeshSpec{1, p["mesh_points"].get<int>(), p["mesh_radius"].get<double>()};
  const auto result = cascade_run(pair, schedule, opts);
  auto table = cascade_table();
  append_rows(table, result);
  ctx.write("cascade.csv", table.str());
  auto j = to_json(result);
  j["seed"] = ctx.seed;
  ctx.write("cascade.json", dump(j));
  bool failed_stage = false;
  for (const auto& s : result.stages) failed_stage = failed_stage || s.failed;
  const double limit = p["max_final_phi_gap"].get<double>();
  const bool ok = !failed_stage && result.all_monotone() && result.proxy_bounded && result.final_phi_gap() < limit;
  ctx.out.summary = to_json(result);
  return ok;
}

bool run_inequalities(JobContext& ctx) {
  const auto& p = ctx.out.resolved;
  auto table = inequality_table();
  json arr = json::array();
  bool ok = true;
  const auto checks = p["checks"].get<std::vector<std::string>>();
  auto want = [&](const char* c) { return std::find(checks.begin(), checks.end(), c) != checks.end(); };
  auto add = [&](const InequalityReport& r, const std::string& label) {
    auto row = r;
    row.witness = label;
    append_row(table, row);
    auto j = to_json(row);
    arr.push_back(j);
    ok = ok && r.pass;
  };
  auto mesh_for = [&](int dim) -> GridPtr {
    if (!p.contains("mesh")) return nullptr;
    return ctx.grid(p, "mesh", dim);
  };
  for (const auto& name : p["densities"].get<std::vector<std::string>>()) {
    const auto& d = ctx.cfg.densities.at(name);
    const auto grid = p.contains("grid") && ctx.cfg.grids.at(p["grid"].get<std::string>()).dim == d.dim()
                          ? ctx.grid(p, "grid", d.dim())
                          : default_gh(d.dim());
    if (want("talagrand")) add(talagrand_check(d, *grid, mesh_for(d.dim())), name);
    if (want("lsi")) add(lsi_check(d, *grid), name);
    if (want("poincare")) {
      auto est = poincare_constant(d, *grid);
      add(est.report, name + " [" + est.witness + "]");
      arr.back()["c_est"] = est.c_est;
    }
  }
  for (const auto& pr : p["pairs"].get<std::vector<std::vector<std::string>>>()) {
    const auto& a = ctx.cfg.densities.at(pr[0]);
    const auto& b = ctx.cfg.densities.at(pr[1]);
    add(chain_check(a, b, *default_gh(a.dim()), mesh_for(a.dim())), pr[0] + " -> " + pr[1]);
  }
  ctx.write("inequalities.csv", table.str());
  ctx.write("inequalities.json", dump(json{{"seed", ctx.seed}, {"reports", arr}}));
  ctx.out.summary["rows"] = arr.size();
  ctx.out.summary["all_pass"] = ok;
  return ok;
}

bool run_compare(JobContext& ctx) {
  const auto& p = ctx.out.resolved;
  const auto& rho = ctx.density(p, "rho");
  const auto rows = oracle_compare(rho, ctx.density(p, "nu"), p["methods"].get<std::vector<std::string>>(),
                                   ctx.grid(p, "grid", rho.dim()));
  CsvTable table({"method", "applicable", "cost", "phi_gap", "note"});
  json timing = json::object(), arr = json::array();
  for (const auto& r : rows) {
    table.row({r.method, r.applicable ? "true" : "false", r.applicable ? format_double(r.cost) : "",
               r.applicable ? format_double(r.phi_gap) : "", r.note});
    arr.push_back({{"method", r.method}, {"applicable", r.applicable}, {"cost", r.cost}, {"phi_gap", r.phi_gap},
                   {"note", r.note}});
    timing[r.method] = r.runtime_s;
  }
  ctx.write("compare.csv", table.str());
  ctx.write("compare.json", dump(json{{"seed", ctx.seed}, {"rows", arr}}));
  ctx.out.summary["rows"] = arr;
  ctx.out.summary["runtime_s"] = timing;
  return true;
}

json resolve_params(const JobSpec& job) {
  json p = job.params;
  auto dflt = [&](const char* k, json v) {
    if (!p.contains(k)) p[k] = std::move(v);
  };
  switch (job.kind) {
    case JobKind::Solve: dflt("method", "auto"); break;
    case JobKind::VerifyMa:
      dflt("method", "auto");
      dflt("direction", "both");
      dflt("tol", 1e-6);
      dflt("richardson", true);
      break;
    case JobKind::VerifyDual:
      dflt("method", "auto");
      dflt("checks", json::array({"dual", "inverse"}));
      dflt("tol", 1e-6);
      dflt("richardson", true);
      break;
    case JobKind::VerifyBound: break;
    case JobKind::Cascade: {
      dflt("direction", json::array({1.0}));
      dflt("solver", "oracle");
      dflt("mesh_points", 2001);
      dflt("mesh_radius", 10.0);
      dflt("max_final_phi_gap", 1e-2);
      json sched = json::array();
      for (const auto& e : default_schedule()) sched.push_back({{"op", std::string(to_string(e.op))}, {"params", e.params}});
      dflt("schedule", sched);
      break;
    }
    case JobKind::Inequalities:
      dflt("densities", json::array());
      dflt("pairs", json::array());
      dflt("checks", json::array({"talagrand", "lsi", "poincare"}));
      break;
    case JobKind::OracleCompare: dflt("methods", json::array({"gaussian", "quantile", "separable", "entropic"})); break;
  }
  return p;
}

JobOutcome execute_job(const ExperimentConfig& cfg, const JobSpec& job, std::size_t index, std::uint64_t seed,
                       const fs::path& run_dir) {
  JobOutcome out;
  out.name = job.name;
  out.kind = std::string(to_string(job.kind));
  out.started_at = iso_now();
  out.resolved = resolve_params(job);
  std::ostringstream dirname;
  dirname << std::setw(2) << std::setfill('0') << index + 1 << "-" << sanitize(job.name);
  const fs::path dir = run_dir / dirname.str();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    fs::remove_all(dir);
    fs::create_directories(dir);
    JobContext ctx{cfg, seed, run_dir, dir, out};
    ctx.write("job.json", dump(json{{"name", job.name}, {"kind", out.kind}, {"seed", seed}, {"params", out.resolved}}));
    bool ok = false;
    switch (job.kind) {
      case JobKind::Solve: ok = run_solve(ctx); break;
      case JobKind::VerifyMa: ok = run_verify(ctx, true); break;
      case JobKind::VerifyDual: ok = run_verify(ctx, false); break;
      case JobKind::VerifyBound: ok = run_bound(ctx); break;
      case JobKind::Cascade: ok = run_cascade(ctx); break;
      case JobKind::Inequalities: ok = run_inequalities(ctx); break;
      case JobKind::OracleCompare: ok = run_compare(ctx); break;
    }
    out.status = ok ? "pass" : "fail";
  } catch (const std::exception& e) {
    out.status = "error";
    out.error = e.what();
  }
  out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
  ExperimentConfig cfg;
  cfg.source_text = text;
  cfg.base_dir = base_dir;
  try {
    cfg.raw = json::parse(text);
  } catch (const json::parse_error& e) {
    invalid(std::string("config is not valid JSON: ") + e.what());
  }
  const auto& raw = cfg.raw;
  if (!raw.is_object()) invalid("config must be a JSON object");
  for (const auto& [key, _] : raw.items())
    if (key != "seed" && key != "output_dir" && key != "densities" && key != "grids" && key != "jobs")
      invalid("unknown top-level key '" + key + "'");
  cfg.seed = get_or<std::uint64_t>(raw, "seed", 0);
  cfg.output_dir = get_or<std::string>(raw, "output_dir", cfg.output_dir.string());
  try {
    if (raw.contains("grids")) {
      if (!raw["grids"].is_object()) invalid("'grids' must be an object");
      for (const auto& [name, g] : raw["grids"].items()) cfg.grids.emplace(name, parse_grid(name, g, cfg.seed));
    }
    if (raw.contains("densities")) {
      if (!raw["densities"].is_object()) invalid("'densities' must be an object");
      for (const auto& [name, d] : raw["densities"].items()) cfg.densities.emplace(name, parse_density(name, d, base_dir));
    }
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigInvalid) throw;
    invalid(e.what());
  }
  if (raw.contains("jobs")) {
    if (!raw["jobs"].is_array()) invalid("'jobs' must be a list");
    std::map<std::string, int> seen;
    for (const auto& j : raw["jobs"]) {
      if (!j.is_object()) invalid("each job must be an object");
      JobSpec spec;
      spec.kind = job_kind_from_string(require(j, "kind", "job").get<std::string>());
      spec.params = j;
      spec.params.erase("kind");
      spec.params.erase("name");
      spec.name = get_or<std::string>(j, "name", std::string(to_string(spec.kind)));
      if (seen[spec.name]++) invalid("duplicate job name '" + spec.name + "'");
      validate_job(cfg, spec);
      cfg.jobs.push_back(std::move(spec));
    }
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    invalid(e.what());
  }
  return parse_config(text, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  RunOutcome outcome;
  const std::uint64_t seed = options.seed.value_or(cfg.seed);
  outcome.out_dir = options.out_dir.value_or(cfg.output_dir);
  fs::create_directories(outcome.out_dir);
  const auto started = iso_now();

  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < cfg.jobs.size(); ++i)
    if (!options.compare_only || cfg.jobs[i].kind == JobKind::OracleCompare) selected.push_back(i);
  std::vector<JobOutcome> results(selected.size());
  const int workers = std::max(1, std::min<int>(options.jobs, static_cast<int>(selected.size())));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < selected.size();)
      results[k] = execute_job(cfg, cfg.jobs[selected[k]], selected[k], seed, outcome.out_dir);
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  outcome.jobs = std::move(results);

  json jobs = json::array();
  for (const auto& j : outcome.jobs) {
    json files = json::array();
    for (const auto& f : j.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    jobs.push_back({{"name", j.name},
                    {"kind", j.kind},
                    {"status", j.status},
                    {"error", j.error},
                    {"started_at", j.started_at},
                    {"wall_time_s", j.wall_time_s},
                    {"files", files},
                    {"params", j.resolved},
                    {"summary", j.summary}});
    if (j.status != "pass") outcome.exit_code = 1;
  }
  json grids = json::object();
  for (const auto& [name, g] : cfg.grids) grids[name] = grid_json(g);
  json densities = json::object();
  for (const auto& [name, d] : cfg.densities)
    densities[name] = {{"describe", d.describe()}, {"dim", d.dim()}, {"log_norm", d.log_norm()}};
  const json manifest{{"tool", kToolName},
                      {"version", tool_version()},
                      {"config_sha256", sha256_hex(cfg.source_text)},
                      {"seed", seed},
                      {"parallel_jobs", workers},
                      {"started_at", started},
                      {"finished_at", iso_now()},
                      {"exit_code", outcome.exit_code},
                      {"grids", grids},
                      {"densities", densities},
                      {"jobs", jobs}};
  write_atomic(outcome.out_dir / "manifest.json", dump(manifest));
  return outcome;
}

std::vector<CompareRow> oracle_compare(const PotentialDensity& rho, const PotentialDensity& nu,
                                       const std::vector<std::string>& methods, const GridPtr& grid) {
  std::vector<CompareRow> rows;
  std::optional<TransportSolution> first;
  int applicable = 0;
  for (const auto& m : methods) {
    CompareRow row;
    row.method = m;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (m == "entropic" && !grid->is_uniform_mesh())
        throw Error(Errc::NoApplicableMethod, "entropic comparison needs a truncated-uniform grid");
      auto solved = solve_pair(m, rho, nu, grid);
      row.applicable = true;
      row.cost = solved.solution.cost;
      ++applicable;
      if (!first) {
        first = solved.solution;
      } else {
        // sqrt(Var_rho(phi - phi_0) + E_rho |T - T_0|^2) over the shared nodes
        const auto n = grid->size();
        double mass = 0.0, mean = 0.0;
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) {
          const double f = rho.value(grid->node(i));
          w[i] = std::isfinite(f) ? grid->weights()[i] * std::exp(-f) : 0.0;
          mass += w[i];
        }
        for (std::size_t i = 0; i < n; ++i) mean += w[i] * (solved.solution.phi[i] - first->phi[i]);
        mean /= mass;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = solved.solution.phi[i] - first->phi[i] - mean;
          const auto idx = static_cast<Eigen::Index>(i);
          acc += w[i] * (d * d + (solved.solution.T.col(idx) - first->T.col(idx)).squaredNorm());
        }
        row.phi_gap = std::sqrt(acc / mass);
      }
    } catch (const Error& e) {
      row.note = e.what();
    }
    row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(row);
  }
  if (applicable < 2) throw Error(Errc::NoApplicableMethod, "fewer than two methods apply to this pair");
  return rows;
}

std::string report_run(const fs::path& run_dir) {
  const auto mpath = run_dir / "manifest.json";
  if (!fs::exists(mpath)) throw Error(Errc::ManifestMissing, "no manifest.json in " + run_dir.string());
  json manifest;
  try {
    manifest = json::parse(read_file(mpath));
  } catch (const json::exception& e) {
    throw Error(Errc::ManifestMissing, std::string("manifest.json is unreadable: ") + e.what());
  }
  struct Line {
    bool pass;
    double slack;
    std::string text;
  };
  std::vector<Line> lines;
  std::vector<std::string> bound_lines, job_lines;
  int total = 0, passed = 0;
  auto column = [](const std::vector<std::string>& header, const char* name) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  auto num = [](const std::string& s) {
    try {
      return std::stod(s);
    } catch (...) {
      return std::nan("");
    }
  };
  for (const auto& job : manifest.value("jobs", json::array())) {
    const auto name = job.value("name", "?");
    job_lines.push_back("  " + name + " (" + job.value("kind", "?") + "): " + job.value("status", "?") +
                        (job.value("error", "").empty() ? "" : " - " + job.value("error", "")));
    if (job.value("status", "") == "error") {
      lines.push_back({false, -std::numeric_limits<double>::infinity(), name + ": job error"});
      ++total;
    }
    for (const auto& f : job.value("files", json::array())) {
      const auto path = f.value("path", "");
      if (path.size() < 4 || path.substr(path.size() - 4) != ".csv") continue;
      std::vector<std::vector<std::string>> rows;
      try {
        rows = parse_csv(read_file(run_dir / path));
      } catch (const Error&) {
        lines.push_back({false, -std::numeric_limits<double>::infinity(), name + ": unreadable " + path});
        ++total;
        continue;
      }
      if (rows.empty()) continue;
      const auto& header = rows.front();
      const int pass_col = column(header, "pass");
      if (pass_col < 0) continue;
      int label_col = column(header, "identity");
      if (label_col < 0) label_col = column(header, "name");
      if (label_col < 0) label_col = column(header, "case");
      const int witness_col = column(header, "witness");
      const int slack_col = column(header, "slack");
      const int value_col = column(header, "value");
      const int tol_col = column(header, "tol");
      for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (static_cast<int>(row.size()) != static_cast<int>(header.size())) continue;
        const bool ok = row[pass_col] == "true";
        double slack = std::nan("");
        if (slack_col >= 0) slack = num(row[slack_col]);
        else if (value_col >= 0 && tol_col >= 0) slack = num(row[tol_col]) - num(row[value_col]);
        std::string label = name + ": " + (label_col >= 0 ? row[label_col] : "row " + std::to_string(r));
        if (witness_col >= 0 && !row[witness_col].empty()) label += " [" + row[witness_col] + "]";
        std::ostringstream os;
        os << (ok ? "pass " : "FAIL ") << label << "  slack=" << std::setprecision(6) << slack;
        lines.push_back({ok, slack, os.str()});
        ++total;
        passed += ok;
        if (job.value("kind", "") == "verify-bound") {
          std::ostringstream b;
          b << "  " << row[label_col] << " (c=" << row[column(header, "c")] << ", dim=" << row[column(header, "dim")]
            << "): slack=" << std::setprecision(6) << slack;
          bound_lines.push_back(b.str());
        }
      }
    }
    if (job.value("kind", "") == "cascade" && job.contains("summary")) {
      const auto& s = job["summary"];
      const bool ok = job.value("status", "") == "pass";
      std::ostringstream os;
      os << (ok ? "pass " : "FAIL ") << name << ": cascade monotone=" << s.value("all_monotone", false)
         << " final_phi_gap=" << std::setprecision(6) << s.value("final_phi_gap", 0.0)
         << " proxy=" << s.value("proxy_sup", 0.0) << " M=" << s.value("M", 0.0);
      lines.push_back({ok, s.value("M", 0.0) - s.value("proxy_sup", 0.0), os.str()});
      ++total;
      passed += ok;
    }
  }
  std::stable_sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
    if (a.pass != b.pass) return !a.pass;
    const double sa = std::isnan(a.slack) ? std::numeric_limits<double>::infinity() : a.slack;
    const double sb = std::isnan(b.slack) ? std::numeric_limits<double>::infinity() : b.slack;
    return sa < sb;
  });
  std::ostringstream os;
  const double pct = total ? 100.0 * passed / total : 100.0;
  if (passed == total) os << "PASS 100%";
  else os << "FAIL " << passed << "/" << total << " passed (" << std::fixed << std::setprecision(1) << pct << "%)";
  os << "\n\nrun: " << run_dir.string() << "  seed=" << manifest.value("seed", 0)
     << "  version=" << manifest.value("version", "?") << "\n\njobs:\n";
  for (const auto& l : job_lines) os << l << "\n";
  os << "\nchecks (failures first, then tightest slack):\n";
  for (const auto& l : lines) os << "  " << l.text << "\n";
  if (!bound_lines.empty()) {
    os << "\nregularity bound slack per case:\n";
    for (const auto& l : bound_lines) os << l << "\n";
  }
  return os.str();
}

}  // namespace wot
