#include "wot/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wot/calculus.hpp"
#include "wot/entropic.hpp"
#include "wot/error.hpp"

namespace wot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double smoothstep(double s) { return s * s * s * (10.0 + s * (-15.0 + 6.0 * s)); }
double smoothstep_d1(double s) { return 30.0 * s * s * (1.0 - s) * (1.0 - s); }

// sup over s in (0, 1] of q'(s)^2 / q(s), refined by golden section.
double smoothstep_ratio_sup() {
  auto ratio = [](double s) { return 900.0 * s * std::pow(1.0 - s, 4) / (10.0 + s * (-15.0 + 6.0 * s)); };
  double best = 0.0, arg = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double s = i / 1000.0;
    if (ratio(s) > best) best = ratio(s), arg = s;
  }
  double lo = std::max(0.0, arg - 1e-3), hi = std::min(1.0, arg + 1e-3);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 100; ++it) {
    const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    if (ratio(a) > ratio(b)) hi = b;
    else lo = a;
  }
  return std::max(best, ratio(0.5 * (lo + hi)));
}

template <class Fn>
PotentialDensity tabulate_potential(const MeshSpec& mesh, Fn&& fn) {
  std::vector<double> values(mesh.size());
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  std::vector<int> multi(mesh.dim);
#pragma omp parallel for schedule(static) firstprivate(multi)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    mesh.multi_index(static_cast<std::size_t>(i), multi);
    Vec x(mesh.dim);
    for (int d = 0; d < mesh.dim; ++d) x[d] = mesh.coordinate(multi[d]);
    const double v = fn(x);
    values[i] = std::isnan(v) ? kInf : v;
  }
  return PotentialDensity::tabulated(mesh, std::move(values));
}

void require_mesh_dim(const PotentialDensity& density, const MeshSpec& mesh) {
  if (density.dim() != mesh.dim) throw Error(Errc::DimensionMismatch, "mesh and density dimensions differ");
}

double profile_d1(const PotentialDensity& h, double s) {
  const auto e = h.evaluate(Vec::Constant(1, s), 1);
  return std::isfinite(e.value) ? e.grad[0] : 0.0;
}
}  // namespace

CutoffBump::CutoffBump(double k) : k_(k) {
  if (!(k > 0) || !std::isfinite(k)) throw Error(Errc::InvalidArgument, "cutoff radius must be positive");
  static const double w = std::sqrt(smoothstep_ratio_sup()) * (1.0 + 1e-9);
  width_ = w;
}

double CutoffBump::value(double r) const {
  const double s = (k_ - std::abs(r)) / width_;
  if (s <= 0) return 0.0;
  if (s >= 1) return 1.0;
  return smoothstep(s);
}

double CutoffBump::derivative(double r) const {
  const double s = (k_ - std::abs(r)) / width_;
  if (s <= 0 || s >= 1) return 0.0;
  return -smoothstep_d1(s) / width_ * (r < 0 ? -1.0 : 1.0);
}

CutoffBump::Certificate CutoffBump::certify(int samples) const {
  Certificate c;
  c.samples = samples;
  c.min_value = 1.0;
  c.max_value = 0.0;
  const double lo = std::max(0.0, k_ - width_);
  for (int i = 0; i < samples; ++i) {
    const double r = lo + (k_ - lo) * i / (samples - 1);
    const double v = value(r), d = derivative(r);
    c.min_value = std::min(c.min_value, v);
    c.max_value = std::max(c.max_value, v);
    if (v > 0) c.max_ratio = std::max(c.max_ratio, d * d / v);
  }
  c.pass = c.max_ratio <= 1.0 && c.min_value >= 0.0 && c.max_value <= 1.0;
  return c;
}

PotentialDensity cyl_project(const PotentialDensity& density, int n, const std::optional<MeshSpec>& mesh,
                             int gh_points) {
  const int N = density.dim();
  if (n < 1 || n > N) throw Error(Errc::InvalidArgument, "projection dimension out of range");
  if (n == N) return density;
  const int m = N - n;
  if (const auto* q = density.as_quadratic()) {
    const Mat P = q->Q.bottomRightCorner(m, m) + Mat::Identity(m, m);
    Eigen::LLT<Mat> llt(P);
    if (llt.info() != Eigen::Success) throw Error(Errc::NonIntegrable, "marginal integral diverges");
    const Mat Qxy = q->Q.topRightCorner(n, m);
    const Vec by = q->b.tail(m);
    const Mat Qn = q->Q.topLeftCorner(n, n) - Qxy * llt.solve(Qxy.transpose());
    const Vec bn = q->b.head(n) - Qxy * llt.solve(by);
    const double logdet = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
    const double cn = q->c + 0.5 * logdet - 0.5 * by.dot(llt.solve(by));
    return PotentialDensity::quadratic(0.5 * (Qn + Qn.transpose()), bn, cn).with_log_norm(density.log_norm());
  }
  if (const auto* sp = density.as_separable()) {
    const auto gh = make_grid(GridSpec{GridScheme::GaussHermiteTensor, 1, 200});
    double log_norm = density.log_norm();
    for (int i = n; i < N; ++i) log_norm -= log_mass(PotentialDensity::separable({sp->profiles[i]}), *gh);
    std::vector<Polynomial1D> kept(sp->profiles.begin(), sp->profiles.begin() + n);
    return PotentialDensity::separable(std::move(kept)).with_log_norm(log_norm);
  }
  if (!mesh) throw Error(Errc::InvalidArgument, "projection of this family needs a mesh");
  if (mesh->dim != n) throw Error(Errc::DimensionMismatch, "mesh must have the projected dimension");
  if (std::pow(static_cast<double>(gh_points), m) > 1e6)
    throw Error(Errc::DimensionTooLarge, "too many marginalized coordinates for tensor Gauss-Hermite");
  const auto& gh = gauss_hermite(gh_points);
  const auto total = static_cast<std::size_t>(std::llround(std::pow(gh_points, m)));
  auto out = tabulate_potential(*mesh, [&](const Vec& x) {
    Vec full(N);
    full.head(n) = x;
    std::vector<double> terms(total);
    double top = -kInf;
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      double lw = 0.0;
      for (int d = m - 1; d >= 0; --d) {
        const auto k = rem % static_cast<std::size_t>(gh_points);
        rem /= static_cast<std::size_t>(gh_points);
        full[n + d] = gh.nodes[k];
        lw += std::log(gh.weights[k]);
      }
      terms[flat] = lw - density.value(full);
      top = std::max(top, terms[flat]);
    }
    if (top == -kInf) return kInf;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - top);
    return -(top + std::log(s));
  });
  return normalize(out, *make_mesh(*mesh));
}

PotentialDensity ou_smooth(const PotentialDensity& density, double m, const MeshSpec& mesh, int gh_points) {
  if (!(m > 0)) throw Error(Errc::InvalidArgument, "smoothing index must be positive");
  require_mesh_dim(density, mesh);
  const double t = 1.0 / m;
  auto out = tabulate_potential(mesh, [&](const Vec& x) {
    const double v = ou_apply_log([&](const Vec& y) { return -density.value(y); }, x, t, gh_points);
    return v == -kInf ? kInf : -v;
  });
  return normalize(out, *make_mesh(mesh));
}

CutoffResult cutoff(const PotentialDensity& density, const CutoffBump& bump, const MeshSpec& mesh) {
  require_mesh_dim(density, mesh);
  const auto grid = make_mesh(mesh);
  auto raw = tabulate_potential(mesh, [&](const Vec& x) {
    const double th = bump.value(x.norm());
    return th > 0 ? density.value(x) - std::log(th) : kInf;
  });
  const double base = log_mass(density, *grid);
  double lm = -kInf;
  try {
    lm = log_mass(raw, *grid);
  } catch (const Error&) {
  }
  const double mean_theta = std::exp(lm - base);
  if (!(mean_theta > 1e-12)) throw Error(Errc::DegenerateCutoff, "E[theta_k] vanishes");
  return {normalize(raw, *grid), 1.0 / mean_theta};
}

PotentialDensity eps_mix(const PotentialDensity& density, double eps, const MeshSpec& mesh) {
  if (!(eps > 0)) throw Error(Errc::InvalidArgument, "mixing weight must be positive");
  require_mesh_dim(density, mesh);
  const double le = std::log(eps), l1 = std::log1p(eps);
  return tabulate_potential(mesh, [&](const Vec& x) {
    const double a = -density.value(x);
    const double top = std::max(a, le);
    return l1 - (top + std::log(std::exp(a - top) + std::exp(le - top)));
  });
}

std::string_view to_string(CascadeOp op) {
  switch (op) {
    case CascadeOp::Project: return "project";
    case CascadeOp::Smooth: return "smooth";
    case CascadeOp::Cutoff: return "cutoff";
    case CascadeOp::Mix: return "mix";
  }
  return "?";
}

CascadeOp cascade_op_from_string(std::string_view name) {
  if (name == "project") return CascadeOp::Project;
  if (name == "smooth") return CascadeOp::Smooth;
  if (name == "cutoff") return CascadeOp::Cutoff;
  if (name == "mix") return CascadeOp::Mix;
  throw Error(Errc::InvalidArgument, "unknown cascade operation: " + std::string(name));
}

std::vector<ScheduleEntry> default_schedule() {
  return {{CascadeOp::Project, {1, 2, 3}},
          {CascadeOp::Smooth, {16, 64, 256}},
          {CascadeOp::Cutoff, {4, 5, 6}},
          {CascadeOp::Mix, {0.1, 0.01, 0.001}}};
}

bool CascadeResult::all_monotone() const {
  return !monotone.empty() && std::all_of(monotone.begin(), monotone.end(), [](bool b) { return b; });
}

double CascadeResult::final_phi_gap() const {
  for (auto it = stages.rbegin(); it != stages.rend(); ++it)
    if (!it->failed) return it->phi_gap_total;
  return kInf;
}

namespace {
struct ProfileState {
  PotentialDensity rho, nu;
  double r = 1.0;
  int n = 0;
  double a_k = 1.0;
};

MapPtr solve_profiles(const PotentialDensity& rho, const PotentialDensity& nu, const CascadeOptions& o) {
  if (o.solver == CascadeSolver::Entropic) return solve_entropic(rho, nu, make_mesh(o.entropic_mesh)).solution.map;
  return quantile_map(rho, nu, QuantileOptions{o.quantile_cells, false, 1e-6});
}

struct Reference {
  std::vector<double> t, lw_rho, lw_nu, phi, psi, dphi, dpsi, ddpsi, df, dg;
};

// Quantities of the unapproximated pair at t = r s + sqrt(1 - r^2) z on the
// (s, z) Gauss-Hermite tensor; index i * P + j.
Reference reference_arrays(const PotentialDensity& rho, const PotentialDensity& nu, const MongeMap& map, double r,
                           int P) {
  const auto& gh = gauss_hermite(P);
  const double c = std::sqrt(std::max(0.0, 1.0 - r * r));
  Reference R;
  const std::size_t total = static_cast<std::size_t>(P) * P;
  for (auto* v : {&R.t, &R.lw_rho, &R.lw_nu, &R.phi, &R.psi, &R.dphi, &R.dpsi, &R.ddpsi, &R.df, &R.dg})
    v->assign(total, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(total);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const int i = static_cast<int>(k / P), j = static_cast<int>(k % P);
    const double t = r * gh.nodes[i] + c * gh.nodes[j];
    const double lw = std::log(gh.weights[i]) + std::log(gh.weights[j]);
    const Vec x = Vec::Constant(1, t);
    R.t[k] = t;
    R.lw_rho[k] = lw - rho.value(x);
    R.lw_nu[k] = lw - nu.value(x);
    R.phi[k] = map.phi(x);
    R.psi[k] = map.psi(x);
    R.dphi[k] = map.forward(x)[0] - t;
    R.dpsi[k] = map.backward(x)[0] - t;
    R.ddpsi[k] = map.backward_jacobian(x)(0, 0) - 1.0;
    R.df[k] = profile_d1(rho, t);
    R.dg[k] = profile_d1(nu, t);
  }
  return R;
}

std::vector<double> normalized_weights(const std::vector<double>& lw) {
  double top = -kInf;
  for (double v : lw) top = std::max(top, v);
  std::vector<double> w(lw.size());
  double total = 0.0;
  for (std::size_t k = 0; k < lw.size(); ++k) total += (w[k] = lw[k] == -kInf ? 0.0 : std::exp(lw[k] - top));
  for (double& v : w) v /= total;
  return w;
}

void fill_metrics(CascadeStage& st, const ProfileState& s, const MongeMap& map, const Reference& R, double r, int P) {
  const auto& gh = gauss_hermite(P);
  std::vector<double> phi(P), psi(P), dphi(P), dpsi(P), ddpsi(P), dfn(P), dgn(P), lfn(P), lgn(P);
  for (int i = 0; i < P; ++i) {
    const double sv = gh.nodes[i];
    const Vec x = Vec::Constant(1, sv);
    phi[i] = map.phi(x);
    psi[i] = map.psi(x);
    dphi[i] = map.forward(x)[0] - sv;
    dpsi[i] = map.backward(x)[0] - sv;
    ddpsi[i] = map.backward_jacobian(x)(0, 0) - 1.0;
    lfn[i] = -s.rho.value(x);
    lgn[i] = -s.nu.value(x);
    dfn[i] = profile_d1(s.rho, sv);
    dgn[i] = profile_d1(s.nu, sv);
  }
  const std::size_t total = R.t.size();
  std::vector<double> lw_rn(total), lw_nn(total);
  for (std::size_t k = 0; k < total; ++k) {
    const auto i = k / P, j = k % P;
    const double lw = std::log(gh.weights[i]) + std::log(gh.weights[j]);
    lw_rn[k] = lw + lfn[i];
    lw_nn[k] = lw + lgn[i];
  }
  const auto wr = normalized_weights(R.lw_rho), wn = normalized_weights(R.lw_nu);
  const auto wrn = normalized_weights(lw_rn), wnn = normalized_weights(lw_nn);
  auto cross = [](double a, double b, double c) { return std::max(0.0, a * a + b * b - 2.0 * a * b * c); };

  double mean_dphi = 0.0, mean_dpsi = 0.0;
  for (std::size_t k = 0; k < total; ++k) {
    const auto i = k / P;
    if (wr[k] > 0) mean_dphi += wr[k] * (phi[i] - R.phi[k]);
    if (wn[k] > 0) mean_dpsi += wn[k] * (psi[i] - R.psi[k]);
  }
  double var_phi = 0.0, grad_phi = 0.0, l1_psi = 0.0, grad_psi = 0.0, hess = 0.0, ff = 0.0, fg = 0.0;
  double proxy = 0.0, gpsq = 0.0, hpsq = 0.0;
  for (std::size_t k = 0; k < total; ++k) {
    const auto i = k / P;
    if (wr[k] > 0) {
      const double d = phi[i] - R.phi[k] - mean_dphi;
      var_phi += wr[k] * d * d;
      grad_phi += wr[k] * cross(dphi[i], R.dphi[k], r);
    }
    if (wn[k] > 0) {
      l1_psi += wn[k] * std::abs(psi[i] - R.psi[k] - mean_dpsi);
      grad_psi += wn[k] * cross(dpsi[i], R.dpsi[k], r);
      hess += wn[k] * std::sqrt(cross(ddpsi[i], R.ddpsi[k], r * r));
      const double sv = gh.nodes[i];
      const double L = sv * dpsi[i] - ddpsi[i];
      proxy += wn[k] * L * L / (1.0 + dpsi[i] * dpsi[i]);
      gpsq += wn[k] * dpsi[i] * dpsi[i];
      hpsq += wn[k] * ddpsi[i] * ddpsi[i];
    }
    if (wrn[k] > 0) ff += wrn[k] * cross(dfn[i], R.df[k], r);
    if (wnn[k] > 0) fg += wnn[k] * cross(dgn[i], R.dg[k], r);
  }
  st.phi_gap = std::sqrt(var_phi + grad_phi);
  st.psi_gap_L1 = l1_psi;
  st.grad_psi_gap_L2 = std::sqrt(grad_psi);
  st.hess_gap = hess;
  st.fisher_gap_f = ff;
  st.fisher_gap_g = fg;
  st.L_psi_proxy = proxy;
  st.grad_psi_sq = gpsq;
  st.hess_psi_sq = hpsq;
}

ProfileState apply(const ProfileState& in, CascadeOp op, double p, const Vec& u, const CascadeOptions& o) {
  ProfileState out = in;
  switch (op) {
    case CascadeOp::Project: {
      const int n = static_cast<int>(std::llround(p));
      if (n < 1 || n > in.n || std::abs(p - n) > 1e-12)
        throw Error(Errc::InvalidArgument, "projection dimension out of range");
      out.n = n;
      out.r = std::min(1.0, u.head(n).norm());
      const double rel = out.r / in.r;
      if (rel < 1.0 - 1e-15) {
        const double m = -1.0 / std::log(rel);
        out.rho = ou_smooth(in.rho, m, o.mesh, o.smoothing_gh_points);
        out.nu = ou_smooth(in.nu, m, o.mesh, o.smoothing_gh_points);
      }
      break;
    }
    case CascadeOp::Smooth:
      out.rho = ou_smooth(in.rho, p, o.mesh, o.smoothing_gh_points);
      out.nu = ou_smooth(in.nu, p, o.mesh, o.smoothing_gh_points);
      break;
    case CascadeOp::Cutoff: {
      const CutoffBump bump(p);
      auto a = cutoff(in.rho, bump, o.mesh);
      auto b = cutoff(in.nu, bump, o.mesh);
      out.rho = a.density;
      out.nu = b.density;
      out.a_k = std::max(a.a_k, b.a_k);
      break;
    }
    case CascadeOp::Mix:
      out.rho = eps_mix(in.rho, p, o.mesh);
      out.nu = eps_mix(in.nu, p, o.mesh);
      break;
  }
  return out;
}
}  // namespace

CascadeResult cascade_run(const CylindricalPair& pair, const std::vector<ScheduleEntry>& schedule,
                          const CascadeOptions& options) {
  if (pair.rho_profile.dim() != 1 || pair.nu_profile.dim() != 1)
    throw Error(Errc::DimensionMismatch, "cascade profiles must be one-dimensional");
  if (pair.direction.size() < 1 || !(pair.direction.norm() > 0))
    throw Error(Errc::InvalidArgument, "lift direction must be nonzero");
  if (options.mesh.dim != 1) throw Error(Errc::DimensionMismatch, "cascade mesh must be one-dimensional");
  const Vec u = pair.direction.normalized();
  const int P = options.gap_gh_points;

  CascadeResult result;
  result.pair_name = pair.name;
  const auto ref_map = solve_profiles(pair.rho_profile, pair.nu_profile, options);
  ProfileState state{pair.rho_profile, pair.nu_profile, 1.0, static_cast<int>(u.size()), 1.0};
  MapPtr state_map = ref_map;
  std::map<double, Reference> originals;
  auto original = [&](double r) -> const Reference& {
    auto it = originals.find(r);
    if (it == originals.end())
      it = originals.emplace(r, reference_arrays(pair.rho_profile, pair.nu_profile, *ref_map, r, P)).first;
    return it->second;
  };
  {
    const auto& R = original(1.0);
    const auto w = normalized_weights(R.lw_nu);
    for (std::size_t k = 0; k < w.size(); ++k) result.fisher_nu += w[k] * R.dg[k] * R.dg[k];
  }

  double sup_grad = 0.0, sup_hess = 0.0;
  for (std::size_t si = 0; si < schedule.size(); ++si) {
    const auto& entry = schedule[si];
    if (entry.params.empty()) throw Error(Errc::InvalidArgument, "cascade stage without refinements");
    std::map<double, Reference> inputs;
    std::optional<std::pair<ProfileState, MapPtr>> finest;
    for (std::size_t ri = 0; ri < entry.params.size(); ++ri) {
      CascadeStage st;
      st.stage = static_cast<int>(si) + 1;
      st.refinement = static_cast<int>(ri) + 1;
      st.op = entry.op;
      st.param = entry.params[ri];
      try {
        const auto next = apply(state, entry.op, st.param, u, options);
        const auto map = solve_profiles(next.rho, next.nu, options);
        const double rel = next.r / state.r;
        auto it = inputs.find(rel);
        if (it == inputs.end()) it = inputs.emplace(rel, reference_arrays(state.rho, state.nu, *state_map, rel, P)).first;
        fill_metrics(st, next, *map, it->second, rel, P);
        CascadeStage total;
        fill_metrics(total, next, *map, original(next.r), next.r, P);
        st.phi_gap_total = total.phi_gap;
        st.coordinates = next.n;
        st.a_k = next.a_k;
        sup_grad = std::max(sup_grad, st.grad_psi_sq);
        sup_hess = std::max(sup_hess, st.hess_psi_sq);
        result.proxy_sup = std::max(result.proxy_sup, st.L_psi_proxy);
        if (ri + 1 == entry.params.size()) finest.emplace(next, map);
      } catch (const Error& e) {
        if (e.code() == Errc::InvalidArgument) throw;
        st.failed = true;
        st.error = e.what();
      }
      result.stages.push_back(st);
    }
    bool mono = true;
    const CascadeStage* prev = nullptr;
    for (const auto& st : result.stages) {
      if (st.stage != static_cast<int>(si) + 1) continue;
      if (st.failed) {
        mono = false;
        continue;
      }
      if (prev && (st.phi_gap > prev->phi_gap || st.psi_gap_L1 > prev->psi_gap_L1 ||
                   st.grad_psi_gap_L2 > prev->grad_psi_gap_L2 || st.fisher_gap_f > prev->fisher_gap_f ||
                   st.hess_gap > prev->hess_gap))
        mono = false;
      prev = &st;
    }
    result.monotone.push_back(mono);
    if (!finest) break;
    state = finest->first;
    state_map = finest->second;
  }
  result.M = result.fisher_nu + 2.0 * sup_grad + 10.0 * sup_hess;
  result.proxy_bounded = result.proxy_sup < result.M;
  return result;
}

CsvTable cascade_table() {
  return CsvTable({"pair", "stage", "refinement", "op", "param", "coordinates", "phi_gap", "psi_gap_L1",
                   "grad_psi_gap_L2", "hess_gap", "fisher_gap_f", "fisher_gap_g", "L_psi_proxy", "phi_gap_total", "a_k", "failed",
                   "error"});
}

void append_rows(CsvTable& table, const CascadeResult& result) {
  for (const auto& s : result.stages)
    table.row({result.pair_name, std::to_string(s.stage), std::to_string(s.refinement), std::string(to_string(s.op)),
               format_double(s.param), std::to_string(s.coordinates), format_double(s.phi_gap),
               format_double(s.psi_gap_L1), format_double(s.grad_psi_gap_L2), format_double(s.hess_gap),
               format_double(s.fisher_gap_f), format_double(s.fisher_gap_g), format_double(s.L_psi_proxy),
               format_double(s.phi_gap_total), format_double(s.a_k), s.failed ? "true" : "false", s.error});
}

nlohmann::json to_json(const CascadeResult& r) {
  nlohmann::json j;
  j["pair"] = r.pair_name;
  j["fisher_nu"] = r.fisher_nu;
  j["M"] = r.M;
  j["proxy_sup"] = r.proxy_sup;
  j["proxy_bounded"] = r.proxy_bounded;
  j["monotone"] = r.monotone;
  j["all_monotone"] = r.all_monotone();
  j["final_phi_gap"] = r.final_phi_gap();
  j["reference"] =
      "surrogate: phi_gap_total is measured against the same solver applied to the unapproximated pair; the other "
      "gaps against the solve of each stage input";
  return j;
}

ResidualReport regularity_bound_check(const MapPtr& map, const PotentialDensity& rho, const PotentialDensity& nu,
                                      double c, const QuadratureGrid& grid, double tol) {
  if (!(c >= 0 && c < 1)) throw Error(Errc::InvalidArgument, "c must lie in [0, 1)");
  if (!map) throw Error(Errc::InvalidArgument, "bound check needs a continuous map");
  const auto cert = convexity_modulus(rho);
  if (!cert.is_one_minus_c_convex(c))
    throw Error(Errc::ConvexityNotCertified, "f is not certified (1 - c)-convex");
  const double hess_psi = expectation(nu, grid, [&](const Vec& y) {
    return (map->backward_jacobian(y) - Mat::Identity(y.size(), y.size())).squaredNorm();
  });
  const double grad_phi = expectation(rho, grid, [&](const Vec& x) { return (map->forward(x) - x).squaredNorm(); });
  const double grad_g = expectation(nu, grid, [&](const Vec& y) { return nu.gradient(y).squaredNorm(); });
  const double grad_f = expectation(rho, grid, [&](const Vec& x) { return rho.gradient(x).squaredNorm(); });
  ResidualReport rep;
  rep.identity_name = "regularity_bound";
  rep.norms["lhs"] = c * hess_psi;
  rep.norms["rhs"] = 3.0 * (grad_phi + grad_g + grad_f);
  rep.norms["slack"] = rep.norms["rhs"] - rep.norms["lhs"];
  rep.norms["excess"] = std::max(0.0, rep.norms["lhs"] - rep.norms["rhs"]);
  rep.designated = "excess";
  rep.metadata["c"] = c;
  rep.metadata["alpha"] = cert.alpha;
  rep.metadata["alpha_exact"] = cert.exact;
  rep.metadata["E_nu_hess_psi_sq"] = hess_psi;
  rep.metadata["E_rho_grad_phi_sq"] = grad_phi;
  rep.metadata["E_nu_grad_g_sq"] = grad_g;
  rep.metadata["E_rho_grad_f_sq"] = grad_f;
  rep.finalize(tol);
  return rep;
}

}  // namespace wot
