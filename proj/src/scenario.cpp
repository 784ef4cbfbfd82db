#include "bohm/scenario.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "bohm/conditional.hpp"
#include "bohm/equilibrium.hpp"
#include "bohm/error.hpp"
#include "bohm/evolve.hpp"
#include "bohm/fields.hpp"
#include "bohm/guidance.hpp"
#include "bohm/snapshot.hpp"
#include "json.hpp"

namespace bohm {
namespace detail {
const std::vector<std::pair<std::string_view, std::string_view>>& shipped_scenarios();
}

namespace {

using json = nlohmann::json;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"scenario", {"name", "experiment", "description", "seed"}},
      {"grid", {"lower_length", "upper_length", "npoints", "particle", "mass"}},
      {"hamiltonian", {"potential", "omega_freq", "center_length"}},
      {"state",
       {"recipe", "center_length", "width_length", "wavevector_invlength", "spinor_re",
        "spinor_im", "center_b_length", "wavevector_b_invlength", "weight_first",
        "branch_centers_length", "branch_width_length", "pointer_center_length",
        "pointer_width_length", "ground_tol"}},
      {"split", {"x_dims", "y_dims"}},
      {"numerics",
       {"dt_time", "dt_traj_time", "T_time", "n", "seeds", "log_every", "settle_time",
        "shift_length", "kick_increments", "control_velocity_scale", "control_coupling",
        "control", "q0_length", "max_resamples"}},
      {"tolerance",
       {"norm_drift", "width_rel", "max_abort_fraction", "alpha", "min_pass_fraction",
        "born_sigmas", "fidelity_deficit", "permanence_slack", "overlap_limit",
        "velocity_deviation", "deviation", "stationarity", "displacement_length", "ray_change",
        "winding_min_rad", "control_displacement_length"}},
      {"output", {"trajectory_files", "snapshot_every"}},
  };
  return keys;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

ExperimentKind parse_kind(const std::string& s) {
  static const std::map<std::string, ExperimentKind> kinds{
      {"evolve", ExperimentKind::evolve},
      {"trajectories", ExperimentKind::trajectories},
      {"equilibrium", ExperimentKind::equilibrium},
      {"collapse", ExperimentKind::collapse},
      {"decoupled", ExperimentKind::decoupled},
      {"timeless", ExperimentKind::timeless},
      {"velocity-check", ExperimentKind::velocity_check},
  };
  const auto it = kinds.find(s);
  if (it == kinds.end()) throw ValidationError("unknown experiment kind '" + s + "'");
  return it->second;
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& what) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) {
    throw ValidationError(what + " must be a non-negative integer, got '" + text + "'");
  }
  return v;
}

// Typed access to one config, with the section/key named in every error.
class Params {
 public:
  explicit Params(const ScenarioConfig& c) : c_(c) {}

  bool has(const std::string& s, const std::string& k) const { return c_.has(s, k); }

  std::string str(const std::string& s, const std::string& k,
                  std::optional<std::string> def = std::nullopt) const {
    if (auto v = c_.get(s, k)) return *v;
    if (def) return *def;
    throw ValidationError("missing [" + s + "] " + k);
  }

  double num(const std::string& s, const std::string& k,
             std::optional<double> def = std::nullopt) const {
    auto v = c_.get(s, k);
    if (!v) {
      if (def) return *def;
      throw ValidationError("missing [" + s + "] " + k);
    }
    try {
      return parse_number(*v);
    } catch (const ValidationError& e) {
      throw ValidationError("[" + s + "] " + k + ": " + e.what());
    }
  }

  std::vector<double> nums(const std::string& s, const std::string& k, std::size_t n,
                           std::optional<double> def = std::nullopt) const {
    auto v = c_.get(s, k);
    if (!v) {
      if (def) return std::vector<double>(n, *def);
      throw ValidationError("missing [" + s + "] " + k);
    }
    std::vector<double> out;
    for (const std::string& item : split_list(*v)) {
      try {
        out.push_back(parse_number(item));
      } catch (const ValidationError& e) {
        throw ValidationError("[" + s + "] " + k + ": " + e.what());
      }
    }
    if (out.size() == 1 && n > 1) out.assign(n, out[0]);
    if (n != 0 && out.size() != n) {
      throw ValidationError("[" + s + "] " + k + " needs " + std::to_string(n) +
                            " entries, got " + std::to_string(out.size()));
    }
    return out;
  }

  std::size_t count(const std::string& s, const std::string& k,
                    std::optional<std::size_t> def = std::nullopt) const {
    auto v = c_.get(s, k);
    if (!v) {
      if (def) return *def;
      throw ValidationError("missing [" + s + "] " + k);
    }
    return static_cast<std::size_t>(parse_unsigned(*v, "[" + s + "] " + k));
  }

  std::vector<std::size_t> indices(const std::string& s, const std::string& k) const {
    std::vector<std::size_t> out;
    for (const std::string& item : split_list(str(s, k))) {
      out.push_back(static_cast<std::size_t>(parse_unsigned(item, "[" + s + "] " + k)));
    }
    return out;
  }

  double positive(const std::string& s, const std::string& k,
                  std::optional<double> def = std::nullopt) const {
    const double v = num(s, k, def);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError("[" + s + "] " + k + " must be positive and finite");
    }
    return v;
  }

  double tolerance(const std::string& k, double def) const {
    return positive("tolerance", k, def);
  }

 private:
  const ScenarioConfig& c_;
};

// ---------------------------------------------------------------------------
// Builders shared by the experiments.

GridSpec build_grid(const Params& p) {
  const auto lo = p.nums("grid", "lower_length", 0);
  const auto hi = p.nums("grid", "upper_length", 0);
  const auto np = p.nums("grid", "npoints", 0);
  const std::size_t ndim = std::max({lo.size(), hi.size(), np.size()});
  if (ndim == 0 || ndim > kMaxDims) {
    throw ValidationError("[grid] needs between 1 and " + std::to_string(kMaxDims) + " axes");
  }
  const auto lower = p.nums("grid", "lower_length", ndim);
  const auto upper = p.nums("grid", "upper_length", ndim);
  const auto npts = p.nums("grid", "npoints", ndim);
  std::vector<Axis> axes;
  for (std::size_t k = 0; k < ndim; ++k) {
    if (npts[k] < 2 || npts[k] != std::floor(npts[k])) {
      throw ValidationError("[grid] npoints must be integers >= 2");
    }
    axes.push_back(Axis{lower[k], upper[k], static_cast<std::size_t>(npts[k])});
  }
  std::vector<std::size_t> particles;
  if (p.has("grid", "particle")) particles = p.indices("grid", "particle");
  std::vector<double> masses;
  if (p.has("grid", "mass")) masses = p.nums("grid", "mass", 0);
  if (masses.size() == 1 && particles.empty()) masses.assign(ndim, masses[0]);
  return GridSpec(std::move(axes), std::move(particles), std::move(masses));
}

HamiltonianSpec build_hamiltonian(const Params& p, const GridSpec& grid) {
  const std::string kind = p.str("hamiltonian", "potential", "free");
  if (kind == "free") return HamiltonianSpec();
  if (kind == "harmonic") {
    auto omega = p.nums("hamiltonian", "omega_freq", grid.ndim(), 1.0);
    auto center = p.nums("hamiltonian", "center_length", grid.ndim(), 0.0);
    return HamiltonianSpec::harmonic(std::move(omega), std::move(center));
  }
  throw ValidationError("unknown [hamiltonian] potential '" + kind + "'");
}

// The trap restricted to some axes (free stays free).
HamiltonianSpec restrict_hamiltonian(const HamiltonianSpec& h,
                                     const std::vector<std::size_t>& dims) {
  if (h.is_free()) return HamiltonianSpec();
  if (!h.is_pure_trap()) throw ValidationError("only free or harmonic potentials can be split");
  std::vector<double> omega;
  std::vector<double> center;
  for (std::size_t d : dims) {
    omega.push_back(h.trap()->omega.at(d));
    center.push_back(h.trap()->center.at(d));
  }
  return HamiltonianSpec::harmonic(std::move(omega), std::move(center));
}

std::vector<cplx> build_spinor(const Params& p) {
  const auto re = p.nums("state", "spinor_re", 0, 1.0);
  const std::size_t s = re.size();
  const auto im = p.nums("state", "spinor_im", s, 0.0);
  std::vector<cplx> out;
  for (std::size_t i = 0; i < s; ++i) out.emplace_back(re[i], im[i]);
  return out;
}

// Gaussian on `grid`, whose axes are `dims` of the config's full grid of
// `ndim` axes; per-axis config lists are indexed by the full-grid axis.
WaveFunction gaussian_on(const Params& p, const GridSpec& grid, std::size_t ndim,
                         const std::vector<std::size_t>& dims, const std::string& center_key,
                         const std::string& k_key) {
  const auto c = p.nums("state", center_key, ndim, 0.0);
  const auto w = p.nums("state", "width_length", ndim);
  const auto k = p.nums("state", k_key, ndim, 0.0);
  std::vector<double> cs, ws, ks;
  for (std::size_t d : dims) {
    cs.push_back(c.at(d));
    ws.push_back(w.at(d));
    ks.push_back(k.at(d));
  }
  return make_gaussian(grid, cs, ws, ks, build_spinor(p));
}

std::vector<std::size_t> all_dims(std::size_t n) {
  std::vector<std::size_t> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = i;
  return d;
}

WaveFunction real_eigenstate(const GridSpec& grid, const HamiltonianSpec& h) {
  if (grid.ndim() != 2 || !h.is_pure_trap()) {
    throw ValidationError("the real eigenstate needs a 2D grid and a harmonic trap");
  }
  const HarmonicTrap& t = *h.trap();
  std::vector<cplx> amps(grid.size());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const std::vector<double> q = grid.node_coords(p);
    amps[p] = oscillator_eigenfunction(0, q[0], t.omega[0], grid.axis_mass(0), t.center[0]) *
              oscillator_eigenfunction(1, q[1], t.omega[1], grid.axis_mass(1), t.center[1]);
  }
  return WaveFunction(grid, 1, std::move(amps)).normalized().materialized();
}

WaveFunction build_state(const Params& p, const GridSpec& grid, const HamiltonianSpec& h) {
  const std::string recipe = p.str("state", "recipe");
  if (recipe == "gaussian") {
    return gaussian_on(p, grid, grid.ndim(), all_dims(grid.ndim()), "center_length", "wavevector_invlength");
  }
  if (recipe == "entangled") {
    const double w = p.num("state", "weight_first", 0.5);
    if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("[state] weight_first must lie in [0, 1]");
    const WaveFunction a =
        gaussian_on(p, grid, grid.ndim(), all_dims(grid.ndim()), "center_length", "wavevector_invlength");
    const WaveFunction b =
        gaussian_on(p, grid, grid.ndim(), all_dims(grid.ndim()), "center_b_length", "wavevector_b_invlength");
    std::vector<cplx> amps(a.raw().size());
    for (std::size_t i = 0; i < amps.size(); ++i) {
      amps[i] = std::sqrt(w) * a.raw()[i] + std::sqrt(1.0 - w) * b.raw()[i];
    }
    return WaveFunction(grid, a.spin(), std::move(amps)).normalized().materialized();
  }
  if (recipe == "rotor") return stationary_rotor(grid, h);
  if (recipe == "real-eigenstate") return real_eigenstate(grid, h);
  if (recipe == "ground") {
    return ground_state(h, grid, p.positive("state", "ground_tol", 1e-12)).state;
  }
  throw ValidationError("unknown [state] recipe '" + recipe + "'");
}

SubsystemSplit build_split(const Params& p, std::size_t ndim) {
  SubsystemSplit s;
  if (p.has("split", "x_dims") || p.has("split", "y_dims")) {
    s.x_dims = p.indices("split", "x_dims");
    s.y_dims = p.indices("split", "y_dims");
  } else {
    s = SubsystemSplit::leading(ndim, ndim > 1 ? ndim - 1 : 1);
  }
  s.validate(ndim);
  return s;
}

std::size_t whole_steps(double span, double step, const std::string& what) {
  const double r = std::nearbyint(span / step);
  if (r < 0.0 || std::abs(span / step - r) > 1e-9 * std::max(1.0, r)) {
    std::ostringstream msg;
    msg << what << ": " << span << " is not a whole number of steps " << step;
    throw ValidationError(msg.str());
  }
  return static_cast<std::size_t>(r);
}

// ---------------------------------------------------------------------------
// Run context: artifacts, criteria and the report.

std::string sha256_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Context {
  const Params& p;
  bool dry_run = false;
  std::filesystem::path dir{};
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t snapshot_every = 0;
  std::vector<std::string> artifacts{};
  json results = json::object();
  json criteria = json::array();
  std::vector<std::string> warnings{};

  std::ofstream open(const std::string& rel) {
    const std::filesystem::path path = dir / rel;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << std::setprecision(17);
    if (std::find(artifacts.begin(), artifacts.end(), rel) == artifacts.end()) {
      artifacts.push_back(rel);
    }
    return out;
  }

  void snapshot(const std::string& rel, const WaveFunction& wf) {
    open(rel).close();
    write_snapshot(dir / rel, wf);
  }

  // relation: "<" or ">" or "<=" (value relation threshold must hold).
  void criterion(const std::string& name, double value, const std::string& relation,
                 double threshold) {
    bool pass = false;
    if (relation == "<") pass = value < threshold;
    else if (relation == "<=") pass = value <= threshold;
    else if (relation == ">") pass = value > threshold;
    else if (relation == ">=") pass = value >= threshold;
    criteria.push_back({{"name", name},
                        {"value", value},
                        {"relation", relation},
                        {"threshold", threshold},
                        {"pass", pass}});
  }

  void warn(const std::vector<std::string>& w) {
    for (const auto& s : w) {
      if (std::find(warnings.begin(), warnings.end(), s) == warnings.end()) warnings.push_back(s);
    }
  }
};

// ---------------------------------------------------------------------------
// Experiments. Each reads and validates everything it needs first and returns
// before any heavy numerics when ctx.dry_run is set.

double position_spread(const WaveFunction& wf) {
  const std::vector<double> rho = node_densities(wf);
  const Axis& ax = wf.grid().axis(0);
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double x = ax.node(i);
    m0 += rho[i];
    m1 += rho[i] * x;
    m2 += rho[i] * x * x;
  }
  const double mean = m1 / m0;
  return std::sqrt(m2 / m0 - mean * mean);
}

void run_evolve(Context& ctx) {
  const Params& p = ctx.p;
  const GridSpec grid = build_grid(p);
  const HamiltonianSpec h = build_hamiltonian(p, grid);
  const WaveFunction wf0 = build_state(p, grid, h).normalized();
  const double T = p.num("numerics", "T_time");
  const double dt = p.positive("numerics", "dt_time");
  const std::size_t nsteps = whole_steps(T, dt, "T_time / dt_time");
  const std::size_t log_every = std::max<std::size_t>(1, p.count("numerics", "log_every", 10));
  const double norm_tol = p.tolerance("norm_drift", 1e-10);
  std::optional<double> width_tol;
  if (p.has("tolerance", "width_rel")) {
    width_tol = p.tolerance("width_rel", 1e-6);
    if (grid.ndim() != 1 || !h.is_free() || p.str("state", "recipe") != "gaussian") {
      throw ValidationError("[tolerance] width_rel needs a free 1D Gaussian");
    }
  }
  if (ctx.dry_run) return;

  Propagator prop(wf0, h, dt);
  std::ofstream log = ctx.open("evolution.csv");
  log << "step,time,norm,energy,edge_mass\n";
  double drift = 0.0;
  auto record = [&](const WaveFunction& wf) {
    const double n = norm(wf);
    drift = std::max(drift, std::abs(n - 1.0));
    log << prop.steps_taken() << ',' << wf.time() << ',' << n << ',' << energy(wf, h) << ','
        << edge_mass(wf) << '\n';
  };
  auto snap = [&](const WaveFunction& wf) {
    std::ostringstream name;
    name << "snapshots/step_" << std::setw(8) << std::setfill('0') << prop.steps_taken() << ".wf";
    ctx.snapshot(name.str(), wf);
  };
  record(wf0);
  if (ctx.snapshot_every > 0) snap(wf0);
  for (std::size_t s = 1; s <= nsteps; ++s) {
    prop.step();
    const bool do_log = s % log_every == 0 || s == nsteps;
    const bool do_snap = ctx.snapshot_every > 0 && (s % ctx.snapshot_every == 0 || s == nsteps);
    if (!do_log && !do_snap) continue;
    const WaveFunction wf = prop.state();
    if (do_log) record(wf);
    if (do_snap) snap(wf);
  }
  log.close();
  const WaveFunction final_wf = prop.state();
  ctx.warn(prop.warnings());
  if (edge_mass(final_wf) > 1e-6) ctx.warn({"support reaches the box edge (edge mass above 1e-6)"});

  ctx.results["steps"] = nsteps;
  ctx.results["final_time"] = final_wf.time();
  ctx.results["max_norm_drift"] = drift;
  ctx.results["final_energy"] = energy(final_wf, h);
  ctx.criterion("norm_drift", drift, "<", norm_tol);
  if (width_tol) {
    const double w0 = p.nums("state", "width_length", 1)[0];
    const double m = grid.axis_mass(0);
    const double t = final_wf.time() - wf0.time();
    const double expected = w0 * std::sqrt(1.0 + std::pow(t / (2.0 * m * w0 * w0), 2));
    const double fitted = position_spread(final_wf);
    ctx.results["width_expected"] = expected;
    ctx.results["width_fitted"] = fitted;
    ctx.criterion("width_relative_error", std::abs(fitted - expected) / expected, "<",
                  *width_tol);
  }
}

void run_trajectories(Context& ctx) {
  const Params& p = ctx.p;
  const GridSpec grid = build_grid(p);
  const HamiltonianSpec h = build_hamiltonian(p, grid);
  const WaveFunction wf0 = build_state(p, grid, h).normalized();
  const double T = p.num("numerics", "T_time");
  const double dt = p.positive("numerics", "dt_time");
  const double dt_traj = p.positive("numerics", "dt_traj_time");
  require_half_step_multiple(dt, dt_traj);
  whole_steps(T, dt_traj, "T_time / dt_traj_time");
  const std::size_t n = p.count("numerics", "n");
  if (n == 0) throw ValidationError("[numerics] n must be positive");
  const double abort_tol = p.num("tolerance", "max_abort_fraction", 1e-3);
  const std::string layout = p.str("output", "trajectory_files", "single");
  if (layout != "single" && layout != "per-trajectory") {
    throw ValidationError("[output] trajectory_files must be single or per-trajectory");
  }
  std::optional<double> winding_min;
  if (p.has("tolerance", "winding_min_rad")) {
    winding_min = p.tolerance("winding_min_rad", 1.0);
    if (grid.ndim() != 2) throw ValidationError("winding needs a 2D grid");
  }
  if (ctx.dry_run) return;

  const SampleSet s = sample(wf0, n, ctx.seed);
  PropagatedSource source(wf0, h, dt);
  IntegrationOptions io;
  io.threads = ctx.threads;
  const double steps_per_traj = std::nearbyint(dt_traj / dt);
  if (ctx.snapshot_every > 0) {
    io.on_step = [&](double, const VelocityField& f, std::span<const double>,
                     std::span<const TrajectoryStatus>) {
      const auto steps = static_cast<std::size_t>(
          std::nearbyint((f.time() - wf0.time()) / dt_traj) * steps_per_traj);
      if (steps % ctx.snapshot_every != 0) return;
      std::ostringstream name;
      name << "snapshots/step_" << std::setw(8) << std::setfill('0') << steps << ".wf";
      ctx.snapshot(name.str(), f.wave());
    };
  }
  const TrajectoryEnsemble ens =
      integrate_ensemble(source, s.coords, grid.ndim(), wf0.time(), wf0.time() + T, dt_traj, io);
  ctx.warn(source.propagator().warnings());

  std::vector<double> center(grid.ndim(), 0.0);
  if (h.trap()) center = h.trap()->center;
  double min_abs_winding = std::numeric_limits<double>::infinity();
  double r_min = std::numeric_limits<double>::infinity();
  double r_max = 0.0;
  double mean_disp = 0.0;
  std::ofstream single;
  if (layout == "single") {
    single = ctx.open("trajectories.csv");
    single << "id,time";
    for (std::size_t d = 0; d < grid.ndim(); ++d) single << ",q" << d;
    single << ",status\n";
  }
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Trajectory tr = ens.trajectory(i);
    const std::string st = to_string(tr.status);
    if (layout == "single") {
      for (const Configuration& c : tr.states) {
        single << i << ',' << c.time;
        for (double x : c.coords) single << ',' << x;
        single << ',' << st << '\n';
      }
    } else {
      std::ostringstream name;
      name << "trajectories/traj_" << std::setw(6) << std::setfill('0') << i << ".csv";
      std::ofstream f = ctx.open(name.str());
      f << "time";
      for (std::size_t d = 0; d < grid.ndim(); ++d) f << ",q" << d;
      f << '\n';
      for (const Configuration& c : tr.states) {
        f << c.time;
        for (double x : c.coords) f << ',' << x;
        f << '\n';
      }
      f << "status," << st << '\n';
    }
    if (tr.status != TrajectoryStatus::completed) continue;
    double disp2 = 0.0;
    for (std::size_t d = 0; d < grid.ndim(); ++d) {
      const double dq = tr.states.back().coords[d] - tr.states.front().coords[d];
      disp2 += dq * dq;
    }
    mean_disp += std::sqrt(disp2);
    if (grid.ndim() == 2) {
      double wind = 0.0;
      double prev = 0.0;
      for (std::size_t j = 0; j < tr.states.size(); ++j) {
        const double x = tr.states[j].coords[0] - center[0];
        const double y = tr.states[j].coords[1] - center[1];
        const double a = std::atan2(y, x);
        const double r = std::hypot(x, y);
        r_min = std::min(r_min, r);
        r_max = std::max(r_max, r);
        if (j > 0) {
          double da = a - prev;
          if (da > std::numbers::pi) da -= 2.0 * std::numbers::pi;
          if (da < -std::numbers::pi) da += 2.0 * std::numbers::pi;
          wind += da;
        }
        prev = a;
      }
      min_abs_winding = std::min(min_abs_winding, std::abs(wind));
    }
  }
  const std::size_t completed = ens.size() - ens.aborted();
  ctx.results["trajectories"] = ens.size();
  ctx.results["aborted"] = ens.aborted();
  ctx.results["mean_displacement"] = completed ? mean_disp / static_cast<double>(completed) : 0.0;
  if (grid.ndim() == 2 && completed > 0) {
    ctx.results["min_abs_winding"] = min_abs_winding;
    ctx.results["min_radius"] = r_min;
    ctx.results["max_radius"] = r_max;
  }
  ctx.criterion("abort_fraction",
                static_cast<double>(ens.aborted()) / static_cast<double>(ens.size()), "<=",
                abort_tol);
  if (winding_min) {
    ctx.criterion("min_abs_winding", completed ? min_abs_winding : 0.0, ">", *winding_min);
  }
}

void run_equilibrium(Context& ctx) {
  const Params& p = ctx.p;
  const GridSpec grid = build_grid(p);
  const HamiltonianSpec h = build_hamiltonian(p, grid);
  const WaveFunction wf0 = build_state(p, grid, h).normalized();
  const double T = p.num("numerics", "T_time");
  EquivarianceOptions opt;
  opt.dt = p.positive("numerics", "dt_time");
  opt.dt_traj = p.positive("numerics", "dt_traj_time");
  require_half_step_multiple(opt.dt, opt.dt_traj);
  whole_steps(T, opt.dt_traj, "T_time / dt_traj_time");
  opt.alpha = p.tolerance("alpha", 0.01);
  opt.max_abort_fraction = p.tolerance("max_abort_fraction", 1e-3);
  opt.threads = ctx.threads;
  const std::size_t n = p.count("numerics", "n");
  if (n < 100) throw ValidationError("[numerics] n must be at least 100");
  const std::size_t nseeds = p.count("numerics", "seeds", 1);
  if (nseeds == 0) throw ValidationError("[numerics] seeds must be positive");
  const double min_frac = p.tolerance("min_pass_fraction", 0.97);
  std::optional<double> control;
  if (p.has("numerics", "control_velocity_scale")) {
    control = p.positive("numerics", "control_velocity_scale");
  }
  if (ctx.dry_run) return;

  std::vector<std::uint64_t> seeds(nseeds);
  for (std::size_t i = 0; i < nseeds; ++i) seeds[i] = ctx.seed + i;
  const auto required =
      static_cast<std::size_t>(std::ceil(min_frac * static_cast<double>(nseeds) - 1e-9));
  std::ofstream fits = ctx.open("fits.csv");
  fits << "run,seed,dim,kind,n,statistic,threshold,pass,aborted_count\n";
  auto study = [&](const std::string& label, const EquivarianceOptions& o) {
    const auto reports = equivariance_study(wf0, h, T, n, seeds, o);
    std::size_t passed = 0;
    std::size_t aborted = 0;
    std::size_t invalid = 0;
    double max_stat_ratio = 0.0;
    for (const auto& r : reports) {
      passed += r.pass;
      aborted += r.aborted;
      invalid += !r.valid;
      for (const FitReport& f : r.marginals) {
        fits << label << ',' << r.seed << ',' << f.dim << ',' << to_string(f.kind) << ','
             << f.n << ',' << f.statistic << ',' << f.threshold << ',' << (f.pass ? 1 : 0)
             << ',' << f.aborted_count << '\n';
        max_stat_ratio = std::max(max_stat_ratio, f.statistic / f.threshold);
      }
    }
    ctx.results[label] = {{"seeds", nseeds},
                          {"passed", passed},
                          {"required", required},
                          {"aborted_total", aborted},
                          {"invalid_seeds", invalid},
                          {"velocity_scale", o.velocity_scale},
                          {"max_statistic_over_threshold", max_stat_ratio}};
    return passed;
  };
  const std::size_t passed = study("equivariance", opt);
  ctx.criterion("seeds_passed", static_cast<double>(passed), ">=", static_cast<double>(required));
  if (control) {
    EquivarianceOptions c = opt;
    c.velocity_scale = *control;
    const std::size_t cpassed = study("control", c);
    ctx.criterion("control_seeds_passed", static_cast<double>(cpassed), "<",
                  static_cast<double>(required));
  }
}

CollapseSetup build_collapse(const Params& p, const GridSpec& grid) {
  if (grid.ndim() != 2) throw ValidationError("collapse needs a 2D (system, pointer) grid");
  if (p.str("state", "recipe") != "two-branch") {
    throw ValidationError("collapse needs [state] recipe = two-branch");
  }
  const std::size_t sx = 0;
  const std::size_t sy = 1;
  const GridSpec sys = grid.sub_grid(std::span(&sx, 1));
  const GridSpec ptr = grid.sub_grid(std::span(&sy, 1));
  const auto centers = p.nums("state", "branch_centers_length", 2);
  const double bw = p.positive("state", "branch_width_length");
  const double pw = p.positive("state", "pointer_width_length");
  const double pc = p.num("state", "pointer_center_length", 0.0);
  const double w = p.num("state", "weight_first");
  if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("[state] weight_first must lie in [0, 1]");
  const double zero = 0.0;
  CollapseSetup s{
      .branch1 =
          make_gaussian(sys, std::span(&centers[0], 1), std::span(&bw, 1), std::span(&zero, 1)),
      .branch2 =
          make_gaussian(sys, std::span(&centers[1], 1), std::span(&bw, 1), std::span(&zero, 1)),
      .c1 = std::sqrt(w),
      .c2 = std::sqrt(1.0 - w),
      .pointer = make_gaussian(ptr, std::span(&pc, 1), std::span(&pw, 1), std::span(&zero, 1)),
  };
  s.pointer_width = pw;
  s.shift = p.positive("numerics", "shift_length", 4.0);
  s.kick_increments = p.count("numerics", "kick_increments", 8);
  if (s.kick_increments == 0) throw ValidationError("[numerics] kick_increments must be positive");
  s.settle_time = p.num("numerics", "settle_time", 0.5);
  s.dt = p.positive("numerics", "dt_time");
  s.dt_traj = p.positive("numerics", "dt_traj_time");
  require_half_step_multiple(s.dt, s.dt_traj);
  whole_steps(s.settle_time, s.dt_traj, "settle_time / dt_traj_time");
  s.trials = p.count("numerics", "n");
  if (s.trials == 0) throw ValidationError("[numerics] n must be positive");
  s.overlap_limit = p.tolerance("overlap_limit", 1e-6);
  s.permanence_slack = p.tolerance("permanence_slack", 1e-6);
  return s;
}

void run_collapse(Context& ctx) {
  const Params& p = ctx.p;
  const GridSpec grid = build_grid(p);
  if (!build_hamiltonian(p, grid).is_free()) {
    throw ValidationError("collapse runs with a free Hamiltonian after the kick");
  }
  CollapseSetup s = build_collapse(p, grid);
  const double sigmas = p.tolerance("born_sigmas", 3.0);
  const double deficit = p.tolerance("fidelity_deficit", 1e-4);
  const double vtol = p.tolerance("velocity_deviation", 1e-8);
  if (ctx.dry_run) return;

  s.seed = ctx.seed;
  s.threads = ctx.threads;
  const BranchStats b = collapse_experiment(s);
  ctx.warn(b.warnings);
  std::ofstream trials = ctx.open("trials.csv");
  trials << "trial,Y_pointer,branch,fidelity\n";
  for (const CollapseTrial& t : b.log) {
    trials << t.trial << ',' << t.pointer << ',' << t.branch << ',' << t.fidelity << '\n';
  }
  ctx.results = {{"trials", b.trials},
                 {"ambiguous", b.ambiguous},
                 {"aborted", b.aborted},
                 {"counts", b.counts},
                 {"born_weight", b.born_weight},
                 {"frequency1", b.frequency1},
                 {"sigma1", b.sigma1},
                 {"mean_fidelity", b.mean_fidelity},
                 {"mean_fidelity_all", b.mean_fidelity_all},
                 {"min_fidelity", b.min_fidelity},
                 {"pointer_overlap", b.pointer_overlap},
                 {"permanence_drop", b.permanence_drop},
                 {"checkpoints", b.checkpoints},
                 {"max_velocity_deviation", b.max_velocity_deviation}};
  ctx.criterion("born_deviation_sigmas",
                b.sigma1 > 0.0 ? std::abs(b.frequency1 - b.born_weight[0]) / b.sigma1
                               : (b.frequency1 == b.born_weight[0] ? 0.0
                                                                  : std::numeric_limits<double>::infinity()),
                "<=", sigmas);
  ctx.criterion("mean_fidelity_deficit", 1.0 - b.mean_fidelity_all, "<", deficit);
  ctx.criterion("permanence_drop", b.permanence_drop, "<=", s.permanence_slack);
  ctx.criterion("velocity_consistency", b.max_velocity_deviation, "<", vtol);
}

void run_decoupled(Context& ctx) {
  const Params& p = ctx.p;
  const GridSpec grid = build_grid(p);
  const HamiltonianSpec h = build_hamiltonian(p, grid);
  if (!h.is_free() && !h.is_pure_trap()) throw ValidationError("decoupled needs free or harmonic V");
  if (p.str("state", "recipe") != "gaussian") {
    throw ValidationError("decoupled needs a product Gaussian ([state] recipe = gaussian)");
  }
  SubsystemSplit split = build_split(p, grid.ndim());
  if (!std::is_sorted(split.x_dims.begin(), split.x_dims.end()) ||
      !std::is_sorted(split.y_dims.begin(), split.y_dims.end()) ||
      split.x_dims.back() > split.y_dims.front()) {
    throw ValidationError("decoupled needs the subsystem axes first");
  }
  const GridSpec gx = grid.sub_grid(split.x_dims);
  const GridSpec gy = grid.sub_grid(split.y_dims);
  DecouplingSetup s{
      .system = gaussian_on(p, gx, grid.ndim(), split.x_dims, "center_length", "wavevector_invlength"),
      .environment =
          gaussian_on(p, gy, grid.ndim(), split.y_dims, "center_length", "wavevector_invlength"),
      .system_h = restrict_hamiltonian(h, split.x_dims),
      .environment_h = restrict_hamiltonian(h, split.y_dims),
  };
  s.duration = p.num("numerics", "T_time");
  s.dt = p.positive("numerics", "dt_time");
  s.dt_traj = p.positive("numerics", "dt_traj_time");
  require_half_step_multiple(s.dt, s.dt_traj);
  whole_steps(s.duration, s.dt_traj, "T_time / dt_traj_time");
  if (p.has("numerics", "q0_length")) s.q0 = p.nums("numerics", "q0_length", grid.ndim());
  const double tol = p.tolerance("deviation", 1e-9);
  const double vtol = p.tolerance("velocity_deviation", 1e-8);
  std::optional<double> control;
  if (p.has("numerics", "control_coupling")) control = p.num("numerics", "control_coupling");
  if (ctx.dry_run) return;

  s.seed = ctx.seed;
  auto write = [&](const std::string& rel, const DecouplingReport& r) {
    std::ofstream f = ctx.open(rel);
    f << "time,deviation";
    for (std::size_t d : split.y_dims) f << ",y" << d;
    f << '\n';
    const std::size_t ny = split.y_dims.size();
    for (std::size_t i = 0; i < r.times.size(); ++i) {
      f << r.times[i] << ',' << r.deviations[i];
      for (std::size_t j = 0; j < ny; ++j) f << ',' << r.environment[i * ny + j];
      f << '\n';
    }
  };
  const DecouplingReport r = decoupling_experiment(s);
  write("deviation.csv", r);
  ctx.results = {{"q0", r.q0},
                 {"checkpoints", r.times.size()},
                 {"max_deviation", r.max_deviation},
                 {"max_velocity_deviation", r.max_velocity_deviation}};
  if (control) {
    DecouplingSetup c = s;
    c.coupling = *control;
    c.q0 = r.q0;
    const DecouplingReport cr = decoupling_experiment(c);
    write("control_deviation.csv", cr);
    ctx.results["control"] = {{"coupling", *control},
                              {"max_deviation", cr.max_deviation},
                              {"max_velocity_deviation", cr.max_velocity_deviation}};
  }
  ctx.criterion("max_ray_deviation", r.max_deviation, "<", tol);
  ctx.criterion("velocity_consistency", r.max_velocity_deviation, "<", vtol);
}

void run_timeless(Context& ctx) {
  const Params& p = ctx.p;
  const GridSpec grid = build_grid(p);
  const HamiltonianSpec h = build_hamiltonian(p, grid);
  TimelessSetup s{
      .universe = build_state(p, grid, h), .h = h, .split = build_split(p, grid.ndim())};
  s.duration = p.num("numerics", "T_time");
  s.dt = p.positive("numerics", "dt_time");
  s.dt_traj = p.positive("numerics", "dt_traj_time");
  require_half_step_multiple(s.dt, s.dt_traj);
  whole_steps(s.duration, s.dt_traj, "T_time / dt_traj_time");
  s.max_resamples = p.count("numerics", "max_resamples", 100);
  if (p.has("numerics", "q0_length")) s.q0 = p.nums("numerics", "q0_length", grid.ndim());
  s.stationarity_tolerance = p.tolerance("stationarity", 1e-8);
  s.displacement_threshold = p.tolerance("displacement_length", 0.1);
  s.ray_change_threshold = p.tolerance("ray_change", 0.1);
  const double vtol = p.tolerance("velocity_deviation", 1e-8);
  const std::string control = p.str("numerics", "control", "none");
  if (control != "none" && control != "real-eigenstate") {
    throw ValidationError("[numerics] control must be none or real-eigenstate");
  }
  std::optional<TimelessSetup> cs;
  if (control == "real-eigenstate") {
    cs = s;
    cs->universe = real_eigenstate(grid, h);
    cs->q0.reset();
  }
  const double control_disp = p.tolerance("control_displacement_length", 1e-8);
  if (ctx.dry_run) return;

  s.seed = ctx.seed;
  auto write = [&](const std::string& rel, const TimelessReport& r) {
    std::ofstream f = ctx.open(rel);
    f << "time";
    for (std::size_t d = 0; d < grid.ndim(); ++d) f << ",q" << d;
    f << '\n';
    for (std::size_t i = 0; i < r.times.size(); ++i) {
      f << r.times[i];
      for (std::size_t d = 0; d < grid.ndim(); ++d) f << ',' << r.path[i * grid.ndim() + d];
      f << '\n';
    }
  };
  auto summary = [](const TimelessReport& r) {
    return json{{"q0", r.q0},
                {"resamples", r.resamples},
                {"stationarity_defect", r.stationarity_defect},
                {"max_density_drift", r.max_density_drift},
                {"max_displacement", r.max_displacement},
                {"max_ray_change", r.max_ray_change},
                {"winding", r.winding},
                {"max_velocity_deviation", r.max_velocity_deviation},
                {"stationary", r.stationary},
                {"moves", r.moves},
                {"conditional_changes", r.conditional_changes}};
  };
  const TimelessReport r = timeless_experiment(s);
  write("path.csv", r);
  ctx.results = summary(r);
  ctx.criterion("stationarity_defect", r.stationarity_defect, "<", s.stationarity_tolerance);
  ctx.criterion("max_density_drift", r.max_density_drift, "<", s.stationarity_tolerance);
  ctx.criterion("max_displacement", r.max_displacement, ">", s.displacement_threshold);
  ctx.criterion("max_ray_change", r.max_ray_change, ">", s.ray_change_threshold);
  ctx.criterion("velocity_consistency", r.max_velocity_deviation, "<", vtol);
  if (cs) {
    cs->seed = ctx.seed;
    const TimelessReport c = timeless_experiment(*cs);
    write("control_path.csv", c);
    ctx.results["control"] = summary(c);
    ctx.criterion("control_stationarity_defect", c.stationarity_defect, "<",
                  s.stationarity_tolerance);
    ctx.criterion("control_max_displacement", c.max_displacement, "<", control_disp);
    ctx.criterion("control_max_ray_change", c.max_ray_change, "<=", s.ray_change_threshold);
  }
}

void run_velocity_check(Context& ctx) {
  const Params& p = ctx.p;
  const GridSpec grid = build_grid(p);
  const HamiltonianSpec h = build_hamiltonian(p, grid);
  const WaveFunction wf = build_state(p, grid, h).normalized();
  const SubsystemSplit split = build_split(p, grid.ndim());
  const std::size_t n = p.count("numerics", "n", 100);
  if (n == 0) throw ValidationError("[numerics] n must be positive");
  const double vtol = p.tolerance("velocity_deviation", 1e-8);
  if (ctx.dry_run) return;

  const SampleSet s = sample(wf, n, ctx.seed);
  const VelocityField joint(wf);
  std::ofstream f = ctx.open("points.csv");
  f << "id";
  for (std::size_t d = 0; d < grid.ndim(); ++d) f << ",q" << d;
  f << ",deviation\n";
  double max_dev = 0.0;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Configuration q = s.at(i);
    f << i;
    for (double x : q.coords) f << ',' << x;
    try {
      const double dev = subsystem_velocity_consistency(joint, split, q.coords).deviation;
      max_dev = std::max(max_dev, dev);
      f << ',' << dev << '\n';
    } catch (const DomainError&) {
      ++skipped;
      f << ",node\n";
    }
  }
  ctx.results = {{"points", n}, {"skipped_nodes", skipped}, {"max_deviation", max_dev}};
  ctx.criterion("velocity_consistency", max_dev, "<", vtol);
  ctx.criterion("evaluated_points", static_cast<double>(n - skipped), ">", 0.0);
}

void dispatch(ExperimentKind kind, Context& ctx) {
  switch (kind) {
    case ExperimentKind::evolve:
      return run_evolve(ctx);
    case ExperimentKind::trajectories:
      return run_trajectories(ctx);
    case ExperimentKind::equilibrium:
      return run_equilibrium(ctx);
    case ExperimentKind::collapse:
      return run_collapse(ctx);
    case ExperimentKind::decoupled:
      return run_decoupled(ctx);
    case ExperimentKind::timeless:
      return run_timeless(ctx);
    case ExperimentKind::velocity_check:
      return run_velocity_check(ctx);
  }
}

void write_manifest(const std::filesystem::path& dir, const std::string& scenario,
                    const RunResult& r, std::uint64_t seed, std::size_t threads) {
  std::filesystem::create_directories(dir);
  json arts = json::array();
  for (const std::string& rel : r.artifacts) {
    const std::filesystem::path path = dir / rel;
    if (!std::filesystem::exists(path)) continue;
    arts.push_back({{"path", rel},
                    {"bytes", std::filesystem::file_size(path)},
                    {"sha256", sha256_hex(path)}});
  }
  const json m{{"scenario", scenario},
               {"status", r.status},
               {"exit_code", r.exit_code},
               {"message", r.message},
               {"seed", seed},
               {"threads", threads},
               {"timestamp", utc_timestamp()},
               {"artifacts", arts}};
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << m.dump(2) << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::evolve:
      return "evolve";
    case ExperimentKind::trajectories:
      return "trajectories";
    case ExperimentKind::equilibrium:
      return "equilibrium";
    case ExperimentKind::collapse:
      return "collapse";
    case ExperimentKind::decoupled:
      return "decoupled";
    case ExperimentKind::timeless:
      return "timeless";
    case ExperimentKind::velocity_check:
      return "velocity-check";
  }
  return "unknown";
}

double parse_number(std::string_view text) {
  const std::string s = trim(text);
  if (s.empty()) throw ValidationError("empty number");
  double value = 1.0;
  char op = '*';
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t next = s.find_first_of("*/", pos);
    // A '/' or '*' right after an exponent marker cannot occur in a number,
    // so splitting on them is safe.
    std::string tok = trim(std::string_view(s).substr(pos, next == std::string::npos
                                                                ? std::string::npos
                                                                : next - pos));
    double v = 0.0;
    double sign = 1.0;
    if (!tok.empty() && (tok[0] == '-' || tok[0] == '+') && tok.substr(1) == "pi") {
      sign = tok[0] == '-' ? -1.0 : 1.0;
      tok = "pi";
    }
    if (tok == "pi") {
      v = sign * std::numbers::pi;
    } else {
      const char* b = tok.data();
      const char* e = tok.data() + tok.size();
      if (!tok.empty() && *b == '+') ++b;
      const auto [p, ec] = std::from_chars(b, e, v);
      if (tok.empty() || ec != std::errc() || p != e) {
        throw ValidationError("cannot parse number '" + s + "'");
      }
    }
    value = op == '*' ? value * v : value / v;
    if (next == std::string::npos) break;
    op = s[next];
    pos = next + 1;
  }
  if (!std::isfinite(value)) throw ValidationError("number '" + s + "' is not finite");
  return value;
}

ScenarioConfig ScenarioConfig::parse(std::string_view text, std::string origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  ScenarioConfig c;
  c.text_ = std::string(text);
  c.origin_ = std::move(origin);
  const auto& known = known_keys();
  for (const auto& [section, body] : tree) {
    const auto it = known.find(section);
    if (body.empty() || it == known.end()) {
      throw ValidationError(c.origin_ + ": unknown section or stray key '" + section + "'");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) {
        throw ValidationError(c.origin_ + ": unknown key '" + key + "' in [" + section + "]");
      }
      c.values_[section + "." + key] = trim(value.data());
    }
  }
  c.refresh();
  return c;
}

void ScenarioConfig::refresh() {
  auto req = [&](const char* key) {
    auto v = get("scenario", key);
    if (!v || v->empty()) throw ValidationError(origin_ + ": missing [scenario] " + key);
    return *v;
  };
  name_ = req("name");
  kind_ = parse_kind(req("experiment"));
  description_ = get("scenario", "description").value_or("");
  seed_ = parse_unsigned(get("scenario", "seed").value_or("1"), "[scenario] seed");
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

ScenarioConfig ScenarioConfig::shipped(std::string_view name) {
  for (const auto& [n, text] : detail::shipped_scenarios()) {
    if (n == name) return parse(text, std::string(n));
  }
  throw ValidationError("unknown scenario '" + std::string(name) +
                        "' (not a file and not a shipped scenario name)");
}

ScenarioConfig ScenarioConfig::resolve(std::string_view path_or_name) {
  const std::filesystem::path path{std::string(path_or_name)};
  std::error_code ec;
  if (std::filesystem::is_regular_file(path, ec)) return load(path);
  return shipped(path_or_name);
}

bool ScenarioConfig::has(const std::string& section, const std::string& key) const {
  return values_.count(section + "." + key) > 0;
}

std::optional<std::string> ScenarioConfig::get(const std::string& section,
                                               const std::string& key) const {
  const auto it = values_.find(section + "." + key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void ScenarioConfig::set(const std::string& section, const std::string& key, std::string value) {
  const auto& known = known_keys();
  const auto it = known.find(section);
  if (it == known.end() || !it->second.count(key)) {
    throw ValidationError("unknown key '" + key + "' in [" + section + "]");
  }
  values_[section + "." + key] = std::move(value);
  if (section == "scenario") refresh();
}

std::vector<ScenarioInfo> list_scenarios() {
  std::vector<ScenarioInfo> out;
  for (const auto& [name, text] : detail::shipped_scenarios()) {
    const ScenarioConfig c = ScenarioConfig::parse(text, std::string(name));
    out.push_back({std::string(name), to_string(c.kind()), c.description()});
  }
  std::sort(out.begin(), out.end(),
            [](const ScenarioInfo& a, const ScenarioInfo& b) { return a.name < b.name; });
  return out;
}

std::string describe_scenario(std::string_view name) {
  const ScenarioConfig c = ScenarioConfig::shipped(name);
  std::ostringstream out;
  out << c.name() << " (" << to_string(c.kind()) << ")\n";
  if (!c.description().empty()) out << c.description() << "\n";
  out << "\n" << c.text();
  if (!c.text().empty() && c.text().back() != '\n') out << '\n';
  return out.str();
}

void validate_scenario(const ScenarioConfig& config) {
  const Params p(config);
  Context ctx{p};
  ctx.dry_run = true;
  dispatch(config.kind(), ctx);
}

std::filesystem::path default_output_root() {
  if (const char* env = std::getenv("BOHMLAB_OUT"); env && *env) return env;
  return "bohmlab-runs";
}

RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  RunResult result;
  result.out_dir = options.out_dir.value_or(default_output_root() / config.name());
  const std::uint64_t seed = options.seed.value_or(config.seed());
  const Params p(config);
  Context ctx{p};
  ctx.dir = result.out_dir;
  ctx.seed = seed;
  ctx.threads = std::max<std::size_t>(1, options.threads);

  try {
    ctx.snapshot_every = options.snapshot_every.value_or(p.count("output", "snapshot_every", 0));
    ctx.dry_run = true;
    dispatch(config.kind(), ctx);
  } catch (const Error& e) {
    result.exit_code = kExitInvalid;
    result.status = "invalid";
    result.message = e.what();
    write_manifest(result.out_dir, config.name(), result, seed, ctx.threads);
    return result;
  } catch (const std::exception& e) {
    result.exit_code = kExitInvalid;
    result.status = "invalid";
    result.message = e.what();
    write_manifest(result.out_dir, config.name(), result, seed, ctx.threads);
    return result;
  }

  json report{{"scenario", config.name()},
              {"experiment", to_string(config.kind())},
              {"seed", seed}};
  try {
    std::filesystem::create_directories(result.out_dir);
    ctx.dry_run = false;
    dispatch(config.kind(), ctx);
    bool pass = !ctx.criteria.empty();
    std::vector<std::string> failed;
    for (const json& c : ctx.criteria) {
      if (!c["pass"].get<bool>()) {
        pass = false;
        failed.push_back(c["name"].get<std::string>());
      }
    }
    result.exit_code = pass ? kExitPass : kExitCriterionFailed;
    result.status = pass ? "passed" : "failed";
    if (!pass) {
      result.message = "failed criteria:";
      for (const auto& f : failed) result.message += " " + f;
    }
    report["status"] = result.status;
    report["pass"] = pass;
    report["criteria"] = ctx.criteria;
    report["results"] = ctx.results;
  } catch (const ValidationError& e) {
    result.exit_code = kExitInvalid;
    result.status = "invalid";
    result.message = e.what();
  } catch (const std::exception& e) {
    result.exit_code = kExitAborted;
    result.status = "aborted";
    result.message = e.what();
    report["status"] = "aborted";
    report["pass"] = false;
    report["error"] = e.what();
    report["criteria"] = ctx.criteria;
    report["results"] = ctx.results;
  }
  report["warnings"] = ctx.warnings;
  if (result.status != "invalid") {
    try {
      std::ofstream out = ctx.open("report.json");
      out << report.dump(2) << '\n';
    } catch (const std::exception& e) {
      result.exit_code = kExitAborted;
      result.status = "aborted";
      result.message += std::string(result.message.empty() ? "" : "; ") + e.what();
    }
  }
  result.artifacts = ctx.artifacts;
  write_manifest(result.out_dir, config.name(), result, seed, ctx.threads);
  return result;
}

RunResult run_scenario(std::string_view path_or_name, const RunOptions& options) {
  try {
    return run_scenario(ScenarioConfig::resolve(path_or_name), options);
  } catch (const Error& e) {
    RunResult r;
    r.exit_code = kExitInvalid;
    r.status = "invalid";
    r.message = e.what();
    if (options.out_dir) {
      r.out_dir = *options.out_dir;
      write_manifest(r.out_dir, std::string(path_or_name), r, options.seed.value_or(0),
                     options.threads);
    }
    return r;
  }
}

}  // namespace bohm
