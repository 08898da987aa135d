#include "jumpflow/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "jumpflow/diagnostics.hpp"
#include "jumpflow/errors.hpp"
#include "jumpflow/parallel.hpp"

namespace jumpflow {

using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Strict JSON reading: every key must be consumed.

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_ + ": expected a JSON object");
  }

  bool has(const std::string& k) const { return j_.contains(k); }

  template <class T>
  void read(const std::string& k, T& dst) {
    if (!j_.contains(k)) return;
    seen_.insert(k);
    const json& v = j_.at(k);
    const std::string where = path_ + "." + k;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ValidationError(where + ": expected a boolean");
      dst = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ValidationError(where + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw ValidationError(where + ": expected a nonnegative integer");
      }
      dst = v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ValidationError(where + ": expected a number");
      dst = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ValidationError(where + ": expected a string");
      dst = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::optional<double>>) {
      if (v.is_null()) {
        dst.reset();
      } else {
        if (!v.is_number()) throw ValidationError(where + ": expected a number or null");
        dst = v.get<double>();
      }
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!v.is_array()) throw ValidationError(where + ": expected an array of integers");
      dst.clear();
      for (const auto& e : v) {
        if (!e.is_number_integer()) throw ValidationError(where + ": expected an array of integers");
        dst.push_back(e.get<int>());
      }
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      dst = numbers(v, where);
    } else if constexpr (std::is_same_v<T, Vector>) {
      dst = vector(v, where);
    } else if constexpr (std::is_same_v<T, std::optional<Vector>>) {
      if (v.is_null()) dst.reset();
      else dst = vector(v, where);
    } else if constexpr (std::is_same_v<T, std::vector<Vector>>) {
      if (!v.is_array()) throw ValidationError(where + ": expected an array of vectors");
      dst.clear();
      for (const auto& e : v) dst.push_back(vector(e, where));
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

  template <class F>
  void object(const std::string& k, F&& body) {
    if (!j_.contains(k)) return;
    seen_.insert(k);
    Reader child(j_.at(k), path_ + "." + k);
    body(child);
    child.finish();
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ValidationError("unknown configuration key " + path_ + "." + item.key());
  }

 private:
  static std::vector<double> numbers(const json& v, const std::string& where) {
    std::vector<double> out;
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ValidationError(where + ": expected a number or an array of numbers");
    for (const auto& e : v) {
      if (!e.is_number()) throw ValidationError(where + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  static Vector vector(const json& v, const std::string& where) {
    const auto xs = numbers(v, where);
    return Eigen::Map<const Vector>(xs.data(), Eigen::Index(xs.size()));
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json to_array(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json to_array(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_array(Vector(m.row(i).transpose())));
  return a;
}

json optional_array(const std::optional<Vector>& v) { return v ? to_array(*v) : json(nullptr); }

std::string galerkin_g_name(GalerkinPerturbation g) {
  switch (g) {
    case GalerkinPerturbation::Zero: return "zero";
    case GalerkinPerturbation::Sine: return "sine";
    case GalerkinPerturbation::Cutoff: return "cutoff";
  }
  return "zero";
}

GalerkinPerturbation galerkin_g_from(const std::string& s) {
  if (s == "zero") return GalerkinPerturbation::Zero;
  if (s == "sine") return GalerkinPerturbation::Sine;
  if (s == "cutoff") return GalerkinPerturbation::Cutoff;
  throw ValidationError("unknown galerkin perturbation '" + s + "' (expected zero, sine or cutoff)");
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"linear1d",    "linear",   "cubic1d",        "oscillator2d",
                                                 "nonlinear2d", "galerkin", "chain-langevin", "chain-semimarkov"};
  return names;
}

bool is_chain(const std::string& p) { return p == "chain-langevin" || p == "chain-semimarkov"; }

// ---------------------------------------------------------------------------
// Output helpers.

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) { line(header); }

  template <class... T>
  void row(const T&... v) {
    std::vector<std::string> cells;
    (cells.push_back(cell(v)), ...);
    line(cells);
  }
  void cells(const std::vector<std::string>& c) { line(c); }
  std::string text() const { return os_.str(); }

  template <class T>
  static std::string cell(const T& v) {
    if constexpr (std::is_same_v<T, bool>) return v ? "1" : "0";
    else if constexpr (std::is_integral_v<T>) return std::to_string(v);
    else if constexpr (std::is_floating_point_v<T>) return fmt(double(v));
    else return std::string(v);
  }

 private:
  void line(const std::vector<std::string>& c) {
    for (std::size_t i = 0; i < c.size(); ++i) os_ << (i ? "," : "") << c[i];
    os_ << '\n';
  }
  std::ostringstream os_;
};

class Output {
 public:
  explicit Output(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ValidationError("cannot create output directory '" + dir + "': " + ec.message());
  }
  void write(const std::string& name, const std::string& text) {
    const auto path = dir_ / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write '" + path.string() + "'");
    f << text;
    if (!f) throw ValidationError("failed writing '" + path.string() + "'");
    files_.push_back(name);
  }
  void write(const std::string& name, const Csv& csv) { write(name, csv.text()); }
  void write(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

std::vector<double> linspace(double a, double b, int n) {
  require(n >= 2, "a time grid needs at least 2 points");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[std::size_t(i)] = a + (b - a) * double(i) / double(n - 1);
  out.back() = b;
  return out;
}

std::vector<std::string> indexed(const std::string& stem, int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

void append(std::vector<std::string>& cells, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) cells.push_back(fmt(v[i]));
}

/// Uniform points in the ball of the given radius.
std::vector<Vector> ball_samples(int d, double radius, int count, Rng& rng) {
  std::vector<Vector> out;
  for (int i = 0; i < count; ++i) {
    Vector v(d);
    for (int j = 0; j < d; ++j) v[j] = rng.normal();
    const double n = v.norm();
    if (n == 0.0) v[0] = 1.0;
    out.push_back(v / std::max(n, 1e-300) * radius * std::pow(rng.uniform(), 1.0 / d));
  }
  return out;
}

json certificate_json(const RankCertificate& c) {
  return {{"kind", c.kind},
          {"verdict", c.verdict()},
          {"pass", c.pass},
          {"conclusive", c.conclusive},
          {"point", to_array(c.point)},
          {"dimension_reached", c.dimension_reached},
          {"target_dim", c.target_dim},
          {"generations_used", c.generations_used},
          {"dims_per_generation", c.dims_per_generation},
          {"singular_values", c.singular_values},
          {"tolerance", c.tolerance},
          {"probes", c.probes}};
}

json mixing_json(const MixingReport& r) {
  return {{"C", r.C},
          {"c", r.c},
          {"c_std_error", r.c_std_error},
          {"r2", r.r2},
          {"censoring_fraction", r.censoring_fraction},
          {"fit_t_max", std::isfinite(r.fit_t_max) ? json(r.fit_t_max) : json(nullptr)},
          {"points_used", r.points_used},
          {"mixing", r.mixing}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration.

ExperimentConfig ExperimentConfig::parse(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("configuration is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Reader r(root, "config");
  bool driven_given = false, alpha_given = false;
  r.object("system", [&](Reader& s) {
    auto& sc = cfg.system;
    s.read("preset", sc.preset);
    if (std::find(preset_names().begin(), preset_names().end(), sc.preset) == preset_names().end())
      throw ValidationError("unknown preset '" + sc.preset + "'");
    s.read("rate", sc.rate);
    alpha_given = s.has("alpha");
    s.read("alpha", sc.alpha);
    s.read("dim", sc.dim);
    s.read("damping", sc.damping);
    s.object("law", [&](Reader& l) {
      l.read("kind", sc.law.kind);
      l.read("sigma", sc.law.sigma);
      l.read("weight", sc.law.weight);
      l.read("mu1", sc.law.mu1);
      l.read("sigma1", sc.law.sigma1);
      l.read("mu2", sc.law.mu2);
      l.read("sigma2", sc.law.sigma2);
    });
    s.object("integrator", [&](Reader& i) {
      std::string method = to_string(sc.integrator.method);
      i.read("method", method);
      sc.integrator.method = integrator_method_from_string(method);
      i.read("rtol", sc.integrator.rtol);
      i.read("atol", sc.integrator.atol);
      i.read("step", sc.integrator.step);
      i.read("max_steps", sc.integrator.max_steps);
      i.read("blowup_norm", sc.integrator.blowup_norm);
    });
    s.object("galerkin", [&](Reader& g) {
      auto& gs = sc.galerkin;
      g.read("D", gs.D);
      g.read("N", gs.N);
      g.read("nu", gs.nu);
      g.read("a", gs.a);
      g.read("p", gs.p);
      std::string gname = galerkin_g_name(gs.g);
      g.read("g", gname);
      gs.g = galerkin_g_from(gname);
      g.read("cutoff_width", gs.cutoff_width);
      g.read("h", gs.h);
      g.read("grid", gs.grid);
    });
    s.object("network", [&](Reader& n) {
      n.read("chain_length", sc.chain_length);
      driven_given = n.has("driven");
      n.read("driven", sc.driven);
      n.read("gamma", sc.gamma);
      n.read("lambda", sc.lambda);
      n.read("potential", sc.potential);
      n.read("potential_amplitude", sc.potential_amplitude);
      n.read("potential_width", sc.potential_width);
    });
  });
  if (!alpha_given && (cfg.system.preset == "oscillator2d" || cfg.system.preset == "nonlinear2d"))
    cfg.system.alpha = 0.1;
  if (!driven_given) cfg.system.driven = {0, cfg.system.chain_length - 1};
  if (cfg.system.chain_length == 1 && !driven_given) cfg.system.driven = {0};

  r.read("seed", cfg.seed);
  r.read("replicas", cfg.replicas);
  r.read("horizon", cfg.horizon);
  r.read("x0", cfg.x0);
  r.read("x0_prime", cfg.x0_prime);
  r.read("out", cfg.out);
  r.object("coupling", [&](Reader& c) {
    c.read("x_hat", cfg.coupling.x_hat);
    c.read("r", cfg.coupling.r);
    c.read("m", cfg.coupling.m);
    c.read("mode", cfg.coupling.mode);
    (void)hit_mode_from_string(cfg.coupling.mode);
    c.read("R", cfg.coupling.R);
    c.read("max_blocks", cfg.coupling.max_blocks);
    c.object("shooting", [&](Reader& sh) {
      sh.read("max_iterations", cfg.coupling.shooting.max_iterations);
      sh.read("residual_tol", cfg.coupling.shooting.residual_tol);
      sh.read("rank_tol", cfg.coupling.shooting.rank_tol);
    });
  });
  r.object("simulate", [&](Reader& s) {
    s.read("k_max", cfg.simulate.k_max);
    s.read("grid_points", cfg.simulate.grid_points);
    s.read("trajectory_points", cfg.simulate.trajectory_points);
  });
  r.object("mixing", [&](Reader& m) {
    m.read("grid_points", cfg.mixing.grid_points);
    m.read("bins", cfg.mixing.bins);
    m.read("bootstrap", cfg.mixing.bootstrap);
    m.read("fit_quantile", cfg.mixing.fit_quantile);
  });
  r.object("check", [&](Reader& c) {
    c.read("alpha", cfg.check.alpha);
    c.read("beta", cfg.check.beta);
    c.read("samples", cfg.check.samples);
    c.read("sample_radius", cfg.check.sample_radius);
    c.read("probes", cfg.check.probes);
    c.read("s_hat", cfg.check.s_hat);
    c.object("tower", [&](Reader& t) {
      t.read("max_generations", cfg.check.tower.max_generations);
      t.read("tol", cfg.check.tower.tol);
      t.read("zero_tol", cfg.check.tower.zero_tol);
      t.read("max_words", cfg.check.tower.max_words);
    });
  });
  r.object("steer", [&](Reader& s) {
    s.read("u0", cfg.steer.u0);
    s.read("targets", cfg.steer.targets);
    s.read("random_targets", cfg.steer.random_targets);
    s.read("target_norm", cfg.steer.target_norm);
    s.read("eps", cfg.steer.eps);
    s.read("time_budget", cfg.steer.time_budget);
    s.read("scaling_deltas", cfg.steer.scaling_deltas);
    s.object("options", [&](Reader& o) {
      o.read("delta_start", cfg.steer.options.delta_start);
      o.read("delta_min", cfg.steer.options.delta_min);
      o.read("burst_fraction", cfg.steer.options.burst_fraction);
      o.read("max_rounds", cfg.steer.options.max_rounds);
    });
  });
  r.object("network", [&](Reader& n) {
    n.read("ray_points", cfg.network.ray_points);
    n.read("ray_min", cfg.network.ray_min);
    n.read("ray_max", cfg.network.ray_max);
    n.read("ph_orders", cfg.network.ph_orders);
  });
  r.finish();

  require(cfg.replicas >= 1, "replicas must be at least 1");
  require(cfg.horizon > 0.0 && std::isfinite(cfg.horizon), "horizon must be positive");
  require(cfg.system.rate > 0.0, "rate must be positive");
  require(cfg.simulate.k_max >= 0, "simulate.k_max must be nonnegative");
  require(cfg.mixing.fit_quantile > 0.0 && cfg.mixing.fit_quantile <= 1.0, "mixing.fit_quantile must lie in (0, 1]");
  require(cfg.check.samples >= 1 && cfg.check.probes >= 1, "check.samples and check.probes must be positive");
  require(cfg.steer.eps > 0.0 && cfg.steer.time_budget > 0.0, "steer.eps and steer.time_budget must be positive");
  cfg.system.integrator.validate();
  return cfg;
}

std::string ExperimentConfig::to_json() const {
  const auto& sc = system;
  const auto& gs = sc.galerkin;
  json j;
  j["system"] = {
      {"preset", sc.preset},
      {"rate", sc.rate},
      {"alpha", sc.alpha},
      {"dim", sc.dim},
      {"damping", sc.damping},
      {"law",
       {{"kind", sc.law.kind},
        {"sigma", sc.law.sigma},
        {"weight", sc.law.weight},
        {"mu1", sc.law.mu1},
        {"sigma1", sc.law.sigma1},
        {"mu2", sc.law.mu2},
        {"sigma2", sc.law.sigma2}}},
      {"integrator",
       {{"method", to_string(sc.integrator.method)},
        {"rtol", sc.integrator.rtol},
        {"atol", sc.integrator.atol},
        {"step", sc.integrator.step},
        {"max_steps", sc.integrator.max_steps},
        {"blowup_norm", sc.integrator.blowup_norm}}},
      {"galerkin",
       {{"D", gs.D},
        {"N", gs.N},
        {"nu", gs.nu},
        {"a", gs.a},
        {"p", gs.p},
        {"g", galerkin_g_name(gs.g)},
        {"cutoff_width", gs.cutoff_width},
        {"h", to_array(gs.h)},
        {"grid", gs.grid}}},
      {"network",
       {{"chain_length", sc.chain_length},
        {"driven", sc.driven},
        {"gamma", sc.gamma},
        {"lambda", sc.lambda},
        {"potential", sc.potential},
        {"potential_amplitude", sc.potential_amplitude},
        {"potential_width", sc.potential_width}}}};
  j["seed"] = seed;
  j["replicas"] = replicas;
  j["horizon"] = horizon;
  j["x0"] = optional_array(x0);
  j["x0_prime"] = optional_array(x0_prime);
  j["out"] = out;
  j["coupling"] = {{"x_hat", optional_array(coupling.x_hat)},
                   {"r", coupling.r},
                   {"m", coupling.m},
                   {"mode", coupling.mode},
                   {"R", coupling.R},
                   {"max_blocks", coupling.max_blocks},
                   {"shooting",
                    {{"max_iterations", coupling.shooting.max_iterations},
                     {"residual_tol", coupling.shooting.residual_tol},
                     {"rank_tol", coupling.shooting.rank_tol}}}};
  j["simulate"] = {{"k_max", simulate.k_max},
                   {"grid_points", simulate.grid_points},
                   {"trajectory_points", simulate.trajectory_points}};
  j["mixing"] = {{"grid_points", mixing.grid_points},
                 {"bins", mixing.bins},
                 {"bootstrap", mixing.bootstrap},
                 {"fit_quantile", mixing.fit_quantile}};
  j["check"] = {{"alpha", check.alpha ? json(*check.alpha) : json(nullptr)},
                {"beta", check.beta ? json(*check.beta) : json(nullptr)},
                {"samples", check.samples},
                {"sample_radius", check.sample_radius},
                {"probes", check.probes},
                {"s_hat", check.s_hat},
                {"tower",
                 {{"max_generations", check.tower.max_generations},
                  {"tol", check.tower.tol},
                  {"zero_tol", check.tower.zero_tol},
                  {"max_words", check.tower.max_words}}}};
  json targets = json::array();
  for (const auto& t : steer.targets) targets.push_back(to_array(t));
  j["steer"] = {{"u0", optional_array(steer.u0)},
                {"targets", targets},
                {"random_targets", steer.random_targets},
                {"target_norm", steer.target_norm},
                {"eps", steer.eps},
                {"time_budget", steer.time_budget},
                {"scaling_deltas", steer.scaling_deltas},
                {"options",
                 {{"delta_start", steer.options.delta_start},
                  {"delta_min", steer.options.delta_min},
                  {"burst_fraction", steer.options.burst_fraction},
                  {"max_rounds", steer.options.max_rounds}}}};
  j["network"] = {{"ray_points", network.ray_points}, {"ray_min", network.ray_min}, {"ray_max", network.ray_max}, {"ph_orders", network.ph_orders}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Presets.

namespace {

JumpLaw make_law(const LawConfig& lc, int n, double rate) {
  if (lc.kind == "gaussian") return JumpLaw::gaussian(n, lc.sigma);
  if (lc.kind == "laplace") return JumpLaw::laplace(n, lc.sigma);
  if (lc.kind == "mixture")
    return JumpLaw::gaussian_mixture(lc.weight, Vector::Constant(n, lc.mu1), lc.sigma1, Vector::Constant(n, lc.mu2),
                                     lc.sigma2);
  if (lc.kind == "per_bath") return JumpLaw::per_bath(std::vector<double>(std::size_t(n), rate / n), lc.sigma);
  throw ValidationError("unknown jump law '" + lc.kind + "' (expected gaussian, laplace, mixture or per_bath)");
}

VectorField cubic1d_field() {
  auto body = [](auto x, auto out) { out[0] = -x[0] - x[0] * x[0] * x[0]; };
  auto jac = [](const Vector& x) { return Matrix::Constant(1, 1, -1.0 - 3.0 * x[0] * x[0]); };
  return VectorField::generic(1, body, jac, 3);
}

// x1' = x2 - alpha x1, x2' = -x1 - damping x2 - x2^3.
VectorField nonlinear2d_field(double alpha, double damping) {
  auto body = [alpha, damping](auto x, auto out) {
    out[0] = x[1] - x[0] * alpha;
    out[1] = -x[0] - x[1] * damping - x[1] * x[1] * x[1];
  };
  auto jac = [alpha, damping](const Vector& x) {
    Matrix j(2, 2);
    j << -alpha, 1.0, -1.0, -damping - 3.0 * x[1] * x[1];
    return j;
  };
  return VectorField::generic(2, body, jac, 3);
}

Potential make_potential(const SystemConfig& sc) {
  if (sc.potential == "zero") return Potential::zero();
  if (sc.potential == "cos_sum") return Potential::cos_sum(sc.potential_amplitude);
  if (sc.potential == "bump") return Potential::bump(sc.potential_amplitude, sc.potential_width);
  throw ValidationError("unknown potential '" + sc.potential + "' (expected zero, cos_sum or bump)");
}

}  // namespace

BuiltSystem build_system(const ExperimentConfig& cfg) {
  const auto& sc = cfg.system;
  BuiltSystem out;
  auto& spec = out.spec;
  spec.rate = sc.rate;
  spec.integrator = sc.integrator;
  if (sc.preset == "linear1d" || sc.preset == "linear") {
    const int d = sc.preset == "linear1d" ? 1 : sc.dim;
    require(d >= 1, "system.dim must be positive");
    require(sc.alpha > 0.0, "system.alpha must be positive");
    spec.f = VectorField::linear(-sc.alpha * Matrix::Identity(d, d));
    spec.B = Matrix::Identity(d, d);
    out.alpha = sc.alpha;
    out.linear = true;
  } else if (sc.preset == "cubic1d") {
    spec.f = cubic1d_field();
    spec.B = Matrix::Identity(1, 1);
    out.alpha = 1.0;
  } else if (sc.preset == "oscillator2d") {
    require(sc.alpha > 0.0 && sc.damping > 0.0, "oscillator alpha and damping must be positive");
    Matrix a(2, 2);
    a << -sc.alpha, 1.0, -1.0, -sc.damping;
    spec.f = VectorField::linear(a);
    spec.B = Matrix(Vector::Unit(2, 1));
    out.alpha = std::min(sc.alpha, sc.damping);
    out.linear = true;
  } else if (sc.preset == "nonlinear2d") {
    require(sc.alpha > 0.0 && sc.damping > 0.0, "oscillator alpha and damping must be positive");
    spec.f = nonlinear2d_field(sc.alpha, sc.damping);
    spec.B = Matrix(Vector::Unit(2, 1));
    out.alpha = std::min(sc.alpha, sc.damping);
  } else if (sc.preset == "galerkin") {
    out.galerkin.emplace(sc.galerkin);
    spec.f = out.galerkin->field();
    spec.B = out.galerkin->embedding();
    out.alpha = sc.galerkin.nu;
  } else if (is_chain(sc.preset)) {
    NetworkSpec nw = chain_network(sc.chain_length, sc.driven, sc.gamma, sc.lambda);
    nw.potential = make_potential(sc);
    out.network = nw;
    const int n = static_cast<int>(nw.driven.size());
    const JumpLaw law = make_law(sc.law, n, sc.rate);
    SystemSpec built = sc.preset == "chain-langevin" ? build_langevin(nw, sc.rate, law, sc.integrator)
                                                     : build_semimarkov(nw, sc.rate, law, sc.integrator);
    spec = std::move(built);
    out.linear = nw.potential.kind == Potential::Kind::Zero;
    out.alpha = 0.0;  // no strict (C1) constant in Euclidean coordinates
  } else {
    throw ValidationError("unknown preset '" + sc.preset + "'");
  }
  if (!is_chain(sc.preset)) spec.law = make_law(sc.law, spec.n(), sc.rate);
  spec.validate();

  const int d = spec.d();
  out.x0 = cfg.x0 ? *cfg.x0 : Vector(Vector::Constant(d, 2.0 / std::sqrt(double(d))));
  out.x0_prime = cfg.x0_prime ? *cfg.x0_prime : Vector(-out.x0);
  require(out.x0.size() == d && out.x0_prime.size() == d, "x0 and x0_prime must have the state dimension");
  return out;
}

double lyapunov_radius(double alpha, double beta, double rate) {
  require(alpha > 0.0 && beta >= 0.0 && rate > 0.0, "lyapunov_radius needs alpha > 0, beta >= 0, rate > 0");
  return 2.0 * std::sqrt((beta / alpha) * (1.0 + rate / (2.0 * alpha)));
}

CouplingPolicy make_policy(const ExperimentConfig& cfg, const BuiltSystem& sys) {
  const int d = sys.spec.d();
  CouplingPolicy p;
  p.x_hat = cfg.coupling.x_hat ? *cfg.coupling.x_hat : Vector(Vector::Zero(d));
  p.r = cfg.coupling.r;
  p.m = cfg.coupling.m;
  p.mode = hit_mode_from_string(cfg.coupling.mode);
  p.shooting = cfg.coupling.shooting;
  p.max_blocks = cfg.coupling.max_blocks;
  if (cfg.coupling.R >= 0.0) {
    p.R = cfg.coupling.R;
  } else if (sys.alpha > 0.0) {
    Rng rng(cfg.seed, 0, StreamTag::Probe);
    const auto samples = ball_samples(d, cfg.check.sample_radius, cfg.check.samples, rng);
    const double beta = fit_dissipativity_beta(sys.spec.f, sys.alpha, samples);
    p.R = lyapunov_radius(sys.alpha, beta, sys.spec.rate);
  } else {
    p.R = 0.0;
  }
  p.validate(sys.spec);
  return p;
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"simulate", "couple", "mixing", "check", "galerkin-steer", "network"};
  return names;
}

// ---------------------------------------------------------------------------
// Subcommands.

namespace {

json run_simulate(const ExperimentConfig& cfg, const BuiltSystem& sys, Output& out) {
  const auto& spec = sys.spec;
  const int d = spec.d();
  const auto grid = linspace(0.0, cfg.horizon, cfg.simulate.grid_points);
  const MomentReport rep =
      empirical_moment(spec, sys.x0, cfg.simulate.k_max, grid, cfg.replicas, cfg.seed, cfg.threads);

  // Closed-form second moments exist for f = -alpha x with B = I.
  const bool oracle = cfg.system.preset == "linear1d" || cfg.system.preset == "linear";
  const double lambda = spec.rate, alpha = sys.alpha;
  const double big_lambda = spec.law.second_moment();
  const double m0 = sys.x0.squaredNorm();
  std::vector<double> m_k;
  if (oracle) m_k = linear_moment_recursion(alpha, lambda, big_lambda, m0, cfg.simulate.k_max);

  Csv emb(oracle ? std::vector<std::string>{"k", "estimate", "std_error", "oracle"}
                 : std::vector<std::string>{"k", "estimate", "std_error"});
  for (std::size_t k = 0; k < rep.embedded.size(); ++k) {
    const auto& row = rep.embedded[k];
    if (oracle) emb.row(long(row.at), row.estimate, row.std_error, m_k[k]);
    else emb.row(long(row.at), row.estimate, row.std_error);
  }
  out.write("moments_embedded.csv", emb);

  const double stationary = lambda * big_lambda / (2.0 * alpha);
  Csv cont(oracle ? std::vector<std::string>{"t", "estimate", "std_error", "oracle"}
                  : std::vector<std::string>{"t", "estimate", "std_error"});
  for (const auto& row : rep.continuous) {
    if (oracle) {
      const double e = std::exp(-2.0 * alpha * row.at);
      cont.row(row.at, row.estimate, row.std_error, e * m0 + stationary * (1.0 - e));
    } else {
      cont.row(row.at, row.estimate, row.std_error);
    }
  }
  out.write("moments_continuous.csv", cont);

  Rng rng(cfg.seed, 0, StreamTag::Path);
  const Trajectory tr = simulate(spec, sys.x0, cfg.horizon, rng);
  Csv traj(with({"t"}, indexed("x", d)));
  for (double t : linspace(0.0, cfg.horizon, cfg.simulate.trajectory_points)) {
    std::vector<std::string> cells{fmt(t)};
    append(cells, tr.at(spec, t));
    traj.cells(cells);
  }
  out.write("trajectory.csv", traj);

  Csv jumps(with(with({"k", "tau"}, indexed("eta", spec.n())), indexed("x", d)));
  for (std::size_t k = 0; k < tr.path.size(); ++k) {
    std::vector<std::string> cells{std::to_string(k + 1), fmt(tr.path.jump_times[k])};
    append(cells, tr.path.jumps[k]);
    append(cells, tr.post_jump[k]);
    jumps.cells(cells);
  }
  out.write("jumps.csv", jumps);

  json s = {{"replicas", rep.replicas}, {"jumps_in_trajectory", tr.path.size()}, {"second_moment_jump", big_lambda}};
  if (oracle) {
    s["oracle"] = {{"rho", lambda / (lambda + 2.0 * alpha)},
                   {"embedded_stationary", big_lambda / (1.0 - lambda / (lambda + 2.0 * alpha))},
                   {"continuous_stationary", stationary}};
  }
  return s;
}

Csv records_csv(const std::vector<CouplingRecord>& records) {
  Csv csv({"replica", "I", "J", "K", "tau_K", "T", "censored", "blocks", "shoot_failures", "ordered"});
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    csv.row(i, r.I, r.J, r.K, r.tau_K, r.T, !r.coalesced(), r.branches.size(), r.shoot_failures, r.ordered());
  }
  return csv;
}

Csv tail_csv(const std::vector<TailPoint>& tail, const char* first) {
  Csv csv({first, "survival", "std_error"});
  for (const auto& p : tail) csv.row(p.t, p.survival, p.std_error);
  return csv;
}

json coupling_summary(const std::vector<CouplingRecord>& records, const CouplingPolicy& policy) {
  std::size_t coalesced = 0, ordered = 0;
  long failures = 0;
  std::string branches;
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& r : records) {
    coalesced += r.coalesced();
    ordered += r.ordered();
    failures += r.shoot_failures;
    for (char c : r.branches) counts[c == 's' ? 0 : c == 'm' ? 1 : 2]++;
  }
  return {{"replicas", records.size()},
          {"coalesced_fraction", double(coalesced) / double(records.size())},
          {"ordering_holds", ordered == records.size()},
          {"shoot_failures", failures},
          {"blocks", {{"synchronous", counts[0]}, {"maximal", counts[1]}, {"independent", counts[2]}}},
          {"policy",
           {{"x_hat", to_array(policy.x_hat)},
            {"r", policy.r},
            {"m", policy.m},
            {"mode", to_string(policy.mode)},
            {"R", policy.R},
            {"effective_R", policy.effective_R()}}}};
}

json run_couple(const ExperimentConfig& cfg, const BuiltSystem& sys, Output& out) {
  const CouplingPolicy policy = make_policy(cfg, sys);
  const auto records =
      run_couplings(sys.spec, policy, sys.x0, sys.x0_prime, cfg.horizon, cfg.replicas, cfg.seed, cfg.threads);
  out.write("coupling_records.csv", records_csv(records));
  const auto grid = linspace(0.0, cfg.horizon, cfg.mixing.grid_points);
  const auto tail = tail_curve(records, grid);
  out.write("tail.csv", tail_csv(tail, "t"));
  long max_k = 0;
  for (const auto& r : records) max_k = std::max(max_k, long(r.branches.size()) * policy.m);
  out.write("block_tail.csv", tail_csv(block_tail_curve(records, policy.m, max_k), "k"));

  json s = coupling_summary(records, policy);
  s["fit_t_max"] = coalescence_quantile(records, cfg.mixing.fit_quantile);
  if (!std::isfinite(s["fit_t_max"].get<double>())) s["fit_t_max"] = nullptr;
  return s;
}

json run_mixing(const ExperimentConfig& cfg, const BuiltSystem& sys, Output& out) {
  const CouplingPolicy policy = make_policy(cfg, sys);
  const auto grid = linspace(0.0, cfg.horizon, cfg.mixing.grid_points);
  const auto records = run_couplings(sys.spec, policy, sys.x0, sys.x0_prime, cfg.horizon, cfg.replicas, cfg.seed,
                                     cfg.threads, grid);
  out.write("coupling_records.csv", records_csv(records));
  const auto tail = tail_curve(records, grid);

  // Histograms use at most the first three coordinates; TV of a projection bounds TV from below.
  const int dims = std::min(sys.spec.d(), 3);
  Csv tv({"t", "tv", "tv_std_error", "survival", "survival_std_error", "bound_holds"});
  std::size_t violations = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<Vector> a, b;
    for (const auto& r : records) {
      a.push_back(r.observed_a[i].head(dims));
      b.push_back(r.observed_b[i].head(dims));
    }
    const TvEstimate est =
        histogram_tv(a, b, cfg.mixing.bins, cfg.seed + 0x9e3779b97f4a7c15ULL * (i + 1), cfg.mixing.bootstrap,
                     cfg.threads);
    const bool ok = est.estimate <= tail[i].survival + 2.0 * (est.std_error + tail[i].std_error);
    violations += !ok;
    tv.row(grid[i], est.estimate, est.std_error, tail[i].survival, tail[i].std_error, ok);
  }
  out.write("tv.csv", tv);
  out.write("tail.csv", tail_csv(tail, "t"));

  const double t_max = coalescence_quantile(records, cfg.mixing.fit_quantile);
  auto curve = to_curve(tail);
  for (auto& p : curve) p.censored = p.t > t_max;
  const MixingReport rep = mixing_fit(curve, t_max);
  json mr = mixing_json(rep);
  out.write("mixing_report.json", mr);

  json s = coupling_summary(records, policy);
  s["mixing"] = mr;
  s["tv_coordinates"] = dims;
  s["coupling_inequality_violations"] = violations;
  return s;
}

json run_check(const ExperimentConfig& cfg, const BuiltSystem& sys, Output& out) {
  const auto& spec = sys.spec;
  const int d = spec.d();
  json certs = json::object();
  bool all_pass = true;

  const double alpha = cfg.check.alpha ? *cfg.check.alpha : sys.alpha;
  if (alpha > 0.0) {
    Rng fit_rng(cfg.seed, 0, StreamTag::Probe);
    const auto fit_samples = ball_samples(d, cfg.check.sample_radius, cfg.check.samples, fit_rng);
    const double beta = cfg.check.beta ? *cfg.check.beta : fit_dissipativity_beta(spec.f, alpha, fit_samples);
    Rng rng(cfg.seed, 1, StreamTag::Probe);
    const auto samples = ball_samples(d, cfg.check.sample_radius, cfg.check.samples, rng);
    const auto rep = check_dissipativity(spec.f, alpha, beta, samples);
    certs["dissipativity"] = {{"alpha", alpha},
                              {"beta", beta},
                              {"beta_fitted", !cfg.check.beta.has_value()},
                              {"samples", rep.samples},
                              {"violations", rep.violations.size()},
                              {"worst_margin", rep.worst_margin},
                              {"verdict", rep.passed() ? "pass" : "fail"}};
    all_pass = all_pass && rep.passed();
  } else {
    certs["dissipativity"] = {{"verdict", "not applicable"}};
  }

  const Vector x_hat = cfg.coupling.x_hat ? *cfg.coupling.x_hat : Vector(Vector::Zero(d));
  require(x_hat.size() == d, "coupling.x_hat has wrong dimension");
  if (sys.linear) {
    const auto k = kalman_rank(jacobian(spec.f, Vector::Zero(d)), spec.B);
    certs["kalman"] = certificate_json(k);
    all_pass = all_pass && k.pass;
  }
  if (spec.f.has_jet()) {
    const auto h = hormander_tower(spec.f, spec.B, x_hat, cfg.check.tower);
    certs["hormander"] = certificate_json(h);
    all_pass = all_pass && h.pass;
  }
  std::vector<double> s_hat = cfg.check.s_hat;
  if (s_hat.empty()) s_hat.assign(std::size_t(cfg.coupling.m), 1.0 / spec.rate);
  Rng rng(cfg.seed, 2, StreamTag::Probe);
  const auto solid = solid_cert(spec, x_hat, s_hat, cfg.check.probes, rng);
  json sj = certificate_json(solid);
  sj["s_hat"] = s_hat;
  sj["best_probe"] = to_array(solid.best_probe);
  certs["solid"] = sj;
  all_pass = all_pass && solid.pass;

  json doc = {{"preset", cfg.system.preset}, {"certificates", certs}, {"verdict", all_pass ? "pass" : "fail"}};
  out.write("certificates.json", doc);
  return doc;
}

json run_steer(const ExperimentConfig& cfg, const BuiltSystem& sys, Output& out) {
  require(sys.galerkin.has_value(), "galerkin-steer needs the galerkin preset");
  const GalerkinModel& model = *sys.galerkin;
  const int d = model.dim();
  const Vector u0 = cfg.steer.u0 ? *cfg.steer.u0 : Vector(Vector::Zero(d));
  require(u0.size() == d, "steer.u0 has wrong dimension");

  std::vector<Vector> targets = cfg.steer.targets;
  if (targets.empty()) {
    for (int i = 0; i < cfg.steer.random_targets; ++i) {
      Rng rng(cfg.seed, std::uint64_t(i), StreamTag::Probe);
      targets.push_back(ball_samples(d, cfg.steer.target_norm, 1, rng).front());
    }
  }
  for (const auto& t : targets) require(t.size() == d, "steering target has wrong dimension");

  const SubspaceTower tower = subspace_tower(model);
  std::vector<SteeringResult> results(targets.size());
  parallel_for(targets.size(), cfg.threads, [&](std::size_t i) {
    results[i] = synthesize_steering(model, u0, targets[i], cfg.steer.eps, cfg.steer.time_budget, cfg.steer.options);
  });

  const int n = model.control_dim();
  Csv steering({"index", "error", "converged", "rounds", "final_delta", "horizon", "segments"});
  Csv controls(with({"index", "t_start", "t_end"}, indexed("zeta", n)));
  Csv tcsv(with({"index"}, indexed("u", d)));
  double worst = 0.0;
  std::size_t converged = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const auto& bp = r.control.breakpoints();
    steering.row(i, r.error, r.converged, r.rounds, r.final_delta, r.control.horizon(), r.control.values().size());
    for (std::size_t k = 0; k < r.control.values().size(); ++k) {
      std::vector<std::string> cells{std::to_string(i), fmt(bp[k]), fmt(bp[k + 1])};
      append(cells, r.control.values()[k]);
      controls.cells(cells);
    }
    std::vector<std::string> cells{std::to_string(i)};
    append(cells, targets[i]);
    tcsv.cells(cells);
    worst = std::max(worst, r.error);
    converged += r.converged;
  }
  out.write("steering.csv", steering);
  out.write("controls.csv", controls);
  out.write("targets.csv", tcsv);

  // Scaling-control error against the limit u0 + psi - a P_N phi^p.
  const Matrix& e = model.embedding();
  const Vector phi = e * Vector::Constant(n, 0.5);
  const Vector psi = e * Vector::Constant(n, 0.1);
  const Vector limit = scaling_control_limit(model, u0, phi, psi);
  Csv scaling({"delta", "error"});
  for (double delta : cfg.steer.scaling_deltas)
    scaling.row(delta, (scaling_control_endpoint(model, u0, phi, psi, delta) - limit).norm());
  out.write("scaling.csv", scaling);

  return {{"targets", targets.size()},
          {"converged", converged},
          {"max_error", worst},
          {"eps", cfg.steer.eps},
          {"tower_dims", tower.dims()},
          {"tower_full_at", tower.full_at ? json(*tower.full_at) : json(nullptr)},
          {"state_dim", d}};
}

json run_network(const ExperimentConfig& cfg, const BuiltSystem& sys, Output& out) {
  require(sys.network.has_value(), "network needs a chain preset");
  const NetworkSpec& nw = *sys.network;
  std::vector<Vector> ray;
  const int pts = cfg.network.ray_points;
  const double lo = cfg.network.ray_min, hi = cfg.network.ray_max;
  require(pts >= 2 && lo > 0.0 && hi > lo, "network ray needs >= 2 points and 0 < ray_min < ray_max");
  const Vector dir = Vector::Constant(nw.size, 1.0 / std::sqrt(double(nw.size)));
  for (int i = 0; i < pts; ++i) ray.push_back(dir * lo * std::pow(hi / lo, double(i) / (pts - 1)));
  const ConditionReport rep = check_conditions(nw, ray, cfg.network.ph_orders);

  Csv ph({"k", "n", "q_norm", "product"});
  for (std::size_t k = 0; k < rep.ph_products.size(); ++k)
    for (std::size_t i = 0; i < ray.size(); ++i) ph.row(k, i, ray[i].norm(), rep.ph_products[k][i]);
  out.write("ph.csv", ph);

  json forms = json::object();
  forms["langevin"] = {{"state_dim", 2 * nw.size}, {"A", to_array(langevin_matrix(nw))}};
  try {
    const Matrix a = semimarkov_matrix(nw);
    forms["semimarkov"] = {{"state_dim", a.rows()}, {"A", to_array(a)}, {"omega_tilde", to_array(omega_tilde(nw))}};
  } catch (const ValidationError& e) {
    forms["semimarkov"] = {{"error", e.what()}};
  }
  const Matrix& b = sys.spec.B;
  const auto system_kalman = kalman_rank(jacobian(sys.spec.f, Vector::Zero(sys.spec.d())), b);

  json doc = {{"preset", cfg.system.preset},
              {"size", nw.size},
              {"driven", nw.driven},
              {"omega", to_array(nw.omega)},
              {"forms", forms},
              {"conditions",
               {{"K", certificate_json(rep.kalman)},
                {"omega_condition", rep.omega_condition},
                {"G",
                 {{"growth_exponent", rep.growth_exponent},
                  {"growth_limit", rep.growth_limit},
                  {"lipschitz_estimate", rep.lipschitz_estimate},
                  {"pass", rep.growth_pass},
                  {"note", "numeric spot check along the ray, not a proof"}}},
                {"pH", {{"orders", rep.ph_orders}, {"pass", rep.ph_pass}}}}},
              {"system_kalman_at_origin", certificate_json(system_kalman)}};
  out.write("network.json", doc);
  return doc;
}

}  // namespace

std::string run_experiment(const std::string& subcommand, const ExperimentConfig& cfg) {
  const auto& names = subcommands();
  if (std::find(names.begin(), names.end(), subcommand) == names.end())
    throw ValidationError("unknown subcommand '" + subcommand + "'");
  const BuiltSystem sys = build_system(cfg);
  Output out(cfg.out);
  out.write("resolved_config.json", cfg.to_json());
  json s;
  if (subcommand == "simulate") s = run_simulate(cfg, sys, out);
  else if (subcommand == "couple") s = run_couple(cfg, sys, out);
  else if (subcommand == "mixing") s = run_mixing(cfg, sys, out);
  else if (subcommand == "check") s = run_check(cfg, sys, out);
  else if (subcommand == "galerkin-steer") s = run_steer(cfg, sys, out);
  else s = run_network(cfg, sys, out);
  json summary = {{"subcommand", subcommand}, {"preset", cfg.system.preset}, {"seed", cfg.seed}, {"result", s}};
  summary["files"] = out.files();
  summary["files"].push_back("summary.json");
  out.write("summary.json", summary);
  return summary.dump(2);
}

}  // namespace jumpflow
