// llc: sampling, persistence, thresholds and experiment drivers.
//
// Exit codes: 0 ok, 1 runtime error, 2 bad flags or input, 3 resolution
// error, 4 statistical failure or falsified conjecture.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "llc/experiments.hpp"

namespace fs = std::filesystem;
using llc::io::json;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kUsage = 2, kResolution = 3, kStatFail = 4 };

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  int workers = 1;
};

void log(const std::string& s) { std::cerr << "llc: " << s << "\n"; }

std::uint64_t resolve_seed(const Common& c, std::string* source) {
  if (c.seed) {
    *source = "flag";
    return *c.seed;
  }
  if (const char* env = std::getenv("PE_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing");
      *source = "PE_SEED";
      return v;
    } catch (const std::exception&) {
      throw llc::InvalidInput(std::string("PE_SEED is not an unsigned integer: ") + env);
    }
  }
  *source = "default";
  return 1;
}

fs::path under(const Common& c, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() ? q : fs::path(c.out_dir) / q;
}

// c.csv -> c.manifest.json
fs::path manifest_path(const fs::path& out) {
  fs::path m = out;
  m.replace_extension(".manifest.json");
  return m;
}

void write_manifest(const fs::path& path, json m, double seconds) {
  m["wall_clock_seconds"] = seconds;
  llc::io::write_text(path, m.dump(2) + "\n");
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Config access with unknown-key detection

class Config {
 public:
  explicit Config(json j) : j_(std::move(j)) {
    if (!j_.is_object()) throw llc::InvalidInput("config must be a JSON object");
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw llc::InvalidInput("config key '" + key + "': " + e.what());
    }
  }

  // Scalar or list.
  std::vector<double> list(const std::string& key, std::vector<double> fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    const auto& v = j_.at(key);
    if (v.is_number()) return {v.get<double>()};
    if (v.is_array()) {
      std::vector<double> out;
      for (const auto& x : v) {
        if (!x.is_number()) throw llc::InvalidInput("config key '" + key + "' must hold numbers");
        out.push_back(x.get<double>());
      }
      if (out.empty()) throw llc::InvalidInput("config key '" + key + "' is empty");
      return out;
    }
    throw llc::InvalidInput("config key '" + key + "' must be a number or a list");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw llc::InvalidInput("unknown config key: " + k);
  }

 private:
  json j_;
  std::set<std::string> used_;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  const std::string text = llc::io::read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw llc::InvalidInput("config " + path + ": " + e.what());
  }
}

std::pair<double, double> band(Config& c, const std::string& key, std::pair<double, double> fallback) {
  const auto v = c.list(key, {fallback.first, fallback.second});
  if (v.size() != 2 || !(v[0] <= v[1])) throw llc::InvalidInput("config key '" + key + "' must be [lo, hi]");
  return {v[0], v[1]};
}

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
  double n = 0;
  std::string window = "cube";
  std::string density;
  std::string out = "cloud.csv";
  int dim = 2;
};

int cmd_sample(const SampleArgs& a, const Common& c, const std::string& cmd) {
  llc::detail::Stopwatch sw;
  std::string source;
  const auto seed = resolve_seed(c, &source);
  const llc::Window w = llc::parse_window(a.window, a.dim);
  llc::PointCloud cloud(llc::Metric::euclidean(a.dim), {});
  json cfg{{"n", a.n}, {"window", w.to_string()}, {"dim", a.dim}};
  if (a.density.empty()) {
    cloud = llc::sample_homogeneous(a.n, w, seed);
  } else {
    const auto spec = llc::parse_density(a.density, w);
    cfg["density"] = spec.to_json();
    cloud = llc::sample_inhomogeneous(a.n, spec, seed);
  }
  const fs::path out = under(c, a.out);
  llc::io::write_text(out, llc::io::cloud_to_csv(cloud));
  json m = llc::io::manifest(cmd, cfg, seed);
  m["seed_source"] = source;
  m["output"] = out.string();
  m["points"] = cloud.size();
  write_manifest(manifest_path(out), m, sw.seconds());
  log("wrote " + std::to_string(cloud.size()) + " points to " + out.string());
  return kOk;
}

// ---------------------------------------------------------------------------
// persist

struct PersistArgs {
  std::string in;
  std::string filtration = "cech";
  int maxdim = 1;
  double rmax = llc::kInfinity;
  bool torus = false;
  std::string out;
};

int cmd_persist(const PersistArgs& a, const Common& c, const std::string& cmd) {
  llc::detail::Stopwatch sw;
  const auto kind = llc::parse_filtration(a.filtration);
  const auto cloud = llc::io::cloud_from_csv(llc::io::read_text(a.in),
                                             a.torus ? llc::Metric::torus(2) : llc::Metric::euclidean(2));
  if (cloud.size() == 0) throw llc::InvalidInput("input cloud is empty");
  if (kind == llc::FiltrationKind::alpha && (cloud.dim() != 2 || a.torus)) {
    throw llc::InvalidInput("alpha filtration requires a 2-dimensional Euclidean cloud, got d = " +
                            std::to_string(cloud.dim()));
  }
  if (a.maxdim < 1) throw llc::InvalidInput("--maxdim must be at least 1");
  log("building " + llc::to_string(kind) + " filtration on " + std::to_string(cloud.size()) + " points");
  const auto fc = llc::build_filtration(cloud, kind, a.maxdim + 1, a.rmax);
  const auto pairing = llc::reduce(fc, {.clearing = true});
  std::vector<llc::FeatureRecord> feats;
  for (int p = 1; p <= a.maxdim; ++p) {
    auto f = llc::features(pairing, fc, p);
    std::sort(f.begin(), f.end(), [](const auto& x, const auto& y) {
      return std::tie(x.birth, x.death) < std::tie(y.birth, y.death);
    });
    feats.insert(feats.end(), f.begin(), f.end());
  }
  std::ostringstream s;
  llc::write_diagram_csv(s, feats, cloud.dim());
  if (a.out.empty()) {
    std::cout << s.str();
  } else {
    const fs::path out = under(c, a.out);
    llc::io::write_text(out, s.str());
    json m = llc::io::manifest(cmd, {{"filtration", llc::to_string(kind)}, {"maxdim", a.maxdim}, {"rmax", a.rmax}}, 0);
    m["input"] = a.in;
    m["output"] = out.string();
    m["features"] = feats.size();
    write_manifest(manifest_path(out), m, sw.seconds());
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// threshold

struct ThresholdArgs {
  int k = 3, m = 3, dim = 2;
  std::string filtration = "cech";
  std::string lifetime = "add";
  double n = 0;
  std::optional<double> rn;
  std::optional<double> rn_exp;
  double alpha = 1;
  double mc_samples = 1e6;
  std::string out = "threshold_curve.csv";
};

llc::RegimeConfig regime_from(int k, int m, const std::string& f, const std::string& lt, double n,
                              std::optional<double> rn, std::optional<double> rn_exp, double alpha, int d) {
  if (rn.has_value() == rn_exp.has_value()) throw llc::InvalidInput("give exactly one of --rn and --rn-exp");
  llc::RegimeConfig cfg;
  if (rn_exp) {
    cfg = llc::RegimeConfig::with_exponent(k, m, llc::parse_filtration(f), llc::parse_lifetime(lt), n, *rn_exp, alpha, d);
  } else {
    cfg.d = d;
    cfg.k = k;
    cfg.m = m;
    cfg.filtration = llc::parse_filtration(f);
    cfg.lifetime = llc::parse_lifetime(lt);
    cfg.n = n;
    cfg.r_n = *rn;
    cfg.alpha = alpha;
  }
  cfg.validate();
  return cfg;
}

json regime_json(const llc::RegimeConfig& cfg) {
  json j{{"d", cfg.d},   {"k", cfg.k},         {"m", cfg.m},         {"filtration", llc::to_string(cfg.filtration)},
         {"n", cfg.n},   {"r_n", cfg.r_n},     {"alpha", cfg.alpha}, {"lifetime", llc::to_string(cfg.lifetime)},
         {"rho_m", cfg.rho(cfg.m)}, {"rho_m1", cfg.rho(cfg.m + 1)}};
  if (cfg.beta) j["beta"] = *cfg.beta;
  return j;
}

std::size_t as_count(double v, const char* what) {
  if (!(v >= 1) || v > 1e12 || v != std::floor(v)) throw llc::InvalidInput(std::string(what) + " must be a positive integer");
  return static_cast<std::size_t>(v);
}

int cmd_threshold(const ThresholdArgs& a, const Common& c, const std::string& cmd) {
  llc::detail::Stopwatch sw;
  std::string source;
  const auto seed = resolve_seed(c, &source);
  const auto cfg = regime_from(a.k, a.m, a.filtration, a.lifetime, a.n, a.rn, a.rn_exp, a.alpha, a.dim);
  const auto samples = as_count(a.mc_samples, "--mc-samples");
  for (const auto& w : cfg.warnings()) log("warning: " + w);
  log("estimating g with " + std::to_string(samples) + " samples");
  const auto run = llc::compute_threshold(cfg, samples, seed, c.workers);
  const fs::path out = under(c, a.out);
  llc::io::write_text(out, run.curve.to_csv());
  json m = llc::io::manifest(cmd, regime_json(cfg), seed);
  m["seed_source"] = source;
  m["mc_samples"] = samples;
  m["curve"] = run.curve.to_json();
  m["threshold"] = run.result.to_json();
  m["output"] = out.string();
  write_manifest(manifest_path(out), m, sw.seconds());
  std::cout << "u = " << llc::io::fmt(run.result.u) << " [" << llc::io::fmt(run.result.u_lo) << ", "
            << llc::io::fmt(run.result.u_hi) << "]\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// experiments

struct ExperimentArgs {
  std::string name;
  std::string config;
};

void write_report(const llc::ExperimentReport& rep, const Common& c, const std::string& cmd, const std::string& source) {
  const fs::path dir(c.out_dir);
  json j = rep.to_json();
  j["command"] = cmd;
  j["seed_source"] = source;
  j["timestamp"] = llc::io::utc_timestamp();
  llc::io::write_text(dir / "report.json", j.dump(2) + "\n");
  for (const auto& [file, text] : rep.series) llc::io::write_text(dir / file, text);
}

int verdict(const llc::ExperimentReport& rep) {
  if (!rep.passed) return kOk;
  log(std::string("statistical criterion ") + (*rep.passed ? "passed" : "FAILED"));
  return *rep.passed ? kOk : kStatFail;
}

llc::ExperimentReport run_anneal(Config& cfg, std::uint64_t seed, int workers) {
  llc::detail::Stopwatch sw;
  llc::AnnealSchedule s;
  s.t0 = cfg.get("t0", s.t0);
  s.cooling = cfg.get("cooling", s.cooling);
  s.sigma_factor = cfg.get("sigma_factor", s.sigma_factor);
  s.t_min = cfg.get("t_min", s.t_min);
  s.steps = cfg.get<std::size_t>("steps", s.steps);
  s.restarts = cfg.get("restarts", s.restarts);
  const auto ms = cfg.list("m", {3});
  const auto kind = llc::parse_filtration(cfg.get<std::string>("filtration", "cech"));
  const bool judged = cfg.has("min_lifetime");
  const auto targets = cfg.list("min_lifetime", std::vector<double>(ms.size(), 0.0));
  cfg.finish();
  if (targets.size() != ms.size()) throw llc::InvalidInput("min_lifetime needs one value per m");
  llc::ExperimentReport rep;
  rep.name = "anneal";
  rep.seed = seed;
  rep.config = s.to_json();
  rep.config["m"] = ms;
  rep.config["filtration"] = llc::to_string(kind);
  if (judged) rep.config["min_lifetime"] = targets;
  rep.metrics["runs"] = json::array();
  llc::io::CsvWriter summary({"m", "lifetime", "bound"});
  bool ok = true;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const int m = static_cast<int>(ms[i]);
    log("annealing m = " + std::to_string(m));
    try {
      const auto r = llc::anneal_max_lifetime(m, kind, s, seed, workers);
      json j = r.to_json();
      if (judged) {
        j["min_lifetime"] = targets[i];
        j["reached"] = r.lifetime >= targets[i];
        ok = ok && r.lifetime >= targets[i];
      }
      rep.metrics["runs"].push_back(j);
      summary.row({static_cast<double>(m), r.lifetime, r.bound ? r.bound->value : std::nan("")});
      llc::io::CsvWriter conf({"x", "y"});
      for (const auto& p : r.configuration) conf.row(p);
      rep.series.emplace_back("anneal_m" + std::to_string(m) + ".csv", conf.str());
    } catch (const llc::ConjectureFalsified& e) {
      rep.metrics["runs"].push_back({{"m", m}, {"conjecture_falsified", e.what()}});
      log(std::string("conjecture falsified: ") + e.what());
      ok = false;
    }
  }
  rep.series.emplace_back("anneal_summary.csv", summary.str());
  if (judged || !ok) rep.passed = ok;
  rep.wall_seconds = sw.seconds();
  return rep;
}

llc::ExperimentReport run_weibull(Config& cfg, std::uint64_t seed, int workers) {
  llc::WeibullSlopeConfig w;
  w.m = cfg.get("m", w.m);
  w.beta = cfg.get("beta", w.beta);
  w.n_list = cfg.list("n", w.n_list);
  w.reps = cfg.get<std::size_t>("reps", w.reps);
  const bool judged = cfg.has("q_band");
  const auto qb = band(cfg, "q_band", {2.5, 3.5});
  const double r2_min = cfg.get("r2_min", 0.95);
  cfg.finish();
  w.seed = seed;
  w.workers = workers;
  log("weibull slope, m = " + std::to_string(w.m) + ", " + std::to_string(w.reps) + " clouds per n");
  auto rep = llc::weibull_slope_experiment(w);
  if (judged) {
    bool ok = true;
    for (const auto& row : rep.metrics["rows"]) {
      const double q = row["q"].get<double>(), r2 = row["r2"].get<double>();
      ok = ok && q >= qb.first && q <= qb.second && r2 >= r2_min;
    }
    rep.config["q_band"] = {qb.first, qb.second};
    rep.config["r2_min"] = r2_min;
    rep.passed = ok;
  }
  return rep;
}

llc::ExperimentReport run_deathcorr(Config& cfg, std::uint64_t seed, int workers) {
  llc::DeathcorrConfig d;
  d.n_list = cfg.list("n", d.n_list);
  d.reps = cfg.get<std::size_t>("reps", d.reps);
  d.outer = cfg.get<std::size_t>("outer", d.outer);
  d.intensity_factor = cfg.get("intensity_factor", d.intensity_factor);
  d.beta = cfg.get("beta", d.beta);
  d.max_attempts = cfg.get<std::size_t>("max_attempts", d.max_attempts);
  const auto cb = band(cfg, "corr_band", {-0.05, 0.10});
  cfg.finish();
  d.seed = seed;
  d.workers = workers;
  log("deathtime correlation over " + std::to_string(d.outer) + " x " + std::to_string(d.reps) + " clouds per n");
  auto rep = llc::deathcorr_experiment(d);
  bool ok = true;
  for (const auto& row : rep.metrics["rows"]) {
    const auto& v = row["avg_corr"];
    ok = ok && v.is_number() && v.get<double>() >= cb.first && v.get<double>() <= cb.second;
  }
  rep.config["corr_band"] = {cb.first, cb.second};
  rep.passed = ok;
  return rep;
}

struct RegimeKeys {
  llc::RegimeConfig cfg;
  std::size_t mc_samples;
};

RegimeKeys regime_keys(Config& cfg, double n, double beta, std::vector<double>* alphas) {
  const int m = cfg.get("m", 3);
  const auto f = cfg.get<std::string>("filtration", "cech");
  const double nn = cfg.get("n", n), bb = cfg.get("beta", beta);
  *alphas = cfg.list("alpha", *alphas);
  const auto mc = as_count(cfg.get("mc_samples", 2e6), "mc_samples");
  auto rc = llc::RegimeConfig::with_exponent(3, m, llc::parse_filtration(f), llc::LifetimeKind::additive, nn, bb,
                                             alphas->front());
  rc.validate();
  return {rc, mc};
}

llc::ExperimentReport run_intensity(Config& cfg, std::uint64_t seed, int workers) {
  llc::detail::Stopwatch sw;
  std::vector<double> alphas{1, 4};
  auto [rc, mc] = regime_keys(cfg, 2000, 0.7, &alphas);
  const auto reps = cfg.get<std::size_t>("reps", 2000);
  cfg.finish();
  llc::ExperimentReport rep;
  rep.name = "intensity";
  rep.seed = seed;
  rep.config = regime_json(rc);
  rep.config["alpha"] = alphas;
  rep.config["reps"] = reps;
  rep.config["mc_samples"] = mc;
  log("estimating g with " + std::to_string(mc) + " samples");
  llc::GOptions go;
  go.samples = mc;
  go.seed = seed;
  go.workers = workers;
  const auto curve = llc::estimate_g(rc, go);
  rep.metrics["curve"] = curve.to_json();
  rep.metrics["checks"] = json::array();
  llc::io::CsvWriter csv({"alpha", "u", "mean", "se"});
  bool ok = true;
  for (double a : alphas) {
    rc.alpha = a;
    const double u = llc::threshold_u(curve, rc).u;
    log("intensity check at alpha = " + llc::io::fmt(a) + ", u = " + llc::io::fmt(u));
    const auto r = llc::verify_intensity_formula(rc, u, reps, seed, workers);
    rep.metrics["checks"].push_back(r.to_json());
    csv.row({a, u, r.mean, r.se});
    ok = ok && r.passed;
  }
  rep.series.emplace_back("intensity.csv", csv.str());
  rep.passed = ok;
  rep.wall_seconds = sw.seconds();
  return rep;
}

llc::ExperimentReport run_poissonness(Config& cfg, std::uint64_t seed, int workers) {
  llc::detail::Stopwatch sw;
  std::vector<double> alphas{1};
  auto [rc, mc] = regime_keys(cfg, 20000, 0.7, &alphas);
  if (alphas.size() != 1) throw llc::InvalidInput("poissonness takes a single alpha");
  const auto reps = cfg.get<std::size_t>("reps", 10000);
  const auto dens = cfg.get<std::string>("density", "const");
  const auto window = cfg.get<std::string>("window", "cube");
  llc::PoissonnessOptions po;
  po.alpha = rc.alpha;
  po.m = rc.m;
  po.q = cfg.get("q", po.q);
  po.cells = cfg.get("cells", po.cells);
  po.p_threshold = cfg.get("p_threshold", po.p_threshold);
  po.min_points = cfg.get<std::size_t>("min_points", po.min_points);
  cfg.finish();
  const auto spec = llc::parse_density(dens, llc::parse_window(window, rc.d));
  llc::ExperimentReport rep;
  rep.name = "poissonness";
  rep.seed = seed;
  rep.config = regime_json(rc);
  rep.config["reps"] = reps;
  rep.config["mc_samples"] = mc;
  rep.config["density"] = spec.to_json();
  rep.config["q"] = po.q;
  rep.config["cells"] = po.cells;
  rep.config["p_threshold"] = po.p_threshold;
  log("estimating g with " + std::to_string(mc) + " samples");
  const auto th = llc::compute_threshold(rc, mc, seed, workers);
  rep.metrics["threshold"] = th.result.to_json();
  log("sampling " + std::to_string(reps) + " clouds at u = " + llc::io::fmt(th.result.u));
  llc::ExtremesSampleOptions so{reps, seed, workers, std::nullopt};
  if (dens != "const" || window != "cube") so.density = spec;
  const auto s = llc::sample_extremes(rc, th.result.u, so);
  rep.metrics["oversize_clusters"] = s.oversize_clusters;
  rep.metrics["multi_exceedance_clusters"] = s.multi_exceedance_clusters;
  rep.metrics["above_lmax"] = s.above_lmax;
  const auto r = llc::poissonness_test(s.points, spec, s.region, po);
  rep.metrics["tests"] = r.to_json();
  std::vector<std::string> header;
  for (int i = 0; i < rc.d; ++i) header.push_back("x" + std::to_string(i));
  header.push_back("u");
  llc::io::CsvWriter pts(header);
  for (const auto& cloud : s.points)
    for (const auto& p : cloud) {
      auto row = p.center;
      row.push_back(p.u);
      pts.row(row);
    }
  llc::io::CsvWriter counts({"cloud", "count"});
  const auto cs = s.counts();
  for (std::size_t i = 0; i < cs.size(); ++i) counts.row({static_cast<double>(i), static_cast<double>(cs[i])});
  rep.series.emplace_back("extremes.csv", pts.str());
  rep.series.emplace_back("counts.csv", counts.str());
  rep.passed = r.passed();
  rep.wall_seconds = sw.seconds();
  return rep;
}

int cmd_experiment(const ExperimentArgs& a, const Common& c, const std::string& cmd) {
  std::string source;
  const auto seed = resolve_seed(c, &source);
  Config cfg(load_config(a.config));
  int workers = c.workers;
  llc::ExperimentReport rep;
  if (a.name == "anneal") rep = run_anneal(cfg, seed, workers);
  else if (a.name == "weibull") rep = run_weibull(cfg, seed, workers);
  else if (a.name == "deathcorr") rep = run_deathcorr(cfg, seed, workers);
  else if (a.name == "intensity") rep = run_intensity(cfg, seed, workers);
  else if (a.name == "poissonness") rep = run_poissonness(cfg, seed, workers);
  else throw llc::InvalidInput("unknown experiment: " + a.name);
  write_report(rep, c, cmd, source);
  log("wrote report to " + (fs::path(c.out_dir) / "report.json").string());
  return verdict(rep);
}

void add_common(CLI::App* sub, Common& c, bool seeded) {
  if (seeded) sub->add_option("--seed", c.seed, "master seed (falls back to PE_SEED, then 1)");
  sub->add_option("--out-dir", c.out_dir, "directory for every output path")->capture_default_str();
  sub->add_option("--workers", c.workers, "worker threads; results do not depend on it")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"llc: persistence of random point clouds and their large-lifetime cycles"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(llc::io::kVersion) + " (" + llc::io::git_describe() + ")");
  Common common;

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "sample a Poisson point cloud");
  sample->add_option("--n", sa.n, "intensity")->required()->check(CLI::PositiveNumber);
  sample->add_option("--window", sa.window, "cube | torus | box:lo,hi")->capture_default_str();
  sample->add_option("--density", sa.density, "const[:level] | gauss[:scale] | grid:path");
  sample->add_option("--dim", sa.dim, "dimension")->check(CLI::Range(1, 8))->capture_default_str();
  sample->add_option("--out", sa.out, "cloud CSV")->capture_default_str();
  add_common(sample, common, true);

  PersistArgs pa;
  auto* persist = app.add_subcommand("persist", "persistence diagram of a cloud CSV");
  persist->add_option("--in", pa.in, "cloud CSV")->required()->check(CLI::ExistingFile);
  persist->add_option("--filtration", pa.filtration, "cech | alpha | vr")
      ->check(CLI::IsMember({"cech", "alpha", "vr"}))
      ->capture_default_str();
  persist->add_option("--maxdim", pa.maxdim, "largest homology dimension")->capture_default_str();
  persist->add_option("--rmax", pa.rmax, "truncation radius");
  persist->add_flag("--torus", pa.torus, "read the cloud on the flat unit torus");
  persist->add_option("--out", pa.out, "diagram CSV (stdout when omitted)");
  add_common(persist, common, false);

  ThresholdArgs ta;
  auto* threshold = app.add_subcommand("threshold", "estimate g and invert it for u_{n,alpha}");
  threshold->add_option("--k", ta.k)->capture_default_str();
  threshold->add_option("--m", ta.m)->capture_default_str();
  threshold->add_option("--d", ta.dim)->capture_default_str();
  threshold->add_option("--filtration", ta.filtration)->check(CLI::IsMember({"cech", "alpha", "vr"}))->capture_default_str();
  threshold->add_option("--lifetime", ta.lifetime)->check(CLI::IsMember({"add", "mult", "additive", "multiplicative"}))->capture_default_str();
  threshold->add_option("--n", ta.n)->required()->check(CLI::PositiveNumber);
  threshold->add_option("--rn", ta.rn, "deathtime scale r_n");
  threshold->add_option("--rn-exp", ta.rn_exp, "beta with r_n = n^-beta");
  threshold->add_option("--alpha", ta.alpha)->check(CLI::NonNegativeNumber)->capture_default_str();
  threshold->add_option("--mc-samples", ta.mc_samples)->capture_default_str();
  threshold->add_option("--out", ta.out, "curve CSV")->capture_default_str();
  add_common(threshold, common, true);

  ExperimentArgs ea;
  auto* experiment = app.add_subcommand("experiment", "run an experiment from a JSON config");
  experiment->add_option("name", ea.name, "anneal | weibull | deathcorr | poissonness | intensity")
      ->required()
      ->check(CLI::IsMember({"anneal", "weibull", "deathcorr", "poissonness", "intensity"}));
  experiment->add_option("--config", ea.config, "JSON config")->check(CLI::ExistingFile);
  add_common(experiment, common, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  const std::string cmd = command_line(argc, argv);
  try {
    if (*sample) return cmd_sample(sa, common, cmd);
    if (*persist) return cmd_persist(pa, common, cmd);
    if (*threshold) return cmd_threshold(ta, common, cmd);
    if (*experiment) return cmd_experiment(ea, common, cmd);
  } catch (const llc::ResolutionError& e) {
    log(std::string("resolution error: ") + e.what());
    return kResolution;
  } catch (const llc::ConjectureFalsified& e) {
    log(std::string("conjecture falsified: ") + e.what());
    return kStatFail;
  } catch (const llc::InvalidInput& e) {
    log(std::string("invalid input: ") + e.what());
    return kUsage;
  } catch (const llc::DensitySpecError& e) {
    log(std::string("invalid density: ") + e.what());
    return kUsage;
  } catch (const llc::NotEmbeddable& e) {
    log(std::string("invalid input: ") + e.what());
    return kUsage;
  } catch (const llc::Unsupported& e) {
    log(std::string("unsupported: ") + e.what());
    return kUsage;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kRuntime;
  }
  return kUsage;
}
