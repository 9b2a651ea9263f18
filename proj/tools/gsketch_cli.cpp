#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

#include "gsketch/gsketch.hpp"

using namespace gsketch;

namespace {

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kParse = 2,
  kFreshness = 3,
  kSampling = 4,
  kContract = 5,
};

struct RunConfig {
  std::string input;
  std::string format = "csv";
  std::string generator = "gaussian";
  uint64_t n = 256;
  int d = 8;
  double nu = 1.0 / 16;
  std::string measure = "l2";
  double tau = 1;
  double lambda = 0;
  int T = 100;
  int s = 1;
  double eta = 0;
  double eps = 0.5;
  double alpha = 0;  // 0: derived from eps
  double delta = 0.25;
  uint64_t seed = 1;
  std::string out;
  std::string mode = "sketch";
  int draws = 1000;
  bool no_sensitivity = false;
};

struct Instance {
  Mat A;
  Vec b;
  Vec x;
};

Instance load(const RunConfig& c) {
  Instance I;
  if (!c.input.empty()) {
    Dataset D = read_dataset(c.input, c.format);
    I.A = std::move(D.A);
    I.b = std::move(D.b);
    I.x = Vec::Zero(I.A.cols());
    return I;
  }
  Generated G;
  const int n = static_cast<int>(c.n);
  if (c.generator == "example1") G = gen_example1(n, c.d, c.seed);
  else if (c.generator == "example2") G = gen_example2(n, c.d, c.seed);
  else if (c.generator == "example3") G = gen_example3(n, c.d, c.nu, c.seed);
  else if (c.generator == "gaussian") G = gen_gaussian(n, c.d, c.seed);
  else if (c.generator == "lstsq") G = gen_lstsq(n, c.d, c.seed);
  else throw ParseError("unknown generator " + c.generator);
  I.A = std::move(G.A);
  I.b = std::move(G.b);
  I.x = std::move(G.x);
  return I;
}

MeasureSpec measure_of(const RunConfig& c) {
  MeasureSpec m;
  try {
    m.kind = parse_measure_kind(c.measure);
  } catch (const std::exception& e) {
    throw ParseError(e.what());
  }
  m.tau = c.tau;
  m.lambda = c.lambda;
  return m;
}

GSamplerParams sampler_params(const RunConfig& c, const MeasureSpec& m, int d, uint64_t n, int p = 2) {
  GSamplerParams P;
  P.layout = Layout(d, p);
  P.n = n;
  P.T = c.T;
  P.alpha = c.alpha > 0 ? c.alpha : smoothness_alpha(m, c.eps);
  return P;
}

// Output goes to --out when given, stdout otherwise.
struct Sink {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit Sink(const std::string& path) {
    if (path.empty()) return;
    file.open(path);
    if (!file) throw ParseError("cannot open " + path + " for writing");
    os = &file;
  }
  std::ostream& operator*() { return *os; }
};

std::unique_ptr<BoostedSampler> build_boosted(const RunConfig& c, const Instance& I, const MeasureSpec& m) {
  auto B = std::make_unique<BoostedSampler>(sampler_params(c, m, I.A.cols(), I.A.rows()), derive_seed(c.seed, {201}), c.delta);
  for (int i = 0; i < I.A.rows(); ++i) B->process_row(i, I.A.row(i).transpose(), I.b[i]);
  B->freeze();
  return B;
}

int cmd_sample(const RunConfig& c) {
  Instance I = load(c);
  MeasureSpec m = measure_of(c);
  validate(m, I.A.cols());
  auto B = build_boosted(c, I, m);
  Projector proj(Layout(I.A.cols(), 2), QueryKind::Gradient, m, I.x);
  auto R = B->replay(proj);
  Rng rng(derive_seed(c.seed, {202}));
  Sink out(c.out);
  *out << "draw,ok,row,instance,p_hat,norm\n";
  (*out).precision(17);
  for (int k = 0; k < c.draws; ++k) {
    SampleOutcome o = R.draw(rng);
    *out << k << ',' << (o.ok ? 1 : 0) << ',' << (o.ok ? int64_t(o.id) : -1) << ',' << o.instance << ','
         << o.p_hat << ',' << (o.ok ? o.v.norm() : 0.0) << '\n';
  }
  return kOk;
}

int cmd_estimate(const RunConfig& c) {
  Instance I = load(c);
  MeasureSpec m = measure_of(c);
  validate(m, I.A.cols());
  GSampler S(sampler_params(c, m, I.A.cols(), I.A.rows()), derive_seed(c.seed, {203}));
  for (int i = 0; i < I.A.rows(); ++i) S.process_row(i, I.A.row(i).transpose(), I.b[i]);
  S.freeze();
  Projector proj(Layout(I.A.cols(), 2), QueryKind::Gradient, m, I.x);
  MassEstimate e = estimate_mass(S, proj, c.eps);
  ExactInstance E(I.A, I.b, m);
  double exact = 0;
  for (double v : gradient_norms(E, I.x)) exact += v;
  Sink out(c.out);
  (*out).precision(17);
  *out << "estimate,exact,ratio,eps\n";
  *out << e.value << ',' << exact << ',' << (exact > 0 ? e.value / exact : 0.0) << ',' << e.eps << '\n';
  return kOk;
}

SGDConfig sgd_config(const RunConfig& c, const MeasureSpec& m, uint64_t n, int d) {
  SGDConfig g;
  g.n = n;
  g.d = d;
  g.T = c.T;
  g.eta = c.eta;
  g.measure = m;
  g.seed = c.seed;
  g.eps = c.eps;
  g.delta = c.delta;
  g.use_sensitivity = !c.no_sensitivity;
  if (c.alpha > 0) g.sampler.alpha = c.alpha;
  return g;
}

int cmd_sgd(const RunConfig& c) {
  Instance I = load(c);
  MeasureSpec m = measure_of(c);
  validate(m, I.A.cols());
  ExactInstance E(I.A, I.b, m);
  SGDConfig g = sgd_config(c, m, I.A.rows(), I.A.cols());
  Vec x0 = Vec::Zero(I.A.cols());
  SGDTrajectory tr;
  if (c.mode == "sketch") {
    SGDEngine eng(g);
    for (int i = 0; i < I.A.rows(); ++i) eng.ingest(i, I.A.row(i).transpose(), I.b[i]);
    tr = eng.run(x0);
  } else if (c.mode == "uniform") {
    tr = run_baseline(E, x0, g, BaselineMode::Uniform);
  } else if (c.mode == "exact") {
    tr = run_baseline(E, x0, g, BaselineMode::ExactImportance);
  } else if (c.mode == "gd") {
    tr = run_baseline(E, x0, g, BaselineMode::FullGD);
  } else {
    throw ParseError("unknown mode " + c.mode);
  }
  Sink out(c.out);
  write_trajectory_csv(*out, tr, &E);
  double var = 0;
  for (const auto& s : tr.steps) var += s.var_proxy;
  int reused = 0;
  for (const auto& kv : tr.usage) reused += kv.second > 1;
  std::cerr.precision(10);
  std::cerr << "final_F=" << objective(E, tr.iterates.back()) << " avg_F=" << objective(E, tr.average())
            << " mean_sq_norm=" << (tr.steps.empty() ? 0.0 : var / tr.steps.size())
            << " instances_used=" << tr.usage.size() << " reused=" << reused << " heavy_draws=" << tr.heavy_draws
            << '\n';
  return kOk;
}

// generator,n,d,sigma2_uni,sigma2_opt,m2_uni,m2_opt,ratio,sketch_m2,sketch_ratio
int cmd_bench_variance(const RunConfig& c) {
  std::vector<std::string> gens;
  if (!c.input.empty()) gens = {"input"};
  else if (c.generator == "all") gens = {"example1", "example2", "example3"};
  else gens = {c.generator};
  MeasureSpec m = measure_of(c);
  Sink out(c.out);
  (*out).precision(10);
  *out << "generator,n,d,sigma2_uni,sigma2_opt,m2_uni,m2_opt,ratio,sketch_m2,sketch_ratio\n";
  for (const auto& gname : gens) {
    RunConfig cc = c;
    if (gname != "input") cc.generator = gname;
    Instance I = load(cc);
    validate(m, I.A.cols());
    ExactInstance E(I.A, I.b, m);
    Variances V = exact_variances(E, I.x);
    auto B = build_boosted(cc, I, m);
    Projector proj(Layout(I.A.cols(), 2), QueryKind::Gradient, m, I.x);
    auto R = B->replay(proj);
    Rng rng(derive_seed(c.seed, {204}));
    double acc = 0;
    int ok = 0;
    const double n = I.A.rows();
    for (int k = 0; k < c.draws; ++k) {
      SampleOutcome o = R.draw(rng);
      if (!o.ok) continue;
      acc += (o.v / (n * o.p_hat)).squaredNorm();
      ++ok;
    }
    double sm2 = ok ? acc / ok : 0.0;
    *out << gname << ',' << I.A.rows() << ',' << I.A.cols() << ',' << V.sigma2_uni << ',' << V.sigma2_opt << ','
         << V.m2_uni << ',' << V.m2_opt << ',' << (V.m2_opt > 0 ? V.m2_uni / V.m2_opt : 0.0) << ',' << sm2 << ','
         << (V.m2_opt > 0 ? sm2 / V.m2_opt : 0.0) << '\n';
  }
  return kOk;
}

int cmd_hessian(const RunConfig& c) {
  Instance I = load(c);
  MeasureSpec m = measure_of(c);
  validate(m, I.A.cols());
  ExactInstance E(I.A, I.b, m);
  HessianConfig h;
  h.n = I.A.rows();
  h.d = I.A.cols();
  h.T = c.T;
  h.s = c.s;
  h.measure = m;
  h.seed = c.seed;
  h.eps = c.eps;
  h.delta = c.delta;
  h.use_sensitivity = !c.no_sensitivity;
  if (c.alpha > 0) h.sampler.alpha = c.alpha;
  HessianEngine eng(h);
  for (int i = 0; i < I.A.rows(); ++i) eng.ingest(i, I.A.row(i).transpose(), I.b[i]);
  Vec x0 = Vec::Zero(h.d);
  HessianTrajectory tr = eng.run(x0, [&](const Vec& x) { return full_gradient(E, x); });
  Sink out(c.out);
  (*out).precision(17);
  *out << "step,F,grad_norm,heavy_draws\n";
  for (size_t t = 0; t < tr.iterates.size(); ++t) {
    int heavy = 0;
    if (t > 0)
      for (const auto& d : tr.steps[t - 1].draws) heavy += d.heavy;
    *out << t << ',' << objective(E, tr.iterates[t]) << ',' << full_gradient(E, tr.iterates[t]).norm() << ','
         << heavy << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig c;
  CLI::App app{"Streaming importance-sampled gradient and Hessian sketches"};
  app.require_subcommand(1);
  bool print_config = false;

  auto common = [&](CLI::App* s) {
    s->option_defaults()->always_capture_default();
    s->set_config("--config", "", "key=value configuration file");
    s->add_option("--input", c.input, "Dataset path (overrides --generator)");
    s->add_option("--format", c.format, "Input format")->check(CLI::IsMember({"csv", "bin"}));
    s->add_option("--generator", c.generator, "Synthetic instance")
        ->check(CLI::IsMember({"example1", "example2", "example3", "gaussian", "lstsq", "all"}));
    s->add_option("--n", c.n, "Rows for generators");
    s->add_option("--d", c.d, "Dimension for generators");
    s->add_option("--nu", c.nu, "Heavy fraction for example3");
    s->add_option("--measure", c.measure, "l1, l2, huber, ridge, lasso, group_lasso, cubic");
    s->add_option("--tau", c.tau, "Huber threshold");
    s->add_option("--lambda", c.lambda, "Regularization weight");
    s->add_option("--T", c.T, "Steps");
    s->add_option("--s", c.s, "Hessians per step");
    s->add_option("--eta", c.eta, "Step size (0: 1/sqrt(T))");
    s->add_option("--eps", c.eps, "Accuracy");
    s->add_option("--alpha", c.alpha, "Sketch accuracy (0: eps/4)");
    s->add_option("--delta", c.delta, "Per-step failure target");
    s->add_option("--seed", c.seed, "Seed")->envname("GSKETCH_SEED");
    s->add_option("--out", c.out, "Output CSV path");
    s->add_option("--mode", c.mode, "SGD mode")->check(CLI::IsMember({"sketch", "uniform", "exact", "gd"}));
    s->add_option("--draws", c.draws, "Draws for sample and bench-variance");
    s->add_flag("--no-sensitivity", c.no_sensitivity, "Sketch every row");
    s->add_flag("--print-config", print_config, "Print the effective configuration and exit")
        ->configurable(false);
  };
  auto* sample = app.add_subcommand("sample", "Draw importance samples at the instance's query point");
  auto* estimate = app.add_subcommand("estimate", "Estimate the total gradient mass");
  auto* sgd = app.add_subcommand("sgd", "Run SGD and write the trajectory");
  auto* bench = app.add_subcommand("bench-variance", "Compare estimator second moments");
  auto* hess = app.add_subcommand("hessian", "Run sampled-Hessian Newton");
  for (auto* s : {sample, estimate, sgd, bench, hess}) {
    common(s);
    s->configurable();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kParse;
  }
  if (print_config) {
    for (auto* s : app.get_subcommands()) std::cout << s->config_to_str(true, false);
    return kOk;
  }

  try {
    if (*sample) return cmd_sample(c);
    if (*estimate) return cmd_estimate(c);
    if (*sgd) return cmd_sgd(c);
    if (*bench) return cmd_bench_variance(c);
    if (*hess) return cmd_hessian(c);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const FreshnessExhausted& e) {
    std::cerr << "freshness exhausted: " << e.what() << '\n';
    return kFreshness;
  } catch (const StepFailed& e) {
    std::cerr << "sampling failed: " << e.what() << '\n';
    return kSampling;
  } catch (const EstimationFailure& e) {
    std::cerr << "estimation failed: " << e.what() << '\n';
    return kSampling;
  } catch (const ContractViolation& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kContract;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
