// Acceptance run: prints PASS/FAIL per criterion and exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/core.h>
#include <unistd.h>

#include "latentbench/error.hpp"
#include "latentbench/forest.hpp"
#include "latentbench/harness.hpp"
#include "latentbench/isomap.hpp"
#include "latentbench/kernels.hpp"
#include "latentbench/logreg.hpp"
#include "latentbench/pca.hpp"
#include "latentbench/report.hpp"
#include "latentbench/rng.hpp"
#include "latentbench/vae.hpp"

using namespace latentbench;
namespace fs = std::filesystem;

namespace {

// Classifier regularization used by every benchmark run below. The library
// default (1.0) on a mean cross-entropy objective leaves 100-label fits
// nearly constant, which flattens every floor/ceiling gap.
constexpr double kLambda = 0.01;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void print_outcome(const std::string& id, const std::string& title, const Outcome& o, double seconds) {
  fmt::print("{} [{}] {} ({:.0f} s)\n", o.pass ? "PASS" : "FAIL", id, title, seconds);
  std::size_t start = 0;
  while (start < o.detail.size()) {
    const auto nl = o.detail.find('\n', start);
    fmt::print("       {}\n", o.detail.substr(start, nl - start));
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

void run_criterion(const std::string& id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  print_outcome(id, title, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / ("latentbench_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunConfig bench_config() {
  RunConfig cfg;
  cfg.classifier.logreg.lambda = kLambda;
  cfg.record_timing = false;
  cfg.embedding_cache = 128;
  return cfg;
}

const SemisupEffect* find_effect(const std::vector<EffectRow>& effects, const std::string& target,
                                 const std::string& embedder) {
  for (const auto& e : effects)
    if (e.target == target && e.embedder == embedder) return &e.effect;
  return nullptr;
}

// ---------------------------------------------------------------------------
// 1. MNIST trend

std::string mnist_id() {
  const std::string dir = std::string(LATENTBENCH_SOURCE_DIR) + "/data/mnist/";
  return "idx:" + dir + "images.idx3-ubyte," + dir + "labels.idx1-ubyte";
}

ExperimentPlan mnist_plan(std::vector<std::size_t> unlabeled) {
  ExperimentPlan p;
  p.dataset_id = mnist_id();
  p.target_name = "label";
  p.embedder = EmbedderKind::isomap;
  p.classifier = ClassifierKind::logreg;
  p.latent_dim = 50;
  p.labeled_sizes = {100};
  p.unlabeled_sizes = std::move(unlabeled);
  p.repetitions = 5;
  p.master_seed = 1;
  return p;
}

Outcome mnist_trend(const fs::path& dir) {
  const ExperimentPlan plan = mnist_plan({100, 500, 2000, 4000});
  RunConfig cfg = bench_config();
  cfg.include_anchors = false;
  SweepOptions opt;
  opt.results_path = (dir / "mnist_trend.csv").string();
  const std::vector<ExperimentPlan> plans{plan};
  run_sweep(plans, cfg, opt);
  const auto rows = aggregate(read_results(opt.results_path));

  std::vector<const AggregateRow*> curve;
  for (std::size_t u : plan.unlabeled_sizes)
    for (const auto& r : rows)
      if (r.key.unlabeled_size == u) curve.push_back(&r);
  if (curve.size() != plan.unlabeled_sizes.size()) return {false, "missing cells"};

  Outcome o;
  std::size_t inversions = 0;
  bool within = true;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    o.detail += fmt::format("U={:<5} accuracy {:.4f} ± {:.4f} (n={}){}", curve[i]->key.unlabeled_size,
                            curve[i]->mean, curve[i]->std, curve[i]->count, i + 1 < curve.size() ? "\n" : "");
    if (i > 0 && curve[i]->mean < curve[i - 1]->mean) {
      ++inversions;
      within = within && curve[i - 1]->mean - curve[i]->mean <= std::max(curve[i]->std, curve[i - 1]->std);
    }
  }
  const double gain = curve.back()->mean - curve.front()->mean;
  o.detail += fmt::format("\ninversions {} (within 1 std: {}), gain U=4000 over U=100: {:.2f} points",
                          inversions, within ? "yes" : "no", 100.0 * gain);
  o.pass = inversions <= 1 && within && gain >= 0.05;
  return o;
}

Outcome mnist_stretch(const fs::path& dir) {
  const ExperimentPlan plan = mnist_plan({100, 7000});
  const RunConfig cfg = bench_config();
  SweepOptions opt;
  opt.results_path = (dir / "mnist_stretch.csv").string();
  const std::vector<ExperimentPlan> plans{plan};
  run_sweep(plans, cfg, opt);
  const auto effects = compute_effects(read_results(opt.results_path), 7000, EffectBaseline::pipeline);
  const SemisupEffect* e = find_effect(effects, "label", "isomap");
  if (!e) return {false, "no effect computed"};
  Outcome o;
  o.detail = fmt::format(
      "floor {:.4f}, semi {:.4f}, ceiling {:.4f}\neffect {:.4f} ± {:.4f} (n={}, undefined {}), reference 0.8989 ± 0.1",
      e->floor_accuracy, e->semi_accuracy, e->ceiling_accuracy, e->value, e->std, e->count, e->undefined);
  o.pass = e->count >= 5 && std::abs(e->value - 0.8989) <= 0.1;
  return o;
}

// ---------------------------------------------------------------------------
// 2, 3 and 6a share one surrogate sweep.

const std::vector<std::string> kTargets{"sex",       "age", "smoking", "work_satisfaction",
                                        "household_income", "household_size"};

struct SurrogateRun {
  std::vector<ResultRecord> records;
  std::uint64_t leakage_checks = 0;
  std::string leakage_error;
  std::size_t failed = 0;
};

SurrogateRun surrogate_sweep(const fs::path& dir) {
  std::vector<ExperimentPlan> plans;
  ExperimentPlan base;
  base.dataset_id = "surrogate:t1";
  base.latent_dim = 50;
  base.repetitions = 5;
  base.master_seed = 7;
  for (auto embedder : {EmbedderKind::pca, EmbedderKind::vae})
    for (const auto& t : kTargets) {
      ExperimentPlan p = base;
      p.target_name = t;
      p.embedder = embedder;
      p.classifier = ClassifierKind::logreg;
      p.labeled_sizes = {100};
      p.unlabeled_sizes = {100, 7000};
      plans.push_back(p);
    }
  for (const char* t : {"sex", "household_size"})
    for (auto classifier : {ClassifierKind::logreg, ClassifierKind::random_forest}) {
      ExperimentPlan p = base;
      p.target_name = t;
      p.embedder = EmbedderKind::vae;
      p.classifier = classifier;
      p.labeled_sizes = {1000};
      p.unlabeled_sizes = {7000};
      p.binarize = true;
      plans.push_back(p);
    }
  RunConfig cfg = bench_config();
  SweepOptions opt;
  opt.results_path = (dir / "surrogate.csv").string();
  SurrogateRun run;
  const std::uint64_t before = leakage_checks_performed();
  try {
    run.failed = run_sweep(plans, cfg, opt).failed;
  } catch (const LeakageError& e) {
    run.leakage_error = e.what();
  }
  run.leakage_checks = leakage_checks_performed() - before;
  run.records = read_results(opt.results_path);
  return run;
}

Outcome embedder_ordering(const SurrogateRun& run) {
  std::vector<ResultRecord> l100;
  for (const auto& r : run.records)
    if (r.metadata_json.find("binarize_mean") == std::string::npos) l100.push_back(r);
  const auto effects = compute_effects(l100, 7000, EffectBaseline::pipeline);
  const auto summary = summarize_effects(effects);
  Outcome o;
  for (const auto& e : effects)
    o.detail += fmt::format("{:<18} {:<4} floor {:.3f} semi {:.3f} ceiling {:.3f} effect {:+.3f} ± {:.3f} (n={})\n",
                            e.target, e.embedder, e.effect.floor_accuracy, e.effect.semi_accuracy,
                            e.effect.ceiling_accuracy, e.effect.value, e.effect.std, e.effect.count);
  double pca = std::numeric_limits<double>::quiet_NaN(), vae = pca;
  for (const auto& s : summary) {
    o.detail += fmt::format("cross-target {:<4} effect {:+.4f} ± {:.4f} (n={})\n", s.embedder, s.effect.mean,
                            s.effect.std, s.effect.count);
    if (s.embedder == "pca") pca = s.effect.mean;
    if (s.embedder == "vae") vae = s.effect.mean;
  }
  o.detail += "need: vae > pca and |pca| <= 0.1";
  o.pass = vae > pca && std::abs(pca) <= 0.1;
  return o;
}

Outcome nonlinear_target(const SurrogateRun& run) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> acc;
  for (const auto& r : run.records)
    if (r.labeled_size == 1000 && r.unlabeled_size == 7000 && r.ok())
      acc[{r.target, r.classifier}].push_back(r.accuracy);
  auto mean = [&](const std::string& t, const std::string& c) {
    const auto& v = acc[{t, c}];
    return mean_std(v);
  };
  const MeanStd xor_lr = mean("household_size", "logreg"), xor_rf = mean("household_size", "random_forest");
  const MeanStd lin_lr = mean("sex", "logreg"), lin_rf = mean("sex", "random_forest");
  Outcome o;
  o.detail = fmt::format(
      "nonlinear (household_size): logreg {:.4f} ± {:.4f}, forest {:.4f} ± {:.4f} (n={}), forest - logreg {:+.2f} points (need >= 5)\n"
      "linear (sex): logreg {:.4f} ± {:.4f}, forest {:.4f} ± {:.4f} (n={}), logreg - forest {:+.2f} points (need >= -2)",
      xor_lr.mean, xor_lr.std, xor_rf.mean, xor_rf.std, xor_rf.count, 100.0 * (xor_rf.mean - xor_lr.mean),
      lin_lr.mean, lin_lr.std, lin_rf.mean, lin_rf.std, lin_rf.count, 100.0 * (lin_lr.mean - lin_rf.mean));
  o.pass = xor_lr.count > 0 && lin_lr.count > 0 && xor_rf.mean - xor_lr.mean >= 0.05 &&
           lin_lr.mean >= lin_rf.mean - 0.02;
  return o;
}

// ---------------------------------------------------------------------------
// 4. Numerical oracles

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

Outcome gradient_oracles() {
  Rng rng(11);
  double vae_worst = 0.0, lr_worst = 0.0;
  for (int instance = 0; instance < 6; ++instance) {
    const std::size_t p = 5 + instance, d = 2, hidden = 4, b = 4;
    const FeatureKind kind =
        instance % 2 ? FeatureKind::image_pixels_unit_interval : FeatureKind::tabular_standardized;
    VaeParams params = vae_init(p, d, hidden, rng.next());
    for (auto t : params.tensors())
      for (double& v : t) v += 0.3 * rng.normal();
    Matrix batch(b, p), noise(b, d);
    for (double& v : batch.values()) v = kind == FeatureKind::tabular_standardized ? rng.normal() : rng.uniform();
    for (double& v : noise.values()) v = rng.normal();
    VaeParams grad = VaeParams::zeros(p, d, hidden);
    vae_loss(params, batch, kind, noise, &grad);
    auto tensors = params.tensors();
    const auto grads = std::as_const(grad).tensors();
    for (std::size_t t = 0; t < tensors.size(); ++t)
      for (std::size_t i = 0; i < tensors[t].size(); ++i) {
        const double saved = tensors[t][i], h = 1e-5;
        tensors[t][i] = saved + h;
        const double up = vae_loss(params, batch, kind, noise).total;
        tensors[t][i] = saved - h;
        const double down = vae_loss(params, batch, kind, noise).total;
        tensors[t][i] = saved;
        vae_worst = std::max(vae_worst, relative_error((up - down) / (2 * h), grads[t][i], 1e-4));
      }

    const std::size_t n = 30, dim = 4, c = 3;
    Matrix x(n, dim);
    std::vector<int> y(n);
    for (double& v : x.values()) v = rng.normal();
    for (auto& v : y) v = static_cast<int>(rng.index(c));
    LogRegModel m;
    m.lambda = 0.2;
    m.weights = Matrix(c, dim);
    for (double& v : m.weights.values()) v = 0.5 * rng.normal();
    m.biases = {0.0, 0.5 * rng.normal(), 0.5 * rng.normal()};
    std::vector<double> theta = logreg_pack(m), g(theta.size());
    logreg_objective(m, x, y, g);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double h = 1e-6;
      std::vector<double> up = theta, down = theta;
      up[k] += h;
      down[k] -= h;
      LogRegModel mu = m, md = m;
      logreg_unpack(up, mu);
      logreg_unpack(down, md);
      const double numeric = (logreg_objective(mu, x, y) - logreg_objective(md, x, y)) / (2 * h);
      lr_worst = std::max(lr_worst, relative_error(numeric, g[k], 1e-3));
    }
  }
  return {vae_worst <= 1e-4 && lr_worst <= 1e-5,
          fmt::format("6 instances; worst relative error VAE {:.2e} (tol 1e-4), logistic {:.2e} (tol 1e-5)", vae_worst,
                      lr_worst)};
}

Matrix floyd_warshall(const NeighborGraph& g) {
  const std::size_t m = g.size();
  Matrix d(m, m, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m; ++i) {
    d(i, i) = 0.0;
    for (const auto& e : g.adjacency[i]) d(i, e.to) = std::min(d(i, e.to), e.weight);
  }
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
  return d;
}

Outcome geodesic_oracle() {
  Rng rng(12);
  std::size_t exact = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 2 + rng.index(59);
    NeighborGraph g;
    g.adjacency.resize(m);
    for (std::size_t i = 1; i < m; ++i) g.add_edge(i, rng.index(i), 1.0 + rng.index(9));
    for (std::size_t e = 0; e < m; ++e) {
      const std::size_t a = rng.index(m), b = rng.index(m);
      if (a != b) g.add_edge(a, b, 1.0 + rng.index(9));
    }
    if (geodesic_distances(g) == floyd_warshall(g)) ++exact;
  }
  return {exact == 50, fmt::format("{}/50 random connected graphs (m <= 60) match Floyd-Warshall exactly", exact)};
}

Outcome mds_oracle() {
  Rng rng(13);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 5 + rng.index(30), p = 1 + rng.index(4);
    Matrix x(m, p);
    for (double& v : x.values()) v = 3.0 * rng.normal();
    auto dist = [](const Matrix& a, std::size_t i, std::size_t j) {
      double s = 0.0;
      for (std::size_t c = 0; c < a.cols(); ++c) s += (a(i, c) - a(j, c)) * (a(i, c) - a(j, c));
      return std::sqrt(s);
    };
    Matrix d(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) d(i, j) = dist(x, i, j);
    const MdsResult r = classical_mds(d, p, EigenSolver::dense);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) worst = std::max(worst, std::abs(dist(r.embedding, i, j) - d(i, j)));
  }
  return {worst <= 1e-8, fmt::format("20 point sets; worst distance error {:.2e} (tol 1e-8)", worst)};
}

Outcome pca_oracle() {
  Rng rng(14);
  double ortho = 0.0, trace = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20 + rng.index(50), p = 2 + rng.index(10);
    Matrix x(n, p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p; ++j) x(i, j) = (1.0 + static_cast<double>(j)) * rng.normal();
    const PcaModel m = pca_fit(x, p);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b) {
        double dot = 0.0;
        for (std::size_t j = 0; j < p; ++j) dot += m.components(a, j) * m.components(b, j);
        ortho = std::max(ortho, std::abs(dot - (a == b ? 1.0 : 0.0)));
      }
    double total = 0.0, explained = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      double mean = 0.0, ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
      total += ss / static_cast<double>(n - 1);
    }
    for (double v : m.explained_variance) explained += v;
    trace = std::max(trace, std::abs(total - explained) / total);
  }
  return {ortho <= 1e-8 && trace <= 1e-8,
          fmt::format("20 fits at d = p; worst orthonormality error {:.2e}, relative trace error {:.2e} (tol 1e-8)",
                      ortho, trace)};
}

// ---------------------------------------------------------------------------
// 5. Closed forms

Outcome closed_forms() {
  const double kl0 = gaussian_kl(0.0, 0.0), kl1 = gaussian_kl(1.0, 0.0);
  const double g55 = gini_impurity(std::vector<double>{5, 5}), g100 = gini_impurity(std::vector<double>{10, 0});
  const MdsResult r = classical_mds(Matrix::from_rows({{0, 3, 4}, {3, 0, 1}, {4, 1, 0}}), 1);
  const double sign = r.embedding(0, 0) < 0 ? 1.0 : -1.0;
  const double expect[] = {-7.0 / 3.0, 2.0 / 3.0, 5.0 / 3.0};
  double mds = 0.0;
  for (std::size_t i = 0; i < 3; ++i) mds = std::max(mds, std::abs(sign * r.embedding(i, 0) - expect[i]));
  Outcome o;
  o.detail = fmt::format("KL(0,1) = {}, KL(1,1) = {}, Gini(5,5) = {}, Gini(10,0) = {}, collinear MDS error {:.2e}",
                         kl0, kl1, g55, g100, mds);
  o.pass = kl0 == 0.0 && std::abs(kl1 - 0.5) < 1e-15 && std::abs(g55 - 0.5) < 1e-15 && g100 == 0.0 && mds <= 1e-10;
  return o;
}

// ---------------------------------------------------------------------------
// 6. Protocol integrity

Outcome protocol_integrity(const SurrogateRun& run, const fs::path& dir) {
  Outcome o;
  const bool leak_free = run.leakage_error.empty() && run.leakage_checks >= run.records.size();
  o.detail = fmt::format("surrogate sweep: {} cells, {} failed, {} leakage checks, {}\n", run.records.size(),
                         run.failed, run.leakage_checks,
                         run.leakage_error.empty() ? "no leakage" : "LEAKAGE: " + run.leakage_error);

  std::vector<ExperimentPlan> plans;
  for (auto embedder : {EmbedderKind::pca, EmbedderKind::isomap, EmbedderKind::vae}) {
    ExperimentPlan p;
    p.dataset_id = "surrogate:t1";
    p.target_name = "age";
    p.embedder = embedder;
    p.latent_dim = 5;
    p.labeled_sizes = {50, 100};
    p.unlabeled_sizes = {100, 300};
    p.repetitions = 3;
    p.master_seed = 21;
    plans.push_back(p);
  }
  RunConfig cfg = bench_config();
  cfg.train_size = 400;
  cfg.test_size = 200;
  cfg.vae.epochs = 20;
  SweepOptions a;
  a.results_path = (dir / "integrity_a.csv").string();
  const SweepSummary whole = run_sweep(plans, cfg, a);
  SweepOptions b = a;
  b.results_path = (dir / "integrity_b.csv").string();
  run_sweep(plans, cfg, b);
  const std::string reference = slurp(a.results_path);
  const bool same_seed = reference == slurp(b.results_path);

  SweepOptions part = a;
  part.results_path = (dir / "integrity_resumed.csv").string();
  const std::size_t stop_after = whole.executed / 2;
  std::size_t seen = 0;
  part.on_record = [&](const ResultRecord&) { return ++seen < stop_after; };
  run_sweep(plans, cfg, part);
  {
    std::ofstream torn(part.results_path, std::ios::app);
    torn << "0f0f0f0f,surrogate:t1,ag";
  }
  part.on_record = nullptr;
  part.resume = true;
  const SweepSummary rest = run_sweep(plans, cfg, part);
  const bool resumed = slurp(part.results_path) == reference;

  o.detail += fmt::format("repeat with the same master seeds: {} ({} cells)\n", same_seed ? "bitwise identical" : "DIFFERENT",
                          whole.executed);
  o.detail += fmt::format("interrupt after {} cells, then resume ({} skipped, {} executed): {}", stop_after, rest.skipped,
                          rest.executed, resumed ? "bitwise identical" : "DIFFERENT");
  o.pass = leak_free && same_seed && resumed;
  return o;
}

}  // namespace

// --report-only exits 0 once every criterion has been evaluated, so ctest checks
// that the acceptance run completes while the PASS/FAIL lines stay as measured.
int main(int argc, char** argv) {
  const bool report_only = argc > 1 && std::string_view(argv[1]) == "--report-only";
  fmt::print("latentbench acceptance (kernels: {}, classifier lambda {})\n", kernels::isa_name(kernels::active_isa()),
             kLambda);
  const fs::path dir = scratch_dir();

  run_criterion("1", "MNIST unlabeled-size trend, Isomap(50) + logistic regression, L=100",
                [&] { return mnist_trend(dir); });
  run_criterion("1s", "MNIST semisupervision effect at U=7000 against 0.8989 +/- 0.1",
                [&] { return mnist_stretch(dir); });

  SurrogateRun surrogate;
  const auto t0 = std::chrono::steady_clock::now();
  surrogate = surrogate_sweep(dir);
  fmt::print("       surrogate sweep finished in {:.0f} s\n",
             std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  run_criterion("2", "surrogate embedder ordering at L=100: VAE effect > PCA effect, PCA within 0.1 of 0",
                [&] { return embedder_ordering(surrogate); });
  run_criterion("3", "surrogate binary targets at L=1000: forest wins the nonlinear target, logistic holds the linear one",
                [&] { return nonlinear_target(surrogate); });
  run_criterion("4a", "VAE and logistic gradients against central differences", gradient_oracles);
  run_criterion("4b", "geodesics against Floyd-Warshall", geodesic_oracle);
  run_criterion("4c", "classical MDS reproduces Euclidean distances", mds_oracle);
  run_criterion("4d", "PCA orthonormality and trace preservation", pca_oracle);
  run_criterion("5", "closed forms: KL, Gini, collinear MDS", closed_forms);
  run_criterion("6", "protocol integrity: leakage, seeded reproducibility, interrupt and resume",
                [&] { return protocol_integrity(surrogate, dir); });

  fs::remove_all(dir);
  fmt::print("{}\n", failures == 0 ? "ALL PASS" : fmt::format("{} criteria FAILED", failures));
  return failures == 0 || report_only ? 0 : 1;
}
