#include "latentbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <list>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "latentbench/error.hpp"
#include "latentbench/ingest.hpp"
#include "latentbench/isomap.hpp"
#include "latentbench/log.hpp"
#include "latentbench/pca.hpp"

namespace latentbench {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(EffectBaseline b) noexcept {
  return b == EffectBaseline::pipeline ? "pipeline" : "raw";
}

EffectBaseline parse_effect_baseline(std::string_view name) {
  if (name == "pipeline") return EffectBaseline::pipeline;
  if (name == "raw") return EffectBaseline::raw;
  throw ConfigError("unknown effect baseline '" + std::string(name) + "' (expected pipeline or raw)");
}

json RunConfig::to_json() const {
  json vae_json = latentbench::to_json(vae);
  vae_json.erase("seed");  // replaced per fit
  json cls = latentbench::to_json(classifier);
  return {{"train_size", train_size},
          {"test_size", test_size},
          {"isomap_k", isomap_k},
          {"max_geodesic_bytes", max_geodesic_bytes},
          {"classifier", cls},
          {"vae", vae_json},
          {"effect_baseline", std::string(to_string(effect_baseline))},
          {"include_anchors", include_anchors}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "train_size") c.train_size = v.get<std::size_t>();
      else if (key == "test_size") c.test_size = v.get<std::size_t>();
      else if (key == "isomap_k") c.isomap_k = v.get<std::size_t>();
      else if (key == "max_geodesic_bytes") c.max_geodesic_bytes = v.get<std::uint64_t>();
      else if (key == "effect_baseline") c.effect_baseline = parse_effect_baseline(v.get<std::string>());
      else if (key == "include_anchors") c.include_anchors = v.get<bool>();
      else if (key == "record_timing") c.record_timing = v.get<bool>();
      else if (key == "embedding_cache") c.embedding_cache = v.get<std::size_t>();
      else if (key == "lambda") c.classifier.logreg.lambda = v.get<double>();
      else if (key == "trees") c.classifier.forest.trees = v.get<std::size_t>();
      else if (key == "min_leaf") c.classifier.forest.min_leaf = v.get<std::size_t>();
      else if (key == "classifier") c.classifier = classifier_config_from_json(v);
      else if (key == "vae") {
        json merged = latentbench::to_json(c.vae);
        for (const auto& [vk, vv] : v.items()) {
          if (!merged.contains(vk)) throw ConfigError("unknown vae setting '" + vk + "'");
          merged[vk] = vv;
        }
        c.vae = vae_config_from_json(merged);
      } else {
        throw ConfigError("unknown run config field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  c.vae.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Dataset resolution

namespace {

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    out.emplace_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

Dataset resolve_dataset(const std::string& id) {
  const auto colon = id.find(':');
  if (colon == std::string::npos)
    throw ConfigError("dataset id '" + id + "' has no scheme (idx:, csv: or surrogate:)");
  const std::string scheme = id.substr(0, colon);
  const std::string rest = id.substr(colon + 1);
  if (scheme == "idx") {
    const auto parts = split_on(rest, ',');
    if (parts.size() != 2) throw ConfigError("idx dataset id needs <images>,<labels>: " + id);
    return read_idx_pair(parts[0], parts[1]);
  }
  if (scheme == "csv") {
    const auto parts = split_on(rest, ';');
    std::vector<std::string> targets;
    if (parts.size() == 2) targets = split_on(parts[1], ',');
    if (parts.size() > 2 || targets.empty())
      throw ConfigError("csv dataset id needs <path>;<target>[,<target>...]: " + id);
    return read_table(parts[0], ',', targets).dataset;
  }
  if (scheme == "surrogate") {
    const auto parts = split_on(rest, ':');
    std::uint64_t seed = 0;
    if (parts.size() == 2) seed = std::stoull(parts[1]);
    if (parts.size() > 2) throw ConfigError("surrogate dataset id is surrogate:<modality>[:seed]");
    return generate_surrogate(ukbb_surrogate_spec(parts[0], seed)).dataset;
  }
  throw ConfigError("unknown dataset scheme '" + scheme + "'");
}

}  // namespace

std::shared_ptr<const Dataset> load_dataset(const std::string& dataset_id) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const Dataset>> loaded;
  std::lock_guard lock(mu);
  auto it = loaded.find(dataset_id);
  if (it != loaded.end()) return it->second;
  auto ds = std::make_shared<const Dataset>(resolve_dataset(dataset_id));
  ds->validate();
  loaded.emplace(dataset_id, ds);
  return ds;
}

// ---------------------------------------------------------------------------
// Embeddings

namespace {

struct FittedEmbedding {
  EmbedderKind kind = EmbedderKind::raw;
  std::optional<Standardizer> standardizer;
  PcaModel pca;
  IsomapModel isomap;
  VaeParams vae;
  json info = json::object();

  Matrix standardized(const Dataset& rows) const {
    return standardizer ? standardize_apply(rows, *standardizer).features : rows.features;
  }

  Matrix transform(const Matrix& x) const {
    switch (kind) {
      case EmbedderKind::pca: return pca_transform(pca, x);
      case EmbedderKind::isomap: return isomap_transform(isomap, x);
      case EmbedderKind::vae: return vae_encode(vae, x);
      case EmbedderKind::raw: return x;
    }
    return x;
  }
};

using EmbeddingPtr = std::shared_ptr<const FittedEmbedding>;

std::uint64_t pool_hash(const Dataset& pool) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t id : pool.row_ids) h = mix64(h ^ static_cast<std::uint64_t>(id));
  return h;
}

EmbeddingPtr fit_embedding(const ExperimentPlan& plan, const Dataset& pool, const RunConfig& cfg,
                           std::uint64_t seed) {
  auto e = std::make_shared<FittedEmbedding>();
  e->kind = plan.embedder;
  Matrix x;
  if (pool.feature_kind == FeatureKind::tabular_standardized) {
    require_no_test_rows(pool, "standardize_fit");
    e->standardizer = standardize_fit(pool);
    x = standardize_apply(pool, *e->standardizer).features;
  } else {
    x = pool.features;
  }
  if (plan.embedder != EmbedderKind::raw) require_no_test_rows(pool, "embedding fit");
  switch (plan.embedder) {
    case EmbedderKind::pca: {
      e->pca = pca_fit(x, plan.latent_dim);
      break;
    }
    case EmbedderKind::isomap: {
      IsomapOptions opt;
      opt.k = cfg.isomap_k;
      opt.max_geodesic_bytes = cfg.max_geodesic_bytes;
      e->isomap = isomap_fit(x, plan.latent_dim, opt);
      e->info = {{"augmented_edges", e->isomap.augmented_edges},
                 {"dimension_deficit", e->isomap.deficit}};
      break;
    }
    case EmbedderKind::vae: {
      VaeTrainConfig vc = cfg.vae;
      vc.seed = seed;
      VaeFit fit = vae_fit(x, pool.feature_kind, plan.latent_dim, vc);
      e->info = {{"best_epoch", fit.best_epoch},
                 {"epochs_run", fit.curve.empty() ? 0 : fit.curve.back().epoch},
                 {"best_loss", fit.curve[fit.best_epoch].total}};
      e->vae = std::move(fit.params);
      break;
    }
    case EmbedderKind::raw:
      break;
  }
  return e;
}

}  // namespace

struct EmbeddingCache::Impl {
  std::size_t capacity;
  std::mutex mu;
  std::list<std::string> order;  // most recent first
  std::unordered_map<std::string, std::shared_future<EmbeddingPtr>> entries;

  std::shared_future<EmbeddingPtr> get_or_fit(const std::string& key,
                                              const std::function<EmbeddingPtr()>& fit) {
    std::promise<EmbeddingPtr> promise;
    // Held locally: another worker may evict the entry while this one fits.
    std::shared_future<EmbeddingPtr> fut = promise.get_future().share();
    {
      std::lock_guard lock(mu);
      auto it = entries.find(key);
      if (it != entries.end()) {
        order.remove(key);
        order.push_front(key);
        return it->second;
      }
      entries.emplace(key, fut);
      order.push_front(key);
      while (order.size() > capacity) {
        entries.erase(order.back());
        order.pop_back();
      }
    }
    try {
      promise.set_value(fit());
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
    return fut;
  }
};

EmbeddingCache::EmbeddingCache(std::size_t capacity) : impl_(std::make_unique<Impl>()) {
  impl_->capacity = std::max<std::size_t>(capacity, 1);
}
EmbeddingCache::~EmbeddingCache() = default;

// ---------------------------------------------------------------------------
// Cells

RunCell run_cell(const ExperimentPlan& plan, const Dataset& dataset, std::size_t repetition,
                 std::size_t L, std::size_t U, const RunConfig& cfg, EmbeddingCache* cache) {
  RunCell cell;
  cell.repetition = repetition;
  cell.labeled_size = L;
  cell.unlabeled_size = U;
  cell.embedder = plan.embedder;
  cell.classifier = plan.classifier;

  if (L == 0 || L > U)
    throw ConfigError("cell needs 0 < L <= U, got L=" + std::to_string(L) + " U=" + std::to_string(U));
  if (U > cfg.train_size)
    throw ConfigError("unlabeled size " + std::to_string(U) + " exceeds the train split (" +
                      std::to_string(cfg.train_size) + ")");
  if (plan.embedder != EmbedderKind::raw && plan.latent_dim > U)
    throw ConfigError("latent_dim " + std::to_string(plan.latent_dim) + " exceeds unlabeled size " +
                      std::to_string(U));

  const Dataset ds = dataset.has_targets() && dataset.targets.size() == 1 &&
                             dataset.targets[0].name == plan.target_name
                         ? dataset
                         : dataset.with_target(plan.target_name);
  const std::uint64_t master = plan.master_seed;
  const TrainTest tt =
      split_train_test(ds, SplitSpec{cfg.train_size, cfg.test_size, repetition, master});

  Rng labeled_stream(derive_seed(master, "labeled", {repetition, L}));
  const Subsample lab = subsample_indices(tt.train, L, labeled_stream, true);

  // Pool = labeled rows plus the first U - L rows of a per-(rep, L) shuffle of
  // the rest, so pools for growing U are nested.
  std::vector<char> taken(tt.train.n(), 0);
  for (std::size_t i : lab.indices) taken[i] = 1;
  std::vector<std::size_t> rest;
  rest.reserve(tt.train.n() - L);
  for (std::size_t i = 0; i < tt.train.n(); ++i)
    if (!taken[i]) rest.push_back(i);
  Rng pool_stream(derive_seed(master, "unlabeled", {repetition, L}));
  pool_stream.shuffle(rest);
  std::vector<std::size_t> pool_idx = lab.indices;
  pool_idx.insert(pool_idx.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(U - L));
  std::sort(pool_idx.begin(), pool_idx.end());

  const Dataset pool = tt.train.select(pool_idx).without_targets();
  Dataset labeled = tt.train.select(lab.indices);
  Dataset test = tt.test;

  json meta{{"pool_policy", "labeled_union_additional"},
            {"split_policy", "resplit_per_repetition"},
            {"standardization",
             ds.feature_kind == FeatureKind::tabular_standardized ? "zscore_unlabeled_pool" : "none"},
            {"stratified", lab.stratified},
            {"labeled_class_frequencies", class_frequencies(labeled)}};

  const std::uint64_t phash = pool_hash(pool);
  const std::uint64_t embed_seed = derive_seed(master, "embed", {phash});

  EmbeddingPtr emb;
  Matrix z_labeled, z_test;
  try {
    auto fit = [&] { return fit_embedding(plan, pool, cfg, embed_seed); };
    if (cache && plan.embedder != EmbedderKind::raw) {
      std::ostringstream key;
      key << plan.dataset_id << '|' << to_string(plan.embedder) << '|' << plan.latent_dim << '|'
          << master << '|' << phash << '|' << cfg.to_json().dump();
      emb = cache->impl().get_or_fit(key.str(), fit).get();
    } else {
      emb = fit();
    }
    z_test = emb->transform(emb->standardized(test));
    if (emb->kind == EmbedderKind::isomap) {
      // Labeled rows are pool rows; use their fitted coordinates.
      std::vector<std::size_t> pos;
      for (std::size_t i : lab.indices)
        pos.push_back(static_cast<std::size_t>(
            std::lower_bound(pool_idx.begin(), pool_idx.end(), i) - pool_idx.begin()));
      z_labeled = emb->isomap.embedding.select_rows(pos);
    } else {
      z_labeled = emb->transform(emb->standardized(labeled));
    }
  } catch (const NumericError& e) {
    cell.failure = e.what();
  } catch (const DataError& e) {
    cell.failure = e.what();
  } catch (const std::bad_alloc&) {
    cell.failure = "embedding: out of memory";
  }
  if (!cell.ok()) {
    cell.test_accuracy = std::numeric_limits<double>::quiet_NaN();
    meta["error"] = cell.failure;
    cell.metadata = std::move(meta);
    log().warn("cell rep={} L={} U={} failed: {}", repetition, L, U, cell.failure);
    return cell;
  }
  if (!emb->info.empty()) meta["embedding"] = emb->info;

  if (plan.binarize) {
    require_no_test_rows(labeled, "binarize mean");
    const double mean = target_mean(labeled);
    labeled = binarize_target(labeled, mean);
    test = binarize_target(test, mean);
    meta["binarize_mean"] = mean;
  }

  require_no_test_rows(labeled, "classifier fit");
  ClassifierConfig cc = cfg.classifier;
  cc.forest.seed = derive_seed(master, "forest", {repetition, L, U});
  const auto& target = labeled.target();
  try {
    const Classifier clf = classifier_fit(plan.classifier, z_labeled, target.labels,
                                          static_cast<std::size_t>(target.class_count), cc);
    cell.test_accuracy = accuracy(clf.predict(z_test), test.target().labels);
    meta["classifier"] = clf.summary();
  } catch (const NumericError& e) {
    cell.failure = e.what();
    cell.test_accuracy = std::numeric_limits<double>::quiet_NaN();
    meta["error"] = cell.failure;
  }
  cell.metadata = std::move(meta);
  return cell;
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<CellKey> sweep_cells(const ExperimentPlan& plan, const RunConfig& cfg) {
  std::vector<std::size_t> ls = plan.labeled_sizes, us = plan.unlabeled_sizes;
  std::sort(ls.begin(), ls.end());
  ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
  std::sort(us.begin(), us.end());
  us.erase(std::unique(us.begin(), us.end()), us.end());
  std::vector<CellKey> cells;
  for (std::size_t r = 0; r < plan.repetitions; ++r) {
    std::set<std::pair<std::size_t, std::size_t>> grid;
    for (std::size_t l : ls)
      for (std::size_t u : us)
        if (u >= l) {
          cells.push_back({r, l, u, plan.embedder, "grid"});
          grid.emplace(l, u);
        }
    if (!cfg.include_anchors) continue;
    const std::size_t top = cfg.train_size;
    const EmbedderKind anchor =
        cfg.effect_baseline == EffectBaseline::raw ? EmbedderKind::raw : plan.embedder;
    const bool in_grid = anchor == plan.embedder;
    if (anchor != plan.embedder)
      for (std::size_t l : ls) cells.push_back({r, l, l, anchor, "floor"});
    if (!(in_grid && grid.count({top, top}))) cells.push_back({r, top, top, anchor, "ceiling"});
  }
  return cells;
}

ResultRecord to_record(const ExperimentPlan& plan, const std::string& fingerprint,
                       const RunCell& cell, double wall_time_s) {
  ResultRecord r;
  r.fingerprint = fingerprint;
  r.dataset_id = plan.dataset_id;
  r.target = plan.target_name;
  r.embedder = std::string(to_string(cell.embedder));
  r.classifier = std::string(to_string(cell.classifier));
  r.repetition = cell.repetition;
  r.labeled_size = cell.labeled_size;
  r.unlabeled_size = cell.unlabeled_size;
  r.accuracy = cell.test_accuracy;
  r.wall_time_s = wall_time_s;
  r.metadata_json = cell.metadata.dump();
  return r;
}

namespace {

std::string done_key(const std::string& fp, const std::string& embedder, std::size_t rep,
                     std::size_t l, std::size_t u) {
  return fp + '|' + embedder + '|' + std::to_string(rep) + '|' + std::to_string(l) + '|' +
         std::to_string(u);
}

// Cuts an interrupted trailing line so appends start on a fresh line.
// Returns true when the file still holds a complete header.
bool prepare_for_append(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto last_nl = bytes.rfind('\n');
  const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
  if (keep != bytes.size()) {
    log().warn("results file {}: discarding {} bytes of an interrupted line", path,
               bytes.size() - keep);
    fs::resize_file(path, keep);
  }
  return keep > 0;
}

struct Job {
  std::size_t plan = 0;
  CellKey key;
};

}  // namespace

SweepSummary run_sweep(std::span<const ExperimentPlan> plans, const RunConfig& cfg,
                       const SweepOptions& options) {
  if (options.results_path.empty()) throw ConfigError("run_sweep: no results path");
  std::vector<std::string> fps;
  std::vector<std::shared_ptr<const Dataset>> datasets;
  std::vector<Job> jobs;
  const json cfg_json = cfg.to_json();
  for (std::size_t i = 0; i < plans.size(); ++i) {
    plans[i].validate();
    for (std::size_t l : plans[i].labeled_sizes)
      if (l > cfg.train_size)
        throw ConfigError("labeled size " + std::to_string(l) + " exceeds the train split");
    for (std::size_t u : plans[i].unlabeled_sizes)
      if (u > cfg.train_size)
        throw ConfigError("unlabeled size " + std::to_string(u) + " exceeds the train split");
    fps.push_back(plan_fingerprint(plans[i], cfg_json));
    auto full = load_dataset(plans[i].dataset_id);
    if (full->n() < cfg.train_size + cfg.test_size)
      throw ConfigError("dataset " + plans[i].dataset_id + " has " + std::to_string(full->n()) +
                        " rows, split needs " + std::to_string(cfg.train_size + cfg.test_size));
    datasets.push_back(std::make_shared<const Dataset>(full->with_target(plans[i].target_name)));
    for (const auto& key : sweep_cells(plans[i], cfg)) jobs.push_back({i, key});
  }

  const std::string& path = options.results_path;
  std::set<std::string> done;
  bool have_header = false;
  if (fs::exists(path)) {
    if (!options.resume)
      throw ConfigError("results file " + path + " exists; pass --resume or remove it");
    have_header = prepare_for_append(path);
    if (have_header)
      for (const auto& r : read_results(path))
        done.insert(done_key(r.fingerprint, r.embedder, r.repetition, r.labeled_size,
                             r.unlabeled_size));
  }
  std::ofstream out(path, have_header ? std::ios::app : std::ios::trunc);
  if (!out) throw ConfigError("cannot open results file " + path);
  if (!have_header) out << kResultsHeader << '\n' << std::flush;

  SweepSummary summary;
  std::vector<Job> todo;
  for (const auto& j : jobs) {
    if (done.count(done_key(fps[j.plan], std::string(to_string(j.key.embedder)), j.key.repetition,
                            j.key.labeled_size, j.key.unlabeled_size)))
      ++summary.skipped;
    else
      todo.push_back(j);
  }

  EmbeddingCache cache(cfg.embedding_cache);
  std::mutex write_mu;
  std::atomic<bool> stop{false};
  std::atomic<std::size_t> next{0};

  auto execute = [&](const Job& job) {
    ExperimentPlan plan = plans[job.plan];
    plan.embedder = job.key.embedder;
    const auto t0 = std::chrono::steady_clock::now();
    RunCell cell = run_cell(plan, *datasets[job.plan], job.key.repetition, job.key.labeled_size,
                            job.key.unlabeled_size, cfg, &cache);
    const double secs =
        cfg.record_timing
            ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
            : 0.0;
    cell.metadata["role"] = job.key.role;
    const ResultRecord rec = to_record(plan, fps[job.plan], cell, secs);
    std::lock_guard lock(write_mu);
    if (stop) return;
    out << format_record(rec) << '\n' << std::flush;
    ++summary.executed;
    if (!cell.ok()) ++summary.failed;
    if (options.on_record && !options.on_record(rec)) stop = true;
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, todo.size()));
  if (workers == 1) {
    for (const auto& job : todo) {
      if (stop) break;
      execute(job);
    }
  } else {
    std::exception_ptr first_error;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        while (!stop) {
          const std::size_t i = next++;
          if (i >= todo.size()) break;
          try {
            execute(todo[i]);
          } catch (...) {
            std::lock_guard lock(err_mu);
            if (!first_error) first_error = std::current_exception();
            stop = true;
          }
        }
      });
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  summary.stopped = stop;
  return summary;
}

// ---------------------------------------------------------------------------
// Effects and summaries

MeanStd mean_std(std::span<const double> values) {
  MeanStd m;
  m.count = values.size();
  if (values.empty()) return m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

double effect_value(double floor, double semi, double ceiling) {
  if (std::abs(ceiling - floor) < 1e-9) return std::numeric_limits<double>::quiet_NaN();
  return (semi - floor) / (ceiling - floor);
}

SemisupEffect semisupervision_effect(std::span<const ResultRecord> records, const EffectQuery& q) {
  const std::string anchor_embedder = q.baseline == EffectBaseline::raw ? "raw" : q.embedder;
  auto matches = [&](const ResultRecord& r, const std::string& embedder) {
    return r.dataset_id == q.dataset_id && r.target == q.target && r.classifier == q.classifier &&
           r.embedder == embedder;
  };
  std::size_t u_max = q.unlabeled_max;
  if (u_max == 0)
    for (const auto& r : records)
      if (matches(r, q.embedder) && r.labeled_size == q.labeled_reference)
        u_max = std::max(u_max, r.unlabeled_size);
  if (u_max == 0) throw ConfigError("semisupervision_effect: no cells at the reference labeled size");

  std::map<std::size_t, double> floor, semi, ceiling;
  for (const auto& r : records) {
    if (!r.ok()) continue;
    if (matches(r, anchor_embedder) && r.labeled_size == q.labeled_reference &&
        r.unlabeled_size == q.labeled_reference)
      floor[r.repetition] = r.accuracy;
    if (matches(r, q.embedder) && r.labeled_size == q.labeled_reference && r.unlabeled_size == u_max)
      semi[r.repetition] = r.accuracy;
    if (matches(r, anchor_embedder) && r.labeled_size == q.labeled_ceiling &&
        r.unlabeled_size == q.labeled_ceiling)
      ceiling[r.repetition] = r.accuracy;
  }

  SemisupEffect e;
  std::vector<double> defined, fl, se, ce;
  for (const auto& [rep, s] : semi) {
    auto f = floor.find(rep);
    auto c = ceiling.find(rep);
    if (f == floor.end() || c == ceiling.end()) continue;
    const double v = effect_value(f->second, s, c->second);
    e.repetitions.push_back(rep);
    e.per_repetition.push_back(v);
    fl.push_back(f->second);
    se.push_back(s);
    ce.push_back(c->second);
    if (std::isnan(v))
      ++e.undefined;
    else
      defined.push_back(v);
  }
  if (e.repetitions.empty())
    throw ConfigError("semisupervision_effect: no repetition has floor, semi and ceiling cells for " +
                      q.target + "/" + q.embedder + "/" + q.classifier);
  const MeanStd m = mean_std(defined);
  e.value = defined.empty() ? std::numeric_limits<double>::quiet_NaN() : m.mean;
  e.std = m.std;
  e.count = m.count;
  e.floor_accuracy = mean_std(fl).mean;
  e.semi_accuracy = mean_std(se).mean;
  e.ceiling_accuracy = mean_std(ce).mean;
  return e;
}

WeightedAccuracy weighted_cross_target_accuracy(const std::vector<std::vector<double>>& per_target,
                                                std::span<const double> weights) {
  if (per_target.empty()) throw ConfigError("weighted_cross_target_accuracy: no targets");
  WeightedAccuracy out;
  out.weights.assign(weights.begin(), weights.end());
  if (out.weights.empty()) out.weights.assign(per_target.size(), 1.0);
  if (out.weights.size() != per_target.size())
    throw ConfigError("weighted_cross_target_accuracy: " + std::to_string(out.weights.size()) +
                      " weights for " + std::to_string(per_target.size()) + " targets");
  double wsum = 0.0;
  for (double w : out.weights) {
    if (!(w >= 0.0)) throw ConfigError("weighted_cross_target_accuracy: negative weight");
    wsum += w;
  }
  if (wsum <= 0.0) throw ConfigError("weighted_cross_target_accuracy: weights sum to zero");
  const std::size_t reps = per_target[0].size();
  for (const auto& t : per_target)
    if (t.size() != reps || reps == 0)
      throw ConfigError("weighted_cross_target_accuracy: targets have unequal repetition counts");
  std::vector<double> per_rep(reps, 0.0);
  for (std::size_t t = 0; t < per_target.size(); ++t)
    for (std::size_t r = 0; r < reps; ++r) per_rep[r] += out.weights[t] / wsum * per_target[t][r];
  const MeanStd m = mean_std(per_rep);
  out.mean = m.mean;
  out.std = m.std;
  out.count = m.count;
  return out;
}

}  // namespace latentbench
