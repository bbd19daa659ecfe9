// latentbench command line: ingest, surrogate, embed, classify, bench, report.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "latentbench/classify.hpp"
#include "latentbench/error.hpp"
#include "latentbench/harness.hpp"
#include "latentbench/ingest.hpp"
#include "latentbench/isomap.hpp"
#include "latentbench/kernels.hpp"
#include "latentbench/log.hpp"
#include "latentbench/model_io.hpp"
#include "latentbench/pca.hpp"
#include "latentbench/report.hpp"
#include "latentbench/vae.hpp"

using namespace latentbench;

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_matrix_csv(const Matrix& m, const std::string& path) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t c = 0; c < m.cols(); ++c) os << (c ? "," : "") << "z" << c;
  os << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) os << (c ? "," : "") << m(r, c);
    os << '\n';
  }
  write_text(path, os.str());
}

Dataset first_rows(const Dataset& ds, std::size_t rows) {
  if (rows == 0 || rows >= ds.n()) return ds;
  std::vector<std::size_t> idx(rows);
  for (std::size_t i = 0; i < rows; ++i) idx[i] = i;
  return ds.select(idx);
}

std::size_t worker_count(std::size_t flag) {
  if (const char* env = std::getenv("LATENTBENCH_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("LATENTBENCH_WORKERS must be a positive integer, got '") + env + "'");
  }
  return flag;
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return {};
  try {
    return run_config_from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("run config " + path + ": " + e.what());
  }
}

std::map<std::string, double> parse_weights(const std::string& spec) {
  std::map<std::string, double> w;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("weights are target=value pairs, got '" + item + "'");
    w[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  return w;
}

std::vector<AggregateRow> load_aggregates(const std::string& path, std::size_t ceiling,
                                          EffectBaseline baseline) {
  const std::string text = read_text(path);
  if (text.rfind(kResultsHeader, 0) == 0) {
    const auto records = read_results(path);
    auto rows = aggregate(records);
    attach_effects(rows, compute_effects(records, ceiling, baseline));
    return rows;
  }
  return parse_aggregates(text);
}

// Standalone embedding models carry their standardizer as extra sections.
void save_standardizer(const std::optional<Standardizer>& st, ModelWriter& w) {
  if (!st) return;
  w.vector("SMEA", st->means);
  w.vector("SSTD", st->stds);
}

std::optional<Standardizer> load_standardizer(const ModelReader& r) {
  if (!r.has("SMEA")) return std::nullopt;
  return Standardizer{r.vector("SMEA"), r.vector("SSTD")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semisupervised embedding benchmark toolkit"};
  app.require_subcommand(1);
  std::string isa = "auto";
  app.add_option("--isa", isa, "Kernel instruction set: auto, scalar or avx2");
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress at info level");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Convert IDX or delimited input to a CSV dataset");
  std::string in_format, in_images, in_labels, in_input, in_targets, in_out, in_delim = ",";
  ingest->add_option("--format", in_format, "idx or csv")->required()->check(CLI::IsMember({"idx", "csv"}));
  ingest->add_option("--images", in_images, "IDX image file");
  ingest->add_option("--labels", in_labels, "IDX label file");
  ingest->add_option("--input", in_input, "Delimited table");
  ingest->add_option("--targets", in_targets, "Comma-separated target columns of the table");
  ingest->add_option("--delimiter", in_delim, "Table delimiter");
  ingest->add_option("--out", in_out, "Output CSV")->required();

  // surrogate
  auto* surrogate = app.add_subcommand("surrogate", "Generate a UKBB-shaped synthetic table");
  std::string sg_modality = "t1", sg_out;
  std::uint64_t sg_seed = 0;
  surrogate->add_option("--modality", sg_modality, "t1, rfmri or dmri");
  surrogate->add_option("--seed", sg_seed);
  surrogate->add_option("--out", sg_out)->required();

  // embed
  auto* embed = app.add_subcommand("embed", "Fit or apply an embedding");
  embed->require_subcommand(1);
  auto* embed_fit = embed->add_subcommand("fit", "Fit an embedding on a dataset");
  std::string ef_method, ef_data, ef_out, ef_curve, ef_config;
  std::size_t ef_dim = 50, ef_rows = 0, ef_k = 5;
  std::uint64_t ef_seed = 0, ef_geo_mem = std::uint64_t{2} << 30;
  embed_fit->add_option("--method", ef_method)->required()->check(CLI::IsMember({"pca", "isomap", "vae"}));
  embed_fit->add_option("--data", ef_data, "Dataset id (idx:, csv:, surrogate:)")->required();
  embed_fit->add_option("--dim", ef_dim);
  embed_fit->add_option("--rows", ef_rows, "Use only the first N rows");
  embed_fit->add_option("--k", ef_k, "Isomap neighbors");
  embed_fit->add_option("--max-geodesic-memory", ef_geo_mem, "Bytes allowed for the geodesic matrix");
  embed_fit->add_option("--seed", ef_seed);
  embed_fit->add_option("--vae-config", ef_config, "JSON file with VAE training settings");
  embed_fit->add_option("--curve", ef_curve, "Write the VAE training curve CSV here");
  embed_fit->add_option("--out", ef_out, "Model file")->required();
  auto* embed_tr = embed->add_subcommand("transform", "Embed rows with a fitted model");
  std::string et_model, et_data, et_out;
  std::size_t et_rows = 0;
  embed_tr->add_option("--model", et_model)->required();
  embed_tr->add_option("--data", et_data)->required();
  embed_tr->add_option("--rows", et_rows);
  embed_tr->add_option("--out", et_out, "Output CSV, '-' for stdout");

  // classify
  auto* classify = app.add_subcommand("classify", "Fit a classifier on one dataset, score another");
  std::string cl_kind = "logreg", cl_train, cl_test, cl_target, cl_model, cl_dump;
  double cl_lambda = 1.0;
  std::size_t cl_trees = 100;
  std::uint64_t cl_seed = 0;
  classify->add_option("--classifier", cl_kind)->check(CLI::IsMember({"logreg", "random_forest"}));
  classify->add_option("--train", cl_train, "Dataset id")->required();
  classify->add_option("--test", cl_test, "Dataset id");
  classify->add_option("--target", cl_target)->required();
  classify->add_option("--lambda", cl_lambda);
  classify->add_option("--trees", cl_trees);
  classify->add_option("--seed", cl_seed);
  classify->add_option("--model", cl_model, "Save the fitted model here");
  classify->add_option("--dump-trees", cl_dump, "Write a readable dump of the forest here");

  // bench
  auto* bench = app.add_subcommand("bench", "Run benchmark sweeps");
  bench->require_subcommand(1);
  auto* bench_run = bench->add_subcommand("run", "Run every cell of one or more plans");
  std::vector<std::string> br_plans;
  std::string br_out, br_config;
  std::size_t br_workers = 1;
  bool br_resume = false, br_no_timing = false;
  bench_run->add_option("--plan", br_plans, "Plan JSON (object or array); repeatable")->required();
  bench_run->add_option("--out", br_out, "Results CSV")->required();
  bench_run->add_option("--workers", br_workers);
  bench_run->add_flag("--resume", br_resume, "Skip cells already in the results file");
  bench_run->add_option("--config", br_config, "Run configuration JSON");
  bench_run->add_flag("--no-timing", br_no_timing, "Write 0 for wall time (reproducible files)");

  // report
  auto* report = app.add_subcommand("report", "Summarize results");
  report->require_subcommand(1);
  std::size_t rp_ceiling = 7000;
  std::string rp_baseline = "pipeline";
  auto* rp_agg = report->add_subcommand("aggregate", "Mean and std per cell group");
  std::string ra_results, ra_out;
  rp_agg->add_option("--results", ra_results)->required();
  rp_agg->add_option("--out", ra_out, "Output file, '-' for stdout");
  auto* rp_fig = report->add_subcommand("figure", "Plot-ready table");
  std::string rf_which, rf_input, rf_out;
  std::size_t rf_labeled = 0;
  rp_fig->add_option("--which", rf_which)->required()->check(CLI::IsMember({"f1", "f2", "f3"}));
  rp_fig->add_option("--input", rf_input, "Results CSV or aggregate table")->required();
  rp_fig->add_option("--labeled", rf_labeled, "f1: labeled size of the curves");
  rp_fig->add_option("--out", rf_out);
  auto* rp_eff = report->add_subcommand("effects", "Cross-target semisupervision effects");
  std::string re_results, re_json, re_weights;
  rp_eff->add_option("--results", re_results)->required();
  rp_eff->add_option("--json", re_json, "Also write the JSON summary here");
  rp_eff->add_option("--weights", re_weights, "target=weight,... (default uniform)");
  for (auto* sub : {rp_agg, rp_fig, rp_eff}) {
    sub->add_option("--ceiling", rp_ceiling, "Labeled size of the ceiling cells");
    sub->add_option("--baseline", rp_baseline, "pipeline or raw")->check(CLI::IsMember({"pipeline", "raw"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::config);
  }

  try {
    if (verbose) log().set_level(spdlog::level::info);
    if (isa == "scalar") kernels::set_isa(kernels::Isa::scalar);
    else if (isa == "avx2") kernels::set_isa(kernels::Isa::avx2);
    else if (isa != "auto") throw ConfigError("unknown --isa '" + isa + "'");

    if (*ingest) {
      Dataset ds;
      std::size_t dropped = 0;
      if (in_format == "idx") {
        if (in_images.empty() || in_labels.empty()) throw ConfigError("idx ingest needs --images and --labels");
        ds = read_idx_pair(in_images, in_labels);
      } else {
        if (in_input.empty()) throw ConfigError("csv ingest needs --input");
        if (in_delim.size() != 1) throw ConfigError("--delimiter must be one character");
        std::vector<std::string> targets;
        std::stringstream ss(in_targets);
        for (std::string t; std::getline(ss, t, ',');)
          if (!t.empty()) targets.push_back(t);
        auto read = read_table(in_input, in_delim[0], targets);
        ds = std::move(read.dataset);
        dropped = read.dropped_rows;
      }
      write_table(ds, in_out);
      std::cout << "rows " << ds.n() << " features " << ds.p() << " targets " << ds.targets.size()
                << " dropped " << dropped << '\n';
    } else if (*surrogate) {
      const auto s = generate_surrogate(ukbb_surrogate_spec(sg_modality, sg_seed));
      write_table(s.dataset, sg_out);
      std::cout << "rows " << s.dataset.n() << " features " << s.dataset.p() << '\n';
    } else if (*embed_fit) {
      const Dataset ds = first_rows(*load_dataset(ef_data), ef_rows);
      std::optional<Standardizer> st;
      Matrix x = ds.features;
      if (ds.feature_kind == FeatureKind::tabular_standardized) {
        st = standardize_fit(ds);
        x = standardize_apply(ds, *st).features;
      }
      if (ef_method == "pca") {
        const PcaModel m = pca_fit(x, ef_dim);
        ModelWriter w(ModelKind::pca, m.p(), m.d());
        save_pca(m, w);
        save_standardizer(st, w);
        w.save(ef_out);
      } else if (ef_method == "isomap") {
        IsomapOptions opt;
        opt.k = ef_k;
        opt.max_geodesic_bytes = ef_geo_mem;
        const IsomapModel m = isomap_fit(x, ef_dim, opt);
        ModelWriter w(ModelKind::isomap, m.p(), m.d());
        save_isomap(m, w);
        save_standardizer(st, w);
        w.save(ef_out);
        if (m.augmented_edges) std::cout << "augmented edges " << m.augmented_edges << '\n';
        if (m.deficit) std::cout << "dimension deficit " << m.deficit << '\n';
      } else {
        VaeTrainConfig cfg;
        if (!ef_config.empty()) {
          auto merged = to_json(cfg);
          const auto overrides = nlohmann::json::parse(read_text(ef_config));
          for (const auto& [k, v] : overrides.items()) merged[k] = v;
          cfg = vae_config_from_json(merged);
        }
        cfg.seed = ef_seed;
        const VaeFit fit = vae_fit(x, ds.feature_kind, ef_dim, cfg);
        ModelWriter w(ModelKind::vae, ds.p(), ef_dim);
        save_vae(fit.params, cfg, ds.feature_kind, w);
        save_standardizer(st, w);
        w.save(ef_out);
        if (!ef_curve.empty()) write_training_curve(fit.curve, ef_curve);
        std::cout << "best epoch " << fit.best_epoch << " loss " << fit.curve[fit.best_epoch].total << '\n';
      }
    } else if (*embed_tr) {
      const ModelReader r = ModelReader::load(et_model);
      const Dataset ds = first_rows(*load_dataset(et_data), et_rows);
      const auto st = load_standardizer(r);
      const Matrix x = st ? standardize_apply(ds, *st).features : ds.features;
      Matrix z;
      switch (r.kind()) {
        case ModelKind::pca: z = pca_transform(load_pca(r), x); break;
        case ModelKind::isomap: z = isomap_transform(load_isomap(r), x); break;
        case ModelKind::vae: z = vae_encode(load_vae(r).params, x); break;
        default: throw DataError(et_model + " is not an embedding model");
      }
      write_matrix_csv(z, et_out);
    } else if (*classify) {
      const Dataset train = load_dataset(cl_train)->with_target(cl_target);
      ClassifierConfig cfg;
      cfg.logreg.lambda = cl_lambda;
      cfg.forest.trees = cl_trees;
      cfg.forest.seed = cl_seed;
      const auto kind = parse_classifier(cl_kind);
      const auto& t = train.target();
      const Classifier c = classifier_fit(kind, train.features, t.labels,
                                          static_cast<std::size_t>(t.class_count), cfg);
      std::cout << "train accuracy " << accuracy(c.predict(train.features), t.labels) << '\n';
      if (!cl_test.empty()) {
        const Dataset test = load_dataset(cl_test)->with_target(cl_target);
        std::cout << "test accuracy " << accuracy(c.predict(test.features), test.target().labels) << '\n';
      }
      if (!cl_model.empty()) {
        if (kind == ClassifierKind::logreg) {
          ModelWriter w(ModelKind::logreg, train.p(), c.logreg.classes());
          save_logreg(c.logreg, w);
          w.save(cl_model);
        } else {
          ModelWriter w(ModelKind::forest, train.p(), c.forest.classes);
          save_forest(c.forest, w);
          w.save(cl_model);
        }
      }
      if (!cl_dump.empty()) {
        if (kind != ClassifierKind::random_forest) throw ConfigError("--dump-trees needs a random forest");
        write_text(cl_dump, dump_trees(c.forest));
      }
    } else if (*bench_run) {
      std::vector<ExperimentPlan> plans;
      for (const auto& p : br_plans)
        for (auto& plan : read_plans(p)) plans.push_back(std::move(plan));
      RunConfig cfg = load_run_config(br_config);
      if (br_no_timing) cfg.record_timing = false;
      SweepOptions opt;
      opt.results_path = br_out;
      opt.workers = worker_count(br_workers);
      opt.resume = br_resume;
      const auto s = run_sweep(plans, cfg, opt);
      std::cout << "executed " << s.executed << " skipped " << s.skipped << " failed " << s.failed << '\n';
    } else if (*rp_agg) {
      const auto records = read_results(ra_results);
      auto rows = aggregate(records);
      attach_effects(rows, compute_effects(records, rp_ceiling, parse_effect_baseline(rp_baseline)));
      write_text(ra_out, format_aggregates(rows));
    } else if (*rp_fig) {
      const auto rows = load_aggregates(rf_input, rp_ceiling, parse_effect_baseline(rp_baseline));
      FigureOptions opt;
      opt.labeled_size = rf_labeled;
      const auto table = emit_figure_table(rows, parse_figure(rf_which), opt);
      for (const auto& w : table.warnings) log().warn("{}", w);
      write_text(rf_out, table.text);
    } else if (*rp_eff) {
      const auto records = read_results(re_results);
      const auto effects = compute_effects(records, rp_ceiling, parse_effect_baseline(rp_baseline));
      const auto summary = summarize_effects(effects, re_weights.empty()
                                                          ? std::map<std::string, double>{}
                                                          : parse_weights(re_weights));
      std::cout << effects_to_text(summary);
      if (!re_json.empty()) write_text(re_json, effects_to_json(summary).dump(2) + "\n");
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::internal);
  }
  return 0;
}
