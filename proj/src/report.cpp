#include "latentbench/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "latentbench/error.hpp"
#include "latentbench/log.hpp"

namespace latentbench {

using nlohmann::json;

bool operator==(const MeanStd& a, const MeanStd& b) {
  return a.mean == b.mean && a.std == b.std && a.count == b.count;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kStdNote =
    "# std: sample standard deviation across repetitions (n-1 divisor, 0 when n=1); "
    "count: repetitions";

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double parse_double(const std::string& s, std::size_t line) {
  if (s == "nan") return kNaN;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw ParseError("aggregates: bad number '" + s + "'", line);
  return v;
}

std::size_t parse_size(const std::string& s, std::size_t line) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ParseError("aggregates: bad count '" + s + "'", line);
  return std::stoull(s);
}

std::string key_fields(const AggregateKey& k) {
  return csv_field(k.dataset_id) + ',' + csv_field(k.target) + ',' + k.embedder + ',' +
         k.classifier + ',' + std::to_string(k.labeled_size) + ',' +
         std::to_string(k.unlabeled_size);
}

std::string header_block(std::string_view title, std::span<const AggregateRow> rows) {
  std::set<std::string> fps;
  for (const auto& r : rows) fps.insert(r.fingerprint);
  std::string fp_list;
  for (const auto& f : fps) fp_list += (fp_list.empty() ? "" : ",") + f;
  std::string out = "# latentbench " + std::string(title) + '\n';
  out += "# fingerprints: " + fp_list + '\n';
  out += kStdNote;
  out += '\n';
  return out;
}

}  // namespace

std::vector<AggregateRow> aggregate(std::span<const ResultRecord> records) {
  if (records.empty()) throw ConfigError("aggregate: no records");
  struct Acc {
    std::string fingerprint;
    std::vector<double> values;
    std::size_t failed = 0;
  };
  std::map<AggregateKey, Acc> groups;
  for (const auto& r : records) {
    AggregateKey key{r.dataset_id, r.target, r.embedder, r.classifier, r.labeled_size,
                     r.unlabeled_size};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) {
      it->second.fingerprint = r.fingerprint;
    } else if (it->second.fingerprint != r.fingerprint) {
      throw DataError("aggregate: group " + key_fields(key) + " mixes fingerprints " +
                      it->second.fingerprint + " and " + r.fingerprint);
    }
    if (r.ok())
      it->second.values.push_back(r.accuracy);
    else
      ++it->second.failed;
  }
  std::vector<AggregateRow> out;
  out.reserve(groups.size());
  for (auto& [key, acc] : groups) {
    // Sum in a fixed order so the result does not depend on input order.
    std::sort(acc.values.begin(), acc.values.end());
    const MeanStd m = mean_std(acc.values);
    AggregateRow row;
    row.key = key;
    row.fingerprint = acc.fingerprint;
    row.mean = acc.values.empty() ? kNaN : m.mean;
    row.std = m.std;
    row.count = m.count;
    row.failed = acc.failed;
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<EffectRow> compute_effects(std::span<const ResultRecord> records,
                                       std::size_t labeled_ceiling, EffectBaseline baseline) {
  struct Group {
    std::string dataset_id, target, embedder, classifier;
    std::size_t labeled = 0;
    auto operator<=>(const Group&) const = default;
  };
  std::map<Group, std::size_t> umax;
  for (const auto& r : records) {
    if (r.labeled_size >= labeled_ceiling) continue;
    if (baseline == EffectBaseline::raw && r.embedder == "raw") continue;
    Group g{r.dataset_id, r.target, r.embedder, r.classifier, r.labeled_size};
    auto& u = umax[g];
    u = std::max(u, r.unlabeled_size);
  }
  std::vector<EffectRow> out;
  for (const auto& [g, u] : umax) {
    if (u <= g.labeled) continue;
    EffectQuery q;
    q.dataset_id = g.dataset_id;
    q.target = g.target;
    q.embedder = g.embedder;
    q.classifier = g.classifier;
    q.labeled_reference = g.labeled;
    q.labeled_ceiling = labeled_ceiling;
    q.unlabeled_max = u;
    q.baseline = baseline;
    try {
      out.push_back({g.dataset_id, g.target, g.embedder, g.classifier, g.labeled, u,
                     semisupervision_effect(records, q)});
    } catch (const ConfigError& e) {
      log().warn("no effect for {}/{}/{}/{} L={}: {}", g.dataset_id, g.target, g.embedder,
                 g.classifier, g.labeled, e.what());
    }
  }
  return out;
}

void attach_effects(std::vector<AggregateRow>& rows, std::span<const EffectRow> effects) {
  for (const auto& e : effects) {
    const AggregateKey key{e.dataset_id, e.target, e.embedder, e.classifier, e.labeled_size,
                           e.unlabeled_max};
    for (auto& r : rows)
      if (r.key == key) r.effect = MeanStd{e.effect.value, e.effect.std, e.effect.count};
  }
}

std::string format_aggregates(std::span<const AggregateRow> rows) {
  std::string out = header_block("aggregates", rows);
  out +=
      "dataset_id,target,embedder,classifier,labeled_size,unlabeled_size,mean,std,count,failed,"
      "fingerprint,effect_mean,effect_std,effect_count\n";
  for (const auto& r : rows) {
    out += key_fields(r.key) + ',' + num(r.mean) + ',' + num(r.std) + ',' +
           std::to_string(r.count) + ',' + std::to_string(r.failed) + ',' + r.fingerprint + ',';
    if (r.effect)
      out += num(r.effect->mean) + ',' + num(r.effect->std) + ',' + std::to_string(r.effect->count);
    else
      out += ",,";
    out += '\n';
  }
  return out;
}

std::vector<AggregateRow> parse_aggregates(std::string_view text) {
  std::vector<AggregateRow> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("dataset_id,", 0) != 0) throw ParseError("aggregates: missing header", n);
      header_seen = true;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 14)
      throw ParseError("aggregates: expected 14 fields, got " + std::to_string(f.size()), n);
    AggregateRow r;
    r.key = {f[0], f[1], f[2], f[3], parse_size(f[4], n), parse_size(f[5], n)};
    r.mean = parse_double(f[6], n);
    r.std = parse_double(f[7], n);
    r.count = parse_size(f[8], n);
    r.failed = parse_size(f[9], n);
    r.fingerprint = f[10];
    if (!f[11].empty())
      r.effect = MeanStd{parse_double(f[11], n), parse_double(f[12], n), parse_size(f[13], n)};
    rows.push_back(std::move(r));
  }
  if (!header_seen) throw ParseError("aggregates: missing header", n);
  return rows;
}

FigureKind parse_figure(std::string_view name) {
  if (name == "f1" || name == "f1_unlabeled_curves") return FigureKind::f1_unlabeled_curves;
  if (name == "f2" || name == "f2_embedder_grid") return FigureKind::f2_embedder_grid;
  if (name == "f3" || name == "f3_modality_bars") return FigureKind::f3_modality_bars;
  throw ConfigError("unknown figure '" + std::string(name) + "' (expected f1, f2 or f3)");
}

std::string_view to_string(FigureKind kind) noexcept {
  switch (kind) {
    case FigureKind::f1_unlabeled_curves: return "f1_unlabeled_curves";
    case FigureKind::f2_embedder_grid: return "f2_embedder_grid";
    case FigureKind::f3_modality_bars: return "f3_modality_bars";
  }
  return "";
}

namespace {

std::string value_fields(const AggregateRow* r) {
  if (!r) return ",,";
  return num(r->mean) + ',' + num(r->std) + ',' + std::to_string(r->count);
}

std::string describe(const AggregateKey& k) {
  return k.dataset_id + '/' + k.target + '/' + k.embedder + '/' + k.classifier +
         " L=" + std::to_string(k.labeled_size) + " U=" + std::to_string(k.unlabeled_size);
}

}  // namespace

FigureTable emit_figure_table(std::span<const AggregateRow> rows, FigureKind kind,
                              const FigureOptions& options) {
  if (rows.empty()) throw ConfigError("emit_figure_table: no aggregates");
  std::map<AggregateKey, const AggregateRow*> by_key;
  for (const auto& r : rows) by_key[r.key] = &r;
  auto find = [&](const AggregateKey& k) -> const AggregateRow* {
    auto it = by_key.find(k);
    return it == by_key.end() ? nullptr : it->second;
  };

  FigureTable t;
  std::ostringstream os;
  os << header_block("figure " + std::string(to_string(kind)), rows);
  os << "# empty mean/std/count cells mark absent combinations\n";

  using Curve = std::tuple<std::string, std::string, std::string, std::string>;
  switch (kind) {
    case FigureKind::f1_unlabeled_curves: {
      std::size_t L = options.labeled_size;
      if (L == 0) {
        L = rows.front().key.labeled_size;
        for (const auto& r : rows) L = std::min(L, r.key.labeled_size);
      }
      std::set<Curve> curves;
      std::set<std::size_t> us;
      for (const auto& r : rows)
        if (r.key.labeled_size == L) {
          curves.emplace(r.key.dataset_id, r.key.target, r.key.embedder, r.key.classifier);
          us.insert(r.key.unlabeled_size);
        }
      if (curves.empty()) throw ConfigError("figure f1: no cells with L=" + std::to_string(L));
      os << "# x = unlabeled_size at labeled_size " << L << '\n';
      os << "dataset_id,target,embedder,classifier,labeled_size,unlabeled_size,mean,std,count\n";
      for (const auto& [ds, tg, em, cl] : curves)
        for (std::size_t u : us) {
          const AggregateKey k{ds, tg, em, cl, L, u};
          const auto* r = find(k);
          if (!r) t.warnings.push_back("absent: " + describe(k));
          os << key_fields(k) << ',' << value_fields(r) << '\n';
        }
      break;
    }
    case FigureKind::f2_embedder_grid: {
      using Panel = std::tuple<std::string, std::string, std::string>;  // dataset, target, classifier
      std::set<Panel> panels;
      std::set<std::string> embedders(options.embedders.begin(), options.embedders.end());
      std::set<std::pair<std::size_t, std::size_t>> grid;
      for (const auto& r : rows) {
        if (r.key.embedder == "raw") continue;
        panels.emplace(r.key.dataset_id, r.key.target, r.key.classifier);
        embedders.insert(r.key.embedder);
        if (r.key.unlabeled_size >= r.key.labeled_size)
          grid.emplace(r.key.labeled_size, r.key.unlabeled_size);
      }
      os << "# rows = targets, columns = embedders, one curve over unlabeled_size per labeled_size\n";
      os << "dataset_id,target,embedder,classifier,labeled_size,unlabeled_size,mean,std,count,"
            "status\n";
      for (const auto& [ds, tg, cl] : panels)
        for (const auto& em : embedders) {
          bool any = false;
          std::ostringstream block;
          for (const auto& [l, u] : grid) {
            const AggregateKey k{ds, tg, em, cl, l, u};
            const auto* r = find(k);
            any = any || r;
            block << key_fields(k) << ',' << value_fields(r) << ',' << (r ? "present" : "absent")
                  << '\n';
          }
          if (!any)
            t.warnings.push_back("absent: " + ds + '/' + tg + '/' + em + '/' + cl + " (whole column)");
          os << block.str();
        }
      break;
    }
    case FigureKind::f3_modality_bars: {
      std::map<Curve, std::size_t> umax;
      std::set<std::size_t> ls;
      for (const auto& r : rows) {
        auto& u = umax[{r.key.dataset_id, r.key.target, r.key.embedder, r.key.classifier}];
        u = std::max(u, r.key.unlabeled_size);
      }
      for (const auto& r : rows)
        if (r.key.labeled_size < r.key.unlabeled_size ||
            r.key.unlabeled_size < umax[{r.key.dataset_id, r.key.target, r.key.embedder,
                                         r.key.classifier}])
          ls.insert(r.key.labeled_size);
      if (ls.empty())
        for (const auto& r : rows) ls.insert(r.key.labeled_size);
      os << "# bars grouped by dataset (modality), target and classifier; one bar per labeled_size "
            "at the largest unlabeled_size\n";
      os << "dataset_id,target,embedder,classifier,labeled_size,unlabeled_size,mean,std,count\n";
      for (const auto& [curve, u] : umax) {
        const auto& [ds, tg, em, cl] = curve;
        for (std::size_t l : ls) {
          if (l > u) continue;
          const AggregateKey k{ds, tg, em, cl, l, u};
          const auto* r = find(k);
          if (!r) t.warnings.push_back("absent: " + describe(k));
          os << key_fields(k) << ',' << value_fields(r) << '\n';
        }
      }
      break;
    }
  }
  t.text = os.str();
  return t;
}

std::vector<EffectSummaryRow> summarize_effects(std::span<const EffectRow> effects,
                                                const std::map<std::string, double>& weights) {
  using Key = std::tuple<std::string, std::string, std::string, std::size_t>;
  std::map<Key, std::vector<const EffectRow*>> groups;
  for (const auto& e : effects)
    groups[{e.dataset_id, e.embedder, e.classifier, e.labeled_size}].push_back(&e);

  std::vector<EffectSummaryRow> out;
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const EffectRow* a, const EffectRow* b) { return a->target < b->target; });
    EffectSummaryRow row;
    std::tie(row.dataset_id, row.embedder, row.classifier, row.labeled_size) = key;
    std::map<std::size_t, std::pair<double, double>> per_rep;  // weighted sum, weight sum
    for (const auto* e : members) {
      double w = 1.0;
      if (!weights.empty()) {
        auto it = weights.find(e->target);
        if (it == weights.end()) throw ConfigError("summarize_effects: no weight for target " + e->target);
        w = it->second;
        if (!(w >= 0.0)) throw ConfigError("summarize_effects: negative weight for " + e->target);
      }
      row.targets.push_back(e->target);
      row.weights.push_back(w);
      for (std::size_t i = 0; i < e->effect.repetitions.size(); ++i) {
        const double v = e->effect.per_repetition[i];
        if (std::isnan(v)) continue;
        auto& acc = per_rep[e->effect.repetitions[i]];
        acc.first += w * v;
        acc.second += w;
      }
    }
    std::vector<double> values;
    for (const auto& [rep, acc] : per_rep)
      if (acc.second > 0.0) values.push_back(acc.first / acc.second);
    row.effect = mean_std(values);
    if (values.empty()) row.effect.mean = kNaN;
    out.push_back(std::move(row));
  }
  return out;
}

json effects_to_json(std::span<const EffectSummaryRow> rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json w = json::object();
    for (std::size_t i = 0; i < r.targets.size(); ++i) w[r.targets[i]] = r.weights[i];
    arr.push_back({{"dataset_id", r.dataset_id},
                   {"embedder", r.embedder},
                   {"classifier", r.classifier},
                   {"labeled_size", r.labeled_size},
                   {"effect_mean", std::isnan(r.effect.mean) ? json(nullptr) : json(r.effect.mean)},
                   {"effect_std", r.effect.std},
                   {"repetitions", r.effect.count},
                   {"target_weights", w}});
  }
  return {{"spread", "sample standard deviation across repetitions"}, {"effects", arr}};
}

std::string effects_to_text(std::span<const EffectSummaryRow> rows) {
  std::vector<std::array<std::string, 6>> cells;
  cells.push_back({"dataset", "embedder", "classifier", "L", "effect (mean ± std, n)", "targets"});
  for (const auto& r : rows) {
    std::string targets;
    for (const auto& t : r.targets) targets += (targets.empty() ? "" : " ") + t;
    cells.push_back({r.dataset_id, r.embedder, r.classifier, std::to_string(r.labeled_size),
                     fixed(r.effect.mean, 4) + " ± " + fixed(r.effect.std, 4) +
                         " (n=" + std::to_string(r.effect.count) + ")",
                     targets});
  }
  // "±" is two bytes but one column wide.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80 ? 1 : 0;
    return w;
  };
  std::array<std::size_t, 6> widths{};
  for (const auto& row : cells)
    for (std::size_t c = 0; c < 6; ++c) widths[c] = std::max(widths[c], width(row[c]));
  std::string out = "# effect = (semi - floor) / (ceiling - floor); ± is the sample standard "
                    "deviation across repetitions\n";
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 6; ++c) {
      out += row[c];
      if (c + 1 < 6) out += std::string(widths[c] - width(row[c]) + 2, ' ');
    }
    out += '\n';
  }
  return out;
}

}  // namespace latentbench
