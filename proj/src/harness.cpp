#include "robustgcn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "robustgcn/errors.hpp"

namespace robustgcn {

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  return out;
}

/// Run fn(i) for i in [0, n) across `jobs` threads; slot-indexed results keep
/// the outcome independent of the worker count.
template <typename Fn>
void parallel_for(std::size_t n, std::uint32_t jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::uint32_t workers = std::min<std::uint32_t>(jobs, static_cast<std::uint32_t>(n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::uint32_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::string mode_name(AttackMode m) {
  return m == AttackMode::Direct ? "direct" : "indirect";
}

double metric_from_p(std::span<const double> p) {
  double s = 0.0;
  for (std::size_t q = 0; q < p.size(); ++q) s += static_cast<double>(q + 1) * p[q];
  return s;
}

double clean_accuracy(const GcnModel& m, const Graph& g, const FeatureMatrix& x,
                      const LabelVector& y, std::span<const NodeId> mask) {
  if (mask.empty()) throw std::invalid_argument("clean_accuracy: empty mask");
  Matrix logits = forward(m, g, x);
  std::size_t hit = 0;
  for (NodeId v : mask)
    if (pick_class(logits.row_span(v)) == y.labels[v]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(mask.size());
}

std::vector<NodeId> sample_targets(const Split& split, std::uint32_t count,
                                   std::uint64_t target_seed) {
  std::vector<NodeId> pool(split.test.begin(), split.test.end());
  std::sort(pool.begin(), pool.end());
  const std::size_t take = std::min<std::size_t>(count, pool.size());
  Rng rng(target_seed);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  std::sort(pool.begin(), pool.end());
  return pool;
}

CampaignRun run_campaign(const GcnModel& m, const Graph& g, const FeatureMatrix& x,
                         const LabelVector& y, std::span<const NodeId> targets,
                         std::uint32_t max_budget, AttackMode mode, std::uint32_t jobs) {
  if (targets.empty()) throw std::invalid_argument("run_campaign: empty target set");
  if (max_budget < 1 || max_budget > 5)
    throw std::invalid_argument("run_campaign: budget must be in 1..5");

  const AttackContext ctx = AttackContext::build(m, g, x);

  CampaignRun run;
  run.outcomes.resize(targets.size());
  std::vector<char> clean_correct(targets.size(), 0);

  parallel_for(targets.size(), jobs, [&](std::size_t i) {
    const NodeId t = targets[i];
    const bool correct = ctx.reference_class[t] == y.labels[t];
    clean_correct[i] = correct ? 1 : 0;
    if (!correct) {
      // Already misclassified: nothing for the attacker to do.
      AttackOutcome o;
      o.target = t;
      o.reference_class = ctx.reference_class[t];
      o.new_class = o.reference_class;
      o.budget = max_budget;
      run.outcomes[i] = std::move(o);
      return;
    }
    if (mode == AttackMode::Direct) {
      run.outcomes[i] = greedy_direct_attack(ctx, t, max_budget);
    } else {
      try {
        run.outcomes[i] = greedy_indirect_attack(ctx, t, max_budget);
      } catch (const DataError&) {
        // Isolated target (self-loop only): no indirect surface, survives.
        AttackOutcome o;
        o.target = t;
        o.reference_class = ctx.reference_class[t];
        o.new_class = o.reference_class;
        o.budget = max_budget;
        run.outcomes[i] = std::move(o);
      }
    }
  });

  std::size_t correct_count = 0;
  for (char c : clean_correct) correct_count += c;
  run.clean_accuracy_on_targets =
      static_cast<double>(correct_count) / static_cast<double>(targets.size());

  run.report.aggregation = m.aggregation;
  run.report.mode = mode_name(mode);
  run.report.targets = static_cast<std::uint32_t>(targets.size());
  run.report.seeds = {m.config.seed};
  run.report.p.assign(max_budget, 0.0);
  for (std::uint32_t q = 1; q <= max_budget; ++q) {
    std::size_t alive = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (!clean_correct[i]) continue;
      const auto& o = run.outcomes[i];
      if (o.success_step == 0 || o.success_step > q) ++alive;
    }
    run.report.p[q - 1] = static_cast<double>(alive) / static_cast<double>(targets.size());
  }
  run.report.metric = metric_from_p(run.report.p);
  return run;
}

RobustnessReport aggregate_reports(std::span<const RobustnessReport> reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_reports: no reports");
  RobustnessReport out = reports.front();
  for (const auto& r : reports.subspan(1)) {
    if (r.mode != out.mode || r.targets != out.targets ||
        r.aggregation.kind != out.aggregation.kind || r.p.size() != out.p.size() ||
        r.dataset != out.dataset)
      throw std::invalid_argument("aggregate_reports: incompatible reports");
    for (std::size_t i = 0; i < out.p.size(); ++i) out.p[i] += r.p[i];
    out.seeds.insert(out.seeds.end(), r.seeds.begin(), r.seeds.end());
  }
  const double inv = 1.0 / static_cast<double>(reports.size());
  for (double& v : out.p) v *= inv;
  out.metric = metric_from_p(out.p);
  return out;
}

std::vector<SingleEdgeResult> run_single_edge_study(const GcnModel& m, const Graph& g,
                                                    const FeatureMatrix& x,
                                                    std::span<const NodeId> targets,
                                                    std::uint32_t jobs,
                                                    std::size_t inject_cap) {
  const AttackContext ctx = AttackContext::build(m, g, x);
  std::vector<SingleEdgeResult> results(targets.size());
  parallel_for(targets.size(), jobs, [&](std::size_t i) {
    std::vector<NodeId> cand;
    if (inject_cap > 0) cand = most_distant_feature_nodes(x, targets[i], inject_cap);
    results[i] = enumerate_single_edge(ctx, targets[i], cand);
  });
  return results;
}

CategorySummary categorize_single_edge(std::span<const SingleEdgeResult> results,
                                       const Graph& g, const LabelVector& y) {
  CategorySummary s;
  s.targets = static_cast<std::uint32_t>(results.size());
  if (results.empty()) return s;
  std::size_t inj = 0, del = 0, both = 0;
  s.records.reserve(results.size());
  for (const auto& r : results) {
    inj += r.injection_success;
    del += r.deletion_success;
    both += r.both_success;
    if (r.deletion_success && !r.injection_success) ++s.deletion_without_injection;
    NodeCategoryRecord rec;
    rec.node = r.target;
    rec.degree = r.degree;
    rec.purity = purity(g, y, r.target);
    rec.injection = r.injection_success;
    rec.deletion = r.deletion_success;
    s.records.push_back(rec);
  }
  const double denom = static_cast<double>(results.size());
  s.pct_injection = 100.0 * static_cast<double>(inj) / denom;
  s.pct_deletion = 100.0 * static_cast<double>(del) / denom;
  s.pct_both = 100.0 * static_cast<double>(both) / denom;
  return s;
}

void emit_report_json(const RobustnessReport& r, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "{\n";
  out << "  \"config\": \"" << json_escape(r.config_echo) << "\",\n";
  out << "  \"dataset\": \"" << json_escape(r.dataset) << "\",\n";
  out << "  \"aggregation\": \"" << r.aggregation.name() << "\",\n";
  out << "  \"alpha\": " << fixed6(r.aggregation.alpha) << ",\n";
  out << "  \"mode\": \"" << r.mode << "\",\n";
  out << "  \"targets\": " << r.targets << ",\n";
  out << "  \"seeds\": [";
  for (std::size_t i = 0; i < r.seeds.size(); ++i)
    out << (i ? ", " : "") << r.seeds[i];
  out << "],\n";
  out << "  \"p\": [";
  for (std::size_t i = 0; i < r.p.size(); ++i)
    out << (i ? ", " : "") << fixed6(r.p[i]);
  out << "],\n";
  out << "  \"metric\": " << fixed6(r.metric) << "\n";
  out << "}\n";
}

void emit_report_csv(const RobustnessReport& r, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << kReportCsvHeader << "\n";
  out << r.dataset << "," << r.aggregation.name() << "," << r.mode;
  for (std::size_t q = 0; q < 5; ++q)
    out << "," << (q < r.p.size() ? fixed6(r.p[q]) : std::string());
  out << "," << fixed6(r.metric) << "\n";
}

ParsedReport parse_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read report: " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("invalid JSON in report: " + path.string());
  ParsedReport pr;
  try {
    pr.report.config_echo = j.value("config", "");
    pr.report.dataset = j.at("dataset").get<std::string>();
    pr.report.aggregation =
        Aggregation::parse(j.at("aggregation").get<std::string>(), j.at("alpha").get<double>());
    pr.report.mode = j.at("mode").get<std::string>();
    pr.report.targets = j.at("targets").get<std::uint32_t>();
    pr.report.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    pr.report.p = j.at("p").get<std::vector<double>>();
    pr.stored_metric = j.at("metric").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("report " + path.string() + ": " + e.what());
  }
  const double recomputed = metric_from_p(pr.report.p);
  // p and metric are stored at 6 decimals; recomputing from rounded p can
  // drift by sum(q) * 5e-7, so allow that before calling it a mismatch.
  pr.metric_mismatch = std::abs(recomputed - pr.stored_metric) > 2e-5;
  pr.report.metric = recomputed;
  return pr;
}

void emit_category_json(const CategorySummary& s, const std::string& dataset,
                        const Aggregation& agg, const std::string& config_echo,
                        const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "{\n";
  out << "  \"config\": \"" << json_escape(config_echo) << "\",\n";
  out << "  \"dataset\": \"" << json_escape(dataset) << "\",\n";
  out << "  \"aggregation\": \"" << agg.name() << "\",\n";
  out << "  \"alpha\": " << fixed6(agg.alpha) << ",\n";
  out << "  \"mode\": \"single-edge\",\n";
  out << "  \"targets\": " << s.targets << ",\n";
  out << "  \"pct_injection\": " << fixed6(s.pct_injection) << ",\n";
  out << "  \"pct_deletion\": " << fixed6(s.pct_deletion) << ",\n";
  out << "  \"pct_both\": " << fixed6(s.pct_both) << ",\n";
  out << "  \"deletion_without_injection\": " << s.deletion_without_injection << "\n";
  out << "}\n";
}

void emit_category_nodes_csv(const CategorySummary& s, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "node,degree,purity,injection,deletion\n";
  for (const auto& r : s.records)
    out << r.node << "," << r.degree << "," << fixed6(r.purity) << ","
        << (r.injection ? 1 : 0) << "," << (r.deletion ? 1 : 0) << "\n";
}

void emit_outcomes_jsonl(std::span<const AttackOutcome> outcomes,
                         const std::string& config_echo,
                         const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "{\"config\": \"" << json_escape(config_echo) << "\"}\n";
  for (const auto& o : outcomes) {
    out << "{\"target\": " << o.target << ", \"reference_class\": " << o.reference_class
        << ", \"budget\": " << o.budget << ", \"edits\": [";
    for (std::size_t i = 0; i < o.edits.size(); ++i) {
      const auto& e = o.edits[i];
      out << (i ? ", " : "") << "{\"kind\": \""
          << (e.kind == EditKind::Inject ? "inject" : "delete") << "\", \"u\": " << e.u
          << ", \"v\": " << e.v << "}";
    }
    out << "], \"success\": " << (o.success ? "true" : "false")
        << ", \"new_class\": " << o.new_class << "}\n";
  }
}

}  // namespace robustgcn
