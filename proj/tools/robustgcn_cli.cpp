// robustgcn: train GCNs with mean/median/trimmed-mean aggregation, run
// structural evasion attacks, compare breakdown points, and tabulate
// robustness reports. Every subcommand is deterministic given its flags.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "robustgcn/errors.hpp"
#include "robustgcn/harness.hpp"
#include "robustgcn/model.hpp"
#include "robustgcn/synth.hpp"

namespace fs = std::filesystem;
using namespace robustgcn;

namespace {

fs::path scratch_dir() {
  if (const char* env = std::getenv("ROBUSTGCN_SCRATCH")) return fs::path(env);
  return fs::path(".");
}

struct Pipeline {
  DatasetMeta meta;
  Graph graph;  // LCC, self-loops included
  FeatureMatrix features;
  LabelVector labels;
  Split split;
  std::vector<NodeId> id_map;
};

/// load -> LCC -> optional L1 feature normalization -> self-loops -> split.
/// splits.json node ids refer to the raw bundle; they are remapped into the
/// LCC and ids outside it are dropped.
Pipeline prepare(const fs::path& data_dir, bool feature_norm, std::uint64_t split_seed) {
  DatasetBundle b = load_bundle(data_dir);
  LccResult lcc = largest_connected_component(b.graph, b.features, b.labels);

  Pipeline p;
  p.meta = b.meta;
  p.features = std::move(lcc.features);
  if (feature_norm) p.features.row_normalize_l1();
  p.labels = std::move(lcc.labels);
  p.id_map = std::move(lcc.id_map);

  if (b.split.has_value()) {
    std::vector<std::int64_t> to_new(b.meta.num_nodes, -1);
    for (NodeId ni = 0; ni < p.id_map.size(); ++ni) to_new[p.id_map[ni]] = ni;
    auto remap = [&](const std::vector<NodeId>& part) {
      std::vector<NodeId> out;
      for (NodeId id : part)
        if (to_new[id] != -1) out.push_back(static_cast<NodeId>(to_new[id]));
      return out;
    };
    p.split.train = remap(b.split->train);
    p.split.val = remap(b.split->val);
    p.split.test = remap(b.split->test);
    p.split.seed = 0;
  } else {
    p.split = random_split(static_cast<NodeId>(p.id_map.size()), {0.1, 0.1, 0.8},
                           split_seed);
  }

  p.graph = lcc.graph.with_self_loops();
  return p;
}

struct TrainArgs {
  std::string data;
  std::string agg = "mean";
  double alpha = 0.45;
  std::uint32_t hidden = 64;
  double lr = 0.01;
  std::uint32_t epochs = 200;
  std::uint32_t patience = 30;
  double dropout = 0.5;
  double weight_decay = 5e-4;
  bool no_feature_norm = false;
  std::uint64_t seed = 1;
  std::int64_t split_seed = -1;  // -1: follow --seed
  std::string out;
  std::string history;
};

std::string echo_train(const TrainArgs& a, std::uint64_t split_seed) {
  std::ostringstream os;
  os << "train --data " << a.data << " --agg " << a.agg << " --alpha " << a.alpha
     << " --hidden " << a.hidden << " --lr " << a.lr << " --epochs " << a.epochs
     << " --patience " << a.patience << " --dropout " << a.dropout
     << " --weight-decay " << a.weight_decay
     << (a.no_feature_norm ? " --no-feature-norm" : "") << " --seed " << a.seed
     << " --split-seed " << split_seed;
  return os.str();
}

int cmd_train(const TrainArgs& a) {
  const std::uint64_t split_seed =
      a.split_seed < 0 ? a.seed : static_cast<std::uint64_t>(a.split_seed);

  GcnConfig cfg;
  cfg.hidden_units = a.hidden;
  cfg.learning_rate = a.lr;
  cfg.max_epochs = a.epochs;
  cfg.patience = a.patience;
  cfg.dropout = a.dropout;
  cfg.weight_decay = a.weight_decay;
  cfg.feature_norm = !a.no_feature_norm;
  cfg.seed = a.seed;
  cfg.split_seed = split_seed;
  try {
    cfg.aggregation = Aggregation::parse(a.agg, a.alpha);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  cfg.validate();

  Pipeline p = prepare(a.data, cfg.feature_norm, split_seed);
  TrainResult r = train(cfg, p.graph, p.features, p.labels, p.split);

  const fs::path out = a.out.empty() ? scratch_dir() / "model.json" : fs::path(a.out);
  save_model(r.model, out);

  const fs::path hist_path =
      a.history.empty() ? fs::path(out).replace_extension(".history.json")
                        : fs::path(a.history);
  nlohmann::ordered_json h;
  h["config"] = echo_train(a, split_seed);
  h["dataset"] = p.meta.name;
  h["best_epoch"] = r.history.best_epoch;
  h["epochs_run"] = r.history.train_loss.size();
  h["train_loss"] = r.history.train_loss;
  h["val_accuracy"] = r.history.val_accuracy;
  std::ofstream hout(hist_path, std::ios::binary);
  if (!hout) throw DataError("cannot write history file: " + hist_path.string());
  hout << h.dump(1) << "\n";

  const double test_acc =
      clean_accuracy(r.model, p.graph, p.features, p.labels, p.split.test);
  std::cout << "trained " << p.meta.name << " agg=" << cfg.aggregation.name()
            << " seed=" << cfg.seed << " best_epoch=" << r.history.best_epoch
            << " test_acc=" << test_acc << "\n"
            << "model: " << out.string() << "\n";
  return 0;
}

struct AttackArgs {
  std::string model;
  std::string data;
  std::string mode;
  std::string budget = "1-5";
  std::string targets = "1000";
  std::uint64_t target_seed = 1;
  std::uint32_t jobs = 1;
  std::size_t inject_candidates = 0;
  std::string out;
  std::string csv;
  std::string outcomes;
};

std::uint32_t parse_budget(const std::string& s) {
  std::uint32_t max_q = 0;
  if (s.rfind("1-", 0) == 0) {
    max_q = static_cast<std::uint32_t>(std::stoul(s.substr(2)));
  } else if (s.find('-') == std::string::npos) {
    max_q = static_cast<std::uint32_t>(std::stoul(s));
  } else {
    throw ConfigError("budget must be 'Q' or '1-Q' with Q in 1..5");
  }
  if (max_q < 1 || max_q > 5) throw ConfigError("budget must be within 1..5");
  return max_q;
}

std::string echo_attack(const AttackArgs& a) {
  std::ostringstream os;
  os << "attack --model " << a.model << " --data " << a.data << " --mode " << a.mode
     << " --budget " << a.budget << " --targets " << a.targets << " --target-seed "
     << a.target_seed;
  if (a.inject_candidates > 0) os << " --inject-candidates " << a.inject_candidates;
  return os.str();
}

int cmd_attack(const AttackArgs& a) {
  if (a.mode != "single-edge" && a.mode != "direct" && a.mode != "indirect")
    throw ConfigError("mode must be single-edge, direct, or indirect");
  const std::uint32_t max_budget = parse_budget(a.budget);

  GcnModel model = load_model(a.model);
  Pipeline p = prepare(a.data, model.config.feature_norm, model.config.split_seed);
  if (model.num_features() != p.features.num_features)
    throw DataError("model/bundle feature dimension mismatch");

  std::vector<NodeId> targets;
  if (a.targets == "all") {
    if (a.mode == "single-edge") {
      targets.resize(p.graph.num_nodes());
      for (NodeId i = 0; i < targets.size(); ++i) targets[i] = i;
    } else {
      targets = p.split.test;
      std::sort(targets.begin(), targets.end());
    }
  } else {
    const auto count = static_cast<std::uint32_t>(std::stoul(a.targets));
    if (count == 0) throw ConfigError("target count must be positive");
    targets = sample_targets(p.split, count, a.target_seed);
  }
  if (targets.empty()) throw ConfigError("empty target set");

  const std::string echo = echo_attack(a);

  if (a.mode == "single-edge") {
    auto results = run_single_edge_study(model, p.graph, p.features, targets, a.jobs,
                                         a.inject_candidates);
    CategorySummary cat = categorize_single_edge(results, p.graph, p.labels);
    const fs::path out =
        a.out.empty() ? scratch_dir() / "category.json" : fs::path(a.out);
    emit_category_json(cat, p.meta.name, model.aggregation, echo, out);
    if (!a.csv.empty()) emit_category_nodes_csv(cat, a.csv);
    if (!a.outcomes.empty()) {
      std::vector<AttackOutcome> oc(results.size());
      for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        oc[i].target = r.target;
        oc[i].reference_class = r.reference_class;
        oc[i].budget = 1;
        oc[i].success = r.both_success;
        oc[i].new_class = r.new_class;
        if (r.first_success) oc[i].edits = {*r.first_success};
      }
      emit_outcomes_jsonl(oc, echo, a.outcomes);
    }
    std::cout << "single-edge study on " << p.meta.name << ": injection "
              << cat.pct_injection << "% deletion " << cat.pct_deletion << "% both "
              << cat.pct_both << "%\n"
              << "report: " << out.string() << "\n";
    return 0;
  }

  const AttackMode mode = a.mode == "direct" ? AttackMode::Direct : AttackMode::Indirect;
  CampaignRun run =
      run_campaign(model, p.graph, p.features, p.labels, targets, max_budget, mode,
                   a.jobs);
  run.report.dataset = p.meta.name;
  run.report.config_echo = echo;

  const fs::path out = a.out.empty() ? scratch_dir() / "report.json" : fs::path(a.out);
  emit_report_json(run.report, out);
  if (!a.csv.empty()) emit_report_csv(run.report, a.csv);
  if (!a.outcomes.empty()) emit_outcomes_jsonl(run.outcomes, echo, a.outcomes);

  std::cout << "campaign " << p.meta.name << " agg=" << model.aggregation.name()
            << " mode=" << run.report.mode << " targets=" << run.report.targets
            << " metric=" << run.report.metric << "\n"
            << "report: " << out.string() << "\n";
  return 0;
}

struct BreakdownArgs {
  std::string agg;
  double alpha = 0.45;
  std::uint32_t n = 0;
  std::uint32_t m_max = 0;  // 0: defaults to n
};

int cmd_breakdown(const BreakdownArgs& a) {
  Aggregation agg;
  try {
    agg = Aggregation::parse(a.agg, a.alpha);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (a.n < 1) throw ConfigError("--n must be >= 1");
  const std::uint32_t m_max = a.m_max == 0 ? a.n : a.m_max;
  if (m_max > a.n) throw ConfigError("--m-max cannot exceed --n");

  AggregationInput clean;
  clean.rows = Matrix(a.n, 1);
  for (std::uint32_t i = 0; i < a.n; ++i)
    clean.rows.at(i, 0) =
        a.n == 1 ? 0.0
                 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(a.n - 1);
  if (agg.uses_weights()) clean.weights.assign(a.n, 1.0 / static_cast<double>(a.n));

  const std::vector<double> schedule = {1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8};
  BreakdownReport r;
  try {
    r = empirical_breakdown(agg, clean, schedule, m_max);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  char line[160];
  std::printf("%-8s %-5s %-7s %-9s %-11s %-11s\n", "agg", "n", "alpha", "m_break",
              "empirical", "theoretical");
  const std::string alpha_str =
      agg.kind == AggKind::TrimmedMean ? std::to_string(agg.alpha).substr(0, 5) : "-";
  std::snprintf(line, sizeof(line), "%-8s %-5u %-7s %-9s %-11s %.6f",
                agg.name().c_str(), a.n, alpha_str.c_str(),
                r.broke ? std::to_string(r.m_break).c_str() : "none",
                r.broke ? (std::to_string(r.empirical_fraction).substr(0, 8)).c_str()
                        : "-",
                theoretical_breakdown(agg, a.n));
  std::printf("%s\n", line);
  return 0;
}

int cmd_evaluate(const std::vector<std::string>& files) {
  struct Row {
    RobustnessReport r;
    std::string file;
  };
  std::vector<Row> rows;
  for (const auto& f : files) {
    ParsedReport pr = parse_report_json(f);
    if (pr.metric_mismatch)
      std::cerr << "warning: " << f << ": stored metric " << pr.stored_metric
                << " disagrees with recomputed " << pr.report.metric
                << "; using recomputed value\n";
    rows.push_back({std::move(pr.report), f});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.r.dataset != b.r.dataset) return a.r.dataset < b.r.dataset;
    return a.r.metric > b.r.metric;
  });

  std::printf("%-12s %-7s %-9s %-8s %-6s", "dataset", "agg", "mode", "targets", "seeds");
  for (int q = 1; q <= 5; ++q) std::printf(" %-8s", ("q" + std::to_string(q)).c_str());
  std::printf(" %-8s\n", "metric");
  for (const auto& row : rows) {
    std::printf("%-12s %-7s %-9s %-8u %-6zu", row.r.dataset.c_str(),
                row.r.aggregation.name().c_str(), row.r.mode.c_str(), row.r.targets,
                row.r.seeds.size());
    for (std::size_t q = 0; q < 5; ++q) {
      if (q < row.r.p.size()) std::printf(" %-8.4f", row.r.p[q]);
      else std::printf(" %-8s", "-");
    }
    std::printf(" %-8.4f\n", row.r.metric);
  }

  // mean +- sample std per (dataset, agg, mode) group with several reports
  std::map<std::string, std::vector<double>> groups;
  for (const auto& row : rows)
    groups[row.r.dataset + "/" + row.r.aggregation.name() + "/" + row.r.mode].push_back(
        row.r.metric);
  for (const auto& [key, ms] : groups) {
    if (ms.size() < 2) continue;
    double mean = 0.0;
    for (double m : ms) mean += m;
    mean /= static_cast<double>(ms.size());
    double var = 0.0;
    for (double m : ms) var += (m - mean) * (m - mean);
    var /= static_cast<double>(ms.size() - 1);
    std::printf("group %s: metric %.4f +- %.4f over %zu reports\n", key.c_str(), mean,
                std::sqrt(var), ms.size());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GCNs with robust aggregation: training, structural attacks, "
               "breakdown-point analysis"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* t = app.add_subcommand("train", "Train a 2-layer GCN on a dataset bundle");
  t->add_option("--data", ta.data, "dataset bundle directory")->required();
  t->add_option("--agg", ta.agg, "aggregation: mean | median | tmean")
      ->capture_default_str();
  t->add_option("--alpha", ta.alpha, "trim fraction for tmean")->capture_default_str();
  t->add_option("--hidden", ta.hidden, "hidden units")->capture_default_str();
  t->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  t->add_option("--epochs", ta.epochs, "max training epochs")->capture_default_str();
  t->add_option("--patience", ta.patience, "early-stopping patience")
      ->capture_default_str();
  t->add_option("--dropout", ta.dropout, "dropout on layer-1 output")
      ->capture_default_str();
  t->add_option("--weight-decay", ta.weight_decay, "L2 penalty on W1")
      ->capture_default_str();
  t->add_flag("--no-feature-norm", ta.no_feature_norm,
              "skip L1 row normalization of features");
  t->add_option("--seed", ta.seed, "init/dropout seed")->capture_default_str();
  t->add_option("--split-seed", ta.split_seed,
                "split seed (default: follow --seed)");
  t->add_option("--out", ta.out, "model output path (default: scratch/model.json)");
  t->add_option("--history", ta.history, "history output path");

  AttackArgs aa;
  auto* at = app.add_subcommand("attack", "Run structural evasion attacks");
  at->add_option("--model", aa.model, "trained model file")->required();
  at->add_option("--data", aa.data, "dataset bundle directory")->required();
  at->add_option("--mode", aa.mode, "single-edge | direct | indirect")->required();
  at->add_option("--budget", aa.budget, "perturbation budget, e.g. 1-5")
      ->capture_default_str();
  at->add_option("--targets", aa.targets, "target count or 'all'")
      ->capture_default_str();
  at->add_option("--target-seed", aa.target_seed, "target sampling seed")
      ->capture_default_str();
  at->add_option("--jobs", aa.jobs, "parallel workers")->capture_default_str();
  at->add_option("--inject-candidates", aa.inject_candidates,
                 "restrict injections to the k most-distant-feature nodes (0 = all)")
      ->capture_default_str();
  at->add_option("--out", aa.out, "report output path");
  at->add_option("--csv", aa.csv, "CSV output path");
  at->add_option("--outcomes", aa.outcomes, "per-target JSONL output path");

  BreakdownArgs ba;
  auto* bt = app.add_subcommand("breakdown",
                                "Theoretical vs empirical breakdown points");
  bt->add_option("--agg", ba.agg, "aggregation: mean | median | tmean")->required();
  bt->add_option("--alpha", ba.alpha, "trim fraction for tmean")->capture_default_str();
  bt->add_option("--n", ba.n, "clean input size")->required();
  bt->add_option("--m-max", ba.m_max, "max injected rows (default: n)");

  std::vector<std::string> report_files;
  auto* ev = app.add_subcommand("evaluate", "Tabulate robustness reports");
  ev->add_option("reports", report_files, "report JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*t) return cmd_train(ta);
    if (*at) return cmd_attack(aa);
    if (*bt) return cmd_breakdown(ba);
    if (*ev) return cmd_evaluate(report_files);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
