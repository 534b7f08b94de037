#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "robustgcn/attack.hpp"
#include "robustgcn/dataset.hpp"
#include "robustgcn/model.hpp"

namespace robustgcn {

enum class AttackMode { Direct, Indirect };

std::string mode_name(AttackMode m);

/// Per-budget accuracies and the Sum(q * p_q) robustness metric for one
/// attack campaign.
struct RobustnessReport {
  std::string dataset;
  Aggregation aggregation;
  std::string mode;  // "direct" | "indirect"
  std::uint32_t targets = 0;
  std::vector<double> p;  // index q-1, q = 1..budget
  double metric = 0.0;
  std::vector<std::uint64_t> seeds;
  std::string config_echo;
};

double metric_from_p(std::span<const double> p);

/// Fraction of masked nodes whose prediction equals their label.
double clean_accuracy(const GcnModel& m, const Graph& g, const FeatureMatrix& x,
                      const LabelVector& y, std::span<const NodeId> mask);

/// min(count, |test|) test nodes drawn uniformly without replacement,
/// returned ascending.
std::vector<NodeId> sample_targets(const Split& split, std::uint32_t count,
                                   std::uint64_t target_seed);

struct CampaignRun {
  RobustnessReport report;
  std::vector<AttackOutcome> outcomes;     // one per target, target order
  double clean_accuracy_on_targets = 0.0;  // = p at budget 0
};

/// Greedy attack campaign for one trained model. p_q counts targets that are
/// correctly classified on the clean graph and still predict their reference
/// class after the budget-q prefix of the greedy edit sequence; targets the
/// clean model already misclassifies count as broken at every budget and are
/// not attacked.
CampaignRun run_campaign(const GcnModel& m, const Graph& g, const FeatureMatrix& x,
                         const LabelVector& y, std::span<const NodeId> targets,
                         std::uint32_t max_budget, AttackMode mode,
                         std::uint32_t jobs = 1);

/// Mean of per-seed reports (same dataset/aggregation/mode/targets); seed
/// lists concatenate, the metric is recomputed from the averaged p.
RobustnessReport aggregate_reports(std::span<const RobustnessReport> reports);

/// Budget-1 exact study over all listed targets.
std::vector<SingleEdgeResult> run_single_edge_study(const GcnModel& m, const Graph& g,
                                                    const FeatureMatrix& x,
                                                    std::span<const NodeId> targets,
                                                    std::uint32_t jobs = 1,
                                                    std::size_t inject_cap = 0);

struct NodeCategoryRecord {
  NodeId node = 0;
  NodeId degree = 0;
  double purity = 0.0;
  bool injection = false;
  bool deletion = false;
};

struct CategorySummary {
  std::uint32_t targets = 0;
  double pct_injection = 0.0;
  double pct_deletion = 0.0;
  double pct_both = 0.0;
  // Nodes breakable by deletion but not injection; injection dominates in
  // practice, so this count should stay near zero.
  std::uint32_t deletion_without_injection = 0;
  std::vector<NodeCategoryRecord> records;  // every target, with degree/purity
};

CategorySummary categorize_single_edge(std::span<const SingleEdgeResult> results,
                                       const Graph& g, const LabelVector& y);

// --- report files (byte-deterministic; floats fixed to 6 decimals) ---

void emit_report_json(const RobustnessReport& r, const std::filesystem::path& path);
void emit_report_csv(const RobustnessReport& r, const std::filesystem::path& path);

inline constexpr const char* kReportCsvHeader = "dataset,agg,mode,q1,q2,q3,q4,q5,metric";

struct ParsedReport {
  RobustnessReport report;
  bool metric_mismatch = false;  // stored metric disagreed; report.metric recomputed
  double stored_metric = 0.0;
};

ParsedReport parse_report_json(const std::filesystem::path& path);

void emit_category_json(const CategorySummary& s, const std::string& dataset,
                        const Aggregation& agg, const std::string& config_echo,
                        const std::filesystem::path& path);

/// Plot-ready per-node table: node,degree,purity,injection,deletion
void emit_category_nodes_csv(const CategorySummary& s, const std::filesystem::path& path);

void emit_outcomes_jsonl(std::span<const AttackOutcome> outcomes,
                         const std::string& config_echo,
                         const std::filesystem::path& path);

}  // namespace robustgcn
