#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "robustgcn/linalg.hpp"

namespace robustgcn {

enum class AggKind { WeightedMean, Median, TrimmedMean };

/// Aggregation scheme selector. alpha is the trim fraction and is only
/// meaningful for TrimmedMean (0 < alpha < 0.5).
struct Aggregation {
  AggKind kind = AggKind::WeightedMean;
  double alpha = 0.45;

  void validate() const;
  std::string name() const;  // "mean" | "median" | "tmean"
  static Aggregation parse(const std::string& name, double alpha = 0.45);

  bool uses_weights() const { return kind == AggKind::WeightedMean; }
};

/// One aggregation call: the multiset of neighbor embeddings (one row per
/// neighbor) plus, for the weighted mean, a positive weight per row.
struct AggregationInput {
  Matrix rows;                  // r x d
  std::vector<double> weights;  // empty = absent; else size r, all > 0

  void validate(bool weights_required) const;
};

std::vector<double> weighted_mean_forward(const AggregationInput& in);
Matrix weighted_mean_backward(const AggregationInput& in,
                              std::span<const double> upstream);

std::vector<double> median_forward(const AggregationInput& in);
Matrix median_backward(const AggregationInput& in, std::span<const double> upstream);

std::vector<double> trimmed_mean_forward(const AggregationInput& in, double alpha);
Matrix trimmed_mean_backward(const AggregationInput& in, double alpha,
                             std::span<const double> upstream);

std::vector<double> aggregate_forward(const Aggregation& agg, const AggregationInput& in);
Matrix aggregate_backward(const Aggregation& agg, const AggregationInput& in,
                          std::span<const double> upstream);

namespace kernels {

/// out[d] = sum_r w[r] * rows[r][d]
void weighted_mean(std::span<const double* const> rows, std::span<const double> w,
                   std::size_t dim, double* out);

/// Element-wise order statistic over dense rows. For Median alpha is ignored;
/// for TrimmedMean floor(n*alpha) values are dropped from each end. Ties are
/// resolved by stable (value, row index) order.
void order_stat(std::span<const double* const> rows, std::size_t dim, AggKind kind,
                double alpha, double* out);

/// Scatter the upstream gradient of an order-stat aggregation back to the
/// rows it selected. grads[r] must point at zero-initialized dim-length rows.
void order_stat_backward(std::span<const double* const> rows, std::size_t dim,
                         AggKind kind, double alpha, std::span<const double> upstream,
                         std::span<double* const> grads);

/// Element-wise order statistic over sparse rows that share an implicit-zero
/// background. Each input row is (indices ascending, values); the result is
/// emitted as sparse (index, value) pairs, skipping exact zeros. Explicit
/// zero entries behave the same as omitted ones.
void order_stat_sparse(
    std::span<const std::span<const std::uint32_t>> row_indices,
    std::span<const std::span<const double>> row_values, std::size_t num_rows,
    AggKind kind, double alpha, std::vector<std::uint32_t>& out_index,
    std::vector<double>& out_value);

}  // namespace kernels

/// Breakdown analysis of one aggregation scheme.
struct BreakdownReport {
  Aggregation kind;
  std::size_t n_clean = 0;
  bool broke = false;
  std::size_t m_break = 0;           // valid iff broke
  double empirical_fraction = 0.0;   // m_break / (n_clean + m_break)
  double theoretical_fraction = 0.0;
};

/// WeightedMean -> 1/(n+1); Median -> 1/2; TrimmedMean -> (floor(alpha*n)+1)/n
/// where n follows the contaminated-set-size convention.
double theoretical_breakdown(const Aggregation& agg, std::size_t n);

/// Escalating-magnitude search: for m = 1..m_max inject m rows of magnitude M
/// drawn from the schedule and flag divergence when the output delta keeps
/// growing by a super-threshold ratio across consecutive schedule steps.
/// For WeightedMean the injected rows get weight 1/sqrt(2*(n+m)).
BreakdownReport empirical_breakdown(const Aggregation& agg, const AggregationInput& clean,
                                    std::span<const double> magnitude_schedule,
                                    std::size_t m_max);

}  // namespace robustgcn
