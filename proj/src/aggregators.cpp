#include "robustgcn/aggregators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace robustgcn {

void Aggregation::validate() const {
  if (kind == AggKind::TrimmedMean && !(alpha > 0.0 && alpha < 0.5))
    throw std::invalid_argument("trimmed mean requires 0 < alpha < 0.5, got " +
                                std::to_string(alpha));
}

std::string Aggregation::name() const {
  switch (kind) {
    case AggKind::WeightedMean: return "mean";
    case AggKind::Median: return "median";
    case AggKind::TrimmedMean: return "tmean";
  }
  return "?";
}

Aggregation Aggregation::parse(const std::string& name, double alpha) {
  Aggregation a;
  a.alpha = alpha;
  if (name == "mean" || name == "wmean") {
    a.kind = AggKind::WeightedMean;
  } else if (name == "median") {
    a.kind = AggKind::Median;
  } else if (name == "tmean" || name == "trimmed-mean") {
    a.kind = AggKind::TrimmedMean;
  } else {
    throw std::invalid_argument("unknown aggregation '" + name + "'");
  }
  a.validate();
  return a;
}

void AggregationInput::validate(bool weights_required) const {
  if (rows.rows == 0) throw std::invalid_argument("aggregation input is empty");
  if (weights_required && weights.empty())
    throw std::invalid_argument("weighted mean requires per-row weights");
  if (!weights.empty()) {
    if (weights.size() != rows.rows)
      throw std::invalid_argument("weight count does not match row count");
    for (double w : weights)
      if (!(w > 0.0)) throw std::invalid_argument("weights must be positive");
  }
}

namespace kernels {

void weighted_mean(std::span<const double* const> rows, std::span<const double> w,
                   std::size_t dim, double* out) {
  std::fill(out, out + dim, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double wr = w[r];
    const double* row = rows[r];
    for (std::size_t d = 0; d < dim; ++d) out[d] += wr * row[d];
  }
}

namespace {

// Sorted (value, row) pairs for one dimension; unique keys make the order
// independent of the sort algorithm.
void sort_column(std::span<const double* const> rows, std::size_t d,
                 std::vector<std::pair<double, std::uint32_t>>& scratch) {
  scratch.clear();
  for (std::uint32_t r = 0; r < rows.size(); ++r) scratch.emplace_back(rows[r][d], r);
  std::sort(scratch.begin(), scratch.end());
}

std::size_t trim_count(std::size_t n, AggKind kind, double alpha) {
  if (kind != AggKind::TrimmedMean) return 0;
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * alpha));
}

}  // namespace

void order_stat(std::span<const double* const> rows, std::size_t dim, AggKind kind,
                double alpha, double* out) {
  const std::size_t n = rows.size();
  std::vector<std::pair<double, std::uint32_t>> col;
  col.reserve(n);
  for (std::size_t d = 0; d < dim; ++d) {
    sort_column(rows, d, col);
    if (kind == AggKind::Median) {
      out[d] = (n % 2 == 1) ? col[n / 2].first
                            : 0.5 * (col[n / 2 - 1].first + col[n / 2].first);
    } else {
      const std::size_t t = trim_count(n, kind, alpha);
      const std::size_t kept = n - 2 * t;
      double s = 0.0;
      for (std::size_t i = t; i < n - t; ++i) s += col[i].first;
      out[d] = s / static_cast<double>(kept);
    }
  }
}

void order_stat_backward(std::span<const double* const> rows, std::size_t dim,
                         AggKind kind, double alpha, std::span<const double> upstream,
                         std::span<double* const> grads) {
  const std::size_t n = rows.size();
  std::vector<std::pair<double, std::uint32_t>> col;
  col.reserve(n);
  for (std::size_t d = 0; d < dim; ++d) {
    sort_column(rows, d, col);
    if (kind == AggKind::Median) {
      if (n % 2 == 1) {
        grads[col[n / 2].second][d] += upstream[d];
      } else {
        grads[col[n / 2 - 1].second][d] += 0.5 * upstream[d];
        grads[col[n / 2].second][d] += 0.5 * upstream[d];
      }
    } else {
      const std::size_t t = trim_count(n, kind, alpha);
      const double share = upstream[d] / static_cast<double>(n - 2 * t);
      for (std::size_t i = t; i < n - t; ++i) grads[col[i].second][d] += share;
    }
  }
}

void order_stat_sparse(
    std::span<const std::span<const std::uint32_t>> row_indices,
    std::span<const std::span<const double>> row_values, std::size_t num_rows,
    AggKind kind, double alpha, std::vector<std::uint32_t>& out_index,
    std::vector<double>& out_value) {
  out_index.clear();
  out_value.clear();
  const std::size_t n = num_rows;
  if (n == 0) throw std::invalid_argument("order_stat_sparse: empty input");

  // Gather explicit entries, grouped by dimension.
  std::vector<std::pair<std::uint32_t, double>> entries;
  std::size_t total = 0;
  for (auto idx : row_indices) total += idx.size();
  entries.reserve(total);
  for (std::size_t r = 0; r < row_indices.size(); ++r) {
    auto idx = row_indices[r];
    auto val = row_values[r];
    for (std::size_t k = 0; k < idx.size(); ++k) entries.emplace_back(idx[k], val[k]);
  }
  std::sort(entries.begin(), entries.end());

  const std::size_t t = trim_count(n, kind, alpha);
  std::vector<double> vals;
  std::size_t i = 0;
  while (i < entries.size()) {
    const std::uint32_t d = entries[i].first;
    vals.clear();
    while (i < entries.size() && entries[i].first == d) vals.push_back(entries[i++].second);
    // sorted multiset = explicit values merged with (n - k) implicit zeros
    const std::size_t k = vals.size();
    const std::size_t zeros = n - k;
    std::size_t neg = 0;
    while (neg < k && vals[neg] < 0.0) ++neg;
    auto value_at = [&](std::size_t pos) {  // 0-based position in sorted multiset
      if (pos < neg) return vals[pos];
      if (pos < neg + zeros) return 0.0;
      return vals[pos - zeros];
    };
    double stat;
    if (kind == AggKind::Median) {
      stat = (n % 2 == 1) ? value_at(n / 2)
                          : 0.5 * (value_at(n / 2 - 1) + value_at(n / 2));
    } else {
      double s = 0.0;
      // explicit value at multiset position: vals[j] sits at j (j < neg) or
      // j + zeros (j >= neg); sum those inside the kept window [t, n-t).
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t pos = (j < neg) ? j : j + zeros;
        if (pos >= t && pos < n - t) s += vals[j];
      }
      stat = s / static_cast<double>(n - 2 * t);
    }
    if (stat != 0.0) {
      out_index.push_back(d);
      out_value.push_back(stat);
    }
  }
}

}  // namespace kernels

namespace {

std::vector<const double*> row_pointers(const Matrix& m) {
  std::vector<const double*> p(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) p[i] = m.row(i);
  return p;
}

void check_upstream(const Matrix& rows, std::span<const double> upstream) {
  if (upstream.size() != rows.cols)
    throw std::invalid_argument("upstream gradient dimension mismatch");
}

}  // namespace

std::vector<double> weighted_mean_forward(const AggregationInput& in) {
  in.validate(true);
  std::vector<double> out(in.rows.cols);
  auto ptrs = row_pointers(in.rows);
  kernels::weighted_mean(ptrs, in.weights, in.rows.cols, out.data());
  return out;
}

Matrix weighted_mean_backward(const AggregationInput& in,
                              std::span<const double> upstream) {
  in.validate(true);
  check_upstream(in.rows, upstream);
  Matrix g(in.rows.rows, in.rows.cols);
  for (std::size_t r = 0; r < in.rows.rows; ++r)
    for (std::size_t d = 0; d < in.rows.cols; ++d)
      g.at(r, d) = in.weights[r] * upstream[d];
  return g;
}

std::vector<double> median_forward(const AggregationInput& in) {
  in.validate(false);
  std::vector<double> out(in.rows.cols);
  auto ptrs = row_pointers(in.rows);
  kernels::order_stat(ptrs, in.rows.cols, AggKind::Median, 0.0, out.data());
  return out;
}

Matrix median_backward(const AggregationInput& in, std::span<const double> upstream) {
  in.validate(false);
  check_upstream(in.rows, upstream);
  Matrix g(in.rows.rows, in.rows.cols);
  auto ptrs = row_pointers(in.rows);
  std::vector<double*> grads(g.rows);
  for (std::size_t i = 0; i < g.rows; ++i) grads[i] = g.row(i);
  kernels::order_stat_backward(ptrs, in.rows.cols, AggKind::Median, 0.0, upstream, grads);
  return g;
}

std::vector<double> trimmed_mean_forward(const AggregationInput& in, double alpha) {
  in.validate(false);
  Aggregation{AggKind::TrimmedMean, alpha}.validate();
  std::vector<double> out(in.rows.cols);
  auto ptrs = row_pointers(in.rows);
  kernels::order_stat(ptrs, in.rows.cols, AggKind::TrimmedMean, alpha, out.data());
  return out;
}

Matrix trimmed_mean_backward(const AggregationInput& in, double alpha,
                             std::span<const double> upstream) {
  in.validate(false);
  Aggregation{AggKind::TrimmedMean, alpha}.validate();
  check_upstream(in.rows, upstream);
  Matrix g(in.rows.rows, in.rows.cols);
  auto ptrs = row_pointers(in.rows);
  std::vector<double*> grads(g.rows);
  for (std::size_t i = 0; i < g.rows; ++i) grads[i] = g.row(i);
  kernels::order_stat_backward(ptrs, in.rows.cols, AggKind::TrimmedMean, alpha, upstream,
                               grads);
  return g;
}

std::vector<double> aggregate_forward(const Aggregation& agg, const AggregationInput& in) {
  switch (agg.kind) {
    case AggKind::WeightedMean: return weighted_mean_forward(in);
    case AggKind::Median: return median_forward(in);
    case AggKind::TrimmedMean: return trimmed_mean_forward(in, agg.alpha);
  }
  throw std::logic_error("unreachable");
}

Matrix aggregate_backward(const Aggregation& agg, const AggregationInput& in,
                          std::span<const double> upstream) {
  switch (agg.kind) {
    case AggKind::WeightedMean: return weighted_mean_backward(in, upstream);
    case AggKind::Median: return median_backward(in, upstream);
    case AggKind::TrimmedMean: return trimmed_mean_backward(in, agg.alpha, upstream);
  }
  throw std::logic_error("unreachable");
}

double theoretical_breakdown(const Aggregation& agg, std::size_t n) {
  if (n < 1) throw std::invalid_argument("theoretical_breakdown: n must be >= 1");
  switch (agg.kind) {
    case AggKind::WeightedMean:
      return 1.0 / static_cast<double>(n + 1);
    case AggKind::Median:
      return 0.5;
    case AggKind::TrimmedMean: {
      agg.validate();
      const auto trimmed =
          static_cast<std::size_t>(std::floor(agg.alpha * static_cast<double>(n)));
      return static_cast<double>(trimmed + 1) / static_cast<double>(n);
    }
  }
  throw std::logic_error("unreachable");
}

BreakdownReport empirical_breakdown(const Aggregation& agg, const AggregationInput& clean,
                                    std::span<const double> magnitude_schedule,
                                    std::size_t m_max) {
  clean.validate(agg.uses_weights());
  if (magnitude_schedule.size() < 2)
    throw std::invalid_argument("magnitude schedule needs at least 2 steps");
  for (std::size_t i = 1; i < magnitude_schedule.size(); ++i)
    if (!(magnitude_schedule[i] > magnitude_schedule[i - 1]))
      throw std::invalid_argument("magnitude schedule must be strictly increasing");
  const std::size_t n = clean.rows.rows;
  if (m_max < 1 || m_max > n)
    throw std::invalid_argument("m_max must be in [1, |clean|]");

  const std::vector<double> f_clean = aggregate_forward(agg, clean);
  const std::size_t dim = clean.rows.cols;

  // Divergence detector: the delta between contaminated and clean output must
  // keep growing by at least `kGrowthRatio` per schedule step (the schedule
  // grows 10x per step, a bounded output settles toward ratio 1) for
  // `kConsecutive` consecutive steps.
  constexpr double kGrowthRatio = 5.0;
  constexpr int kConsecutive = 3;
  constexpr double kFloor = 1e-9;

  BreakdownReport report;
  report.kind = agg;
  report.n_clean = n;

  for (std::size_t m = 1; m <= m_max; ++m) {
    AggregationInput cont;
    cont.rows = Matrix(n + m, dim);
    for (std::size_t r = 0; r < n; ++r)
      std::copy(clean.rows.row(r), clean.rows.row(r) + dim, cont.rows.row(r));
    if (agg.uses_weights()) {
      cont.weights = clean.weights;
      const double w_inj = 1.0 / std::sqrt(2.0 * static_cast<double>(n + m));
      cont.weights.insert(cont.weights.end(), m, w_inj);
    }

    double prev_delta = 0.0;
    int growth_streak = 0;
    bool diverged = false;
    for (double mag : magnitude_schedule) {
      for (std::size_t r = n; r < n + m; ++r)
        std::fill(cont.rows.row(r), cont.rows.row(r) + dim, mag);
      const std::vector<double> f = aggregate_forward(agg, cont);
      double delta = 0.0;
      for (std::size_t d = 0; d < dim; ++d)
        delta = std::max(delta, std::abs(f[d] - f_clean[d]));
      if (prev_delta > kFloor && delta >= kGrowthRatio * prev_delta) {
        if (++growth_streak >= kConsecutive) {
          diverged = true;
          break;
        }
      } else {
        growth_streak = 0;
      }
      prev_delta = delta;
    }

    if (diverged) {
      report.broke = true;
      report.m_break = m;
      report.empirical_fraction =
          static_cast<double>(m) / static_cast<double>(n + m);
      break;
    }
  }

  const std::size_t n_conv = (agg.kind == AggKind::TrimmedMean)
                                 ? n + (report.broke ? report.m_break : m_max)
                                 : n;
  report.theoretical_fraction = theoretical_breakdown(agg, n_conv);
  return report;
}

}  // namespace robustgcn
