#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "robustgcn/aggregators.hpp"
#include "support/test_support.hpp"

using namespace robustgcn;
using namespace robustgcn::testsup;

namespace {

AggregationInput column(std::vector<double> vals, std::vector<double> weights = {}) {
  AggregationInput in;
  in.rows = Matrix(vals.size(), 1);
  for (std::size_t i = 0; i < vals.size(); ++i) in.rows.at(i, 0) = vals[i];
  in.weights = std::move(weights);
  return in;
}

const std::vector<double> kSchedule{1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8};

/// Dyadic rationals (multiples of 2^-10, bounded) add exactly in doubles.
double dyadic(Rng& rng) {
  return (static_cast<double>(rng.below(2048)) - 1024.0) / 1024.0;
}

}  // namespace

TEST_CASE("input validation") {
  AggregationInput empty;
  CHECK_THROWS_AS(weighted_mean_forward(empty), std::invalid_argument);
  CHECK_THROWS_AS(median_forward(empty), std::invalid_argument);

  auto in = column({1.0, 2.0});
  CHECK_THROWS_AS(weighted_mean_forward(in), std::invalid_argument);  // no weights
  in.weights = {0.5};
  CHECK_THROWS_AS(weighted_mean_forward(in), std::invalid_argument);  // count mismatch
  in.weights = {0.5, -0.5};
  CHECK_THROWS_AS(weighted_mean_forward(in), std::invalid_argument);  // nonpositive

  auto ok = column({1.0, 2.0}, {0.5, 0.5});
  std::vector<double> bad_upstream{1.0, 2.0};
  CHECK_THROWS_AS(weighted_mean_backward(ok, bad_upstream), std::invalid_argument);
  CHECK_THROWS_AS(trimmed_mean_forward(ok, 0.6), std::invalid_argument);
  CHECK_THROWS_AS(trimmed_mean_forward(ok, 0.0), std::invalid_argument);
}

TEST_CASE("weighted mean forward") {
  SUBCASE("single row with weight 1 is the row") {
    auto out = weighted_mean_forward(column({3.5}, {1.0}));
    CHECK(out[0] == doctest::Approx(3.5));
  }
  SUBCASE("[1],[3] with weights .5/.5 -> [2]") {
    auto out = weighted_mean_forward(column({1.0, 3.0}, {0.5, 0.5}));
    CHECK(out[0] == doctest::Approx(2.0));
  }
  SUBCASE("no renormalization: weights need not sum to 1") {
    auto out = weighted_mean_forward(column({1.0, 3.0}, {2.0, 2.0}));
    CHECK(out[0] == doctest::Approx(8.0));  // outside [1,3]
  }
}

TEST_CASE("weighted mean linearity in an injected row is exact") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    const std::size_t dim = 1 + rng.below(4);
    AggregationInput clean;
    clean.rows = Matrix(n, dim);
    for (double& v : clean.rows.data) v = dyadic(rng);
    for (std::size_t i = 0; i < n; ++i)
      clean.weights.push_back(
          std::ldexp(static_cast<double>(1 + rng.below(64)), -6));  // dyadic > 0

    AggregationInput with_x = clean;
    with_x.rows = Matrix(n + 1, dim);
    std::copy(clean.rows.data.begin(), clean.rows.data.end(), with_x.rows.data.begin());
    std::vector<double> x(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      x[d] = dyadic(rng);
      with_x.rows.at(n, d) = x[d];
    }
    const double wx = std::ldexp(static_cast<double>(1 + rng.below(64)), -6);
    with_x.weights.push_back(wx);

    auto f0 = weighted_mean_forward(clean);
    auto f1 = weighted_mean_forward(with_x);
    for (std::size_t d = 0; d < dim; ++d) CHECK(f1[d] - f0[d] == wx * x[d]);  // exact
  }
}

TEST_CASE("median forward") {
  SUBCASE("odd: [3,1,2] -> 2") {
    CHECK(median_forward(column({3, 1, 2}))[0] == doctest::Approx(2.0));
  }
  SUBCASE("even: [1,2,3,4] -> 2.5") {
    CHECK(median_forward(column({1, 2, 3, 4}))[0] == doctest::Approx(2.5));
  }
  SUBCASE("element-wise over rows [1,10],[2,20],[9,0] -> [2,10]") {
    AggregationInput in;
    in.rows = Matrix(3, 2);
    in.rows.at(0, 0) = 1; in.rows.at(0, 1) = 10;
    in.rows.at(1, 0) = 2; in.rows.at(1, 1) = 20;
    in.rows.at(2, 0) = 9; in.rows.at(2, 1) = 0;
    auto out = median_forward(in);
    CHECK(out[0] == doctest::Approx(2.0));
    CHECK(out[1] == doctest::Approx(10.0));
  }
  SUBCASE("matches the sort oracle on random input") {
    Rng rng(55);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng.below(9), dim = 1 + rng.below(5);
      AggregationInput in;
      in.rows = random_matrix(rng, n, dim);
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; i < n; ++i)
        rows.emplace_back(in.rows.row(i), in.rows.row(i) + dim);
      CHECK(median_forward(in) == sort_oracle_stat(rows, AggKind::Median, 0.0));
    }
  }
}

TEST_CASE("trimmed mean forward") {
  SUBCASE("[1,2,3,4,100] alpha=.2 -> 3") {
    CHECK(trimmed_mean_forward(column({1, 2, 3, 4, 100}), 0.2)[0] ==
          doctest::Approx(3.0));
  }
  SUBCASE("floor(n*alpha)=0 reduces to the plain mean") {
    auto in = column({1, 5, 6, 2});  // n=4, alpha=0.2 -> trim 0
    CHECK(trimmed_mean_forward(in, 0.2)[0] == doctest::Approx(3.5));
  }
  SUBCASE("n=9 alpha=0.45 keeps exactly the median element") {
    Rng rng(66);
    for (int trial = 0; trial < 20; ++trial) {
      AggregationInput in;
      in.rows = random_matrix(rng, 9, 3);
      auto tm = trimmed_mean_forward(in, 0.45);
      auto med = median_forward(in);
      CHECK(tm == med);
    }
  }
  SUBCASE("matches the sort oracle on random input") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng.below(10), dim = 1 + rng.below(4);
      const double alpha = rng.uniform(0.05, 0.49);
      AggregationInput in;
      in.rows = random_matrix(rng, n, dim);
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; i < n; ++i)
        rows.emplace_back(in.rows.row(i), in.rows.row(i) + dim);
      CHECK(trimmed_mean_forward(in, alpha) ==
            sort_oracle_stat(rows, AggKind::TrimmedMean, alpha));
    }
  }
}

TEST_CASE("backward routing rules") {
  SUBCASE("weighted mean: zero upstream -> zero grads; w=1 single row passes through") {
    auto in = column({4.0}, {1.0});
    std::vector<double> up{2.5};
    Matrix g = weighted_mean_backward(in, up);
    CHECK(g.at(0, 0) == doctest::Approx(2.5));
    std::vector<double> zero{0.0};
    Matrix gz = weighted_mean_backward(in, zero);
    CHECK(gz.at(0, 0) == 0.0);
  }
  SUBCASE("median odd: [3,1,2] routes everything to the middle value's row") {
    auto in = column({3, 1, 2});
    std::vector<double> up{1.5};
    Matrix g = median_backward(in, up);
    CHECK(g.at(0, 0) == 0.0);
    CHECK(g.at(1, 0) == 0.0);
    CHECK(g.at(2, 0) == doctest::Approx(1.5));
  }
  SUBCASE("median even: [1,2,3,4] splits 0.5/0.5 to rows of 2 and 3") {
    auto in = column({1, 2, 3, 4});
    std::vector<double> up{1.0};
    Matrix g = median_backward(in, up);
    CHECK(g.at(0, 0) == 0.0);
    CHECK(g.at(1, 0) == doctest::Approx(0.5));
    CHECK(g.at(2, 0) == doctest::Approx(0.5));
    CHECK(g.at(3, 0) == 0.0);
  }
  SUBCASE("trimmed mean: [1,2,3,4,100] alpha=.2 -> (0,g/3,g/3,g/3,0)") {
    auto in = column({1, 2, 3, 4, 100});
    std::vector<double> up{3.0};
    Matrix g = trimmed_mean_backward(in, 0.2, up);
    CHECK(g.at(0, 0) == 0.0);
    CHECK(g.at(1, 0) == doctest::Approx(1.0));
    CHECK(g.at(2, 0) == doctest::Approx(1.0));
    CHECK(g.at(3, 0) == doctest::Approx(1.0));
    CHECK(g.at(4, 0) == 0.0);
  }
  SUBCASE("median tie rule: equal values route by original row order") {
    auto in = column({2, 2, 2});
    std::vector<double> up{1.0};
    Matrix g = median_backward(in, up);
    CHECK(g.at(0, 0) == 0.0);
    CHECK(g.at(1, 0) == doctest::Approx(1.0));  // middle sorted position
    CHECK(g.at(2, 0) == 0.0);
  }
  SUBCASE("trimmed mean tie rule: all-equal rows route to stable-sort survivors") {
    auto in = column({7, 7, 7, 7, 7});
    std::vector<double> up{1.0};
    Matrix g = trimmed_mean_backward(in, 0.2, up);  // trim 1 each side
    CHECK(g.at(0, 0) == 0.0);                        // first sorted position trimmed
    CHECK(g.at(1, 0) == doctest::Approx(1.0 / 3));
    CHECK(g.at(2, 0) == doctest::Approx(1.0 / 3));
    CHECK(g.at(3, 0) == doctest::Approx(1.0 / 3));
    CHECK(g.at(4, 0) == 0.0);
  }
}

TEST_CASE("backward matches central finite differences on tie-free input") {
  Rng rng(202);
  auto check_agg = [&](const Aggregation& agg, int trials) {
    for (int t = 0; t < trials; ++t) {
      const std::size_t n = 2 + rng.below(7), dim = 1 + rng.below(4);
      AggregationInput in;
      in.rows = tie_free_matrix(rng, n, dim);
      if (agg.uses_weights())
        for (std::size_t i = 0; i < n; ++i) in.weights.push_back(rng.uniform(0.1, 1.5));
      std::vector<double> up(dim);
      for (double& u : up) u = rng.uniform(-1.0, 1.0);

      Matrix analytic = aggregate_backward(agg, in, up);
      auto eval = [&] {
        auto out = aggregate_forward(agg, in);
        double s = 0.0;
        for (std::size_t d = 0; d < dim; ++d) s += up[d] * out[d];
        return s;
      };
      Matrix fd = fd_gradient(eval, in.rows);
      CHECK(grads_close(analytic, fd));
    }
  };
  check_agg({AggKind::WeightedMean, 0.45}, 25);
  check_agg({AggKind::Median, 0.45}, 25);
  check_agg({AggKind::TrimmedMean, 0.2}, 25);
  check_agg({AggKind::TrimmedMean, 0.45}, 25);
}

TEST_CASE("permutation invariance") {
  Rng rng(303);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(8), dim = 1 + rng.below(4);
    AggregationInput in;
    in.rows = random_matrix(rng, n, dim);
    for (std::size_t i = 0; i < n; ++i) in.weights.push_back(rng.uniform(0.1, 2.0));

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    AggregationInput permuted;
    permuted.rows = Matrix(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(in.rows.row(perm[i]), in.rows.row(perm[i]) + dim, permuted.rows.row(i));
      permuted.weights.push_back(in.weights[perm[i]]);
    }

    auto m0 = weighted_mean_forward(in);
    auto m1 = weighted_mean_forward(permuted);
    for (std::size_t d = 0; d < dim; ++d)
      CHECK(m0[d] == doctest::Approx(m1[d]).epsilon(1e-12));
    CHECK(median_forward(in) == median_forward(permuted));  // order stats: exact
    CHECK(trimmed_mean_forward(in, 0.3) == trimmed_mean_forward(permuted, 0.3));
  }
}

TEST_CASE("range boundedness of order statistics; weighted mean can escape") {
  Rng rng(404);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(9), dim = 1 + rng.below(4);
    AggregationInput in;
    in.rows = random_matrix(rng, n, dim, -5.0, 5.0);
    auto med = median_forward(in);
    auto tm = trimmed_mean_forward(in, 0.3);
    for (std::size_t d = 0; d < dim; ++d) {
      double lo = in.rows.at(0, d), hi = lo;
      for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, in.rows.at(i, d));
        hi = std::max(hi, in.rows.at(i, d));
      }
      CHECK(med[d] >= lo);
      CHECK(med[d] <= hi);
      CHECK(tm[d] >= lo);
      CHECK(tm[d] <= hi);
    }
  }
  // weights (2,2) push the output outside [min,max]
  auto escape = weighted_mean_forward(column({1.0, 3.0}, {2.0, 2.0}));
  CHECK(escape[0] > 3.0);
}

TEST_CASE("contamination bounds") {
  Rng rng(505);
  SUBCASE("median stays in the clean range for any m < n injections") {
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 2 + rng.below(8);
      const std::size_t m = 1 + rng.below(n - 1);  // m < n
      AggregationInput cont;
      cont.rows = Matrix(n + m, 1);
      double lo = 1e300, hi = -1e300;
      for (std::size_t i = 0; i < n; ++i) {
        cont.rows.at(i, 0) = rng.uniform(-3.0, 3.0);
        lo = std::min(lo, cont.rows.at(i, 0));
        hi = std::max(hi, cont.rows.at(i, 0));
      }
      for (std::size_t i = n; i < n + m; ++i)
        cont.rows.at(i, 0) = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.below(9));
      auto out = median_forward(cont);
      CHECK(out[0] >= lo);
      CHECK(out[0] <= hi);
    }
  }
  SUBCASE("trimmed mean stays in the clean range for m <= floor(n*alpha)") {
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n_total = 4 + rng.below(10);
      const double alpha = rng.uniform(0.1, 0.49);
      const auto trim =
          static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n_total)));
      if (trim == 0) continue;
      const std::size_t m = 1 + rng.below(trim);  // m <= floor(n*alpha)
      const std::size_t n_clean = n_total - m;
      AggregationInput cont;
      cont.rows = Matrix(n_total, 1);
      double lo = 1e300, hi = -1e300;
      for (std::size_t i = 0; i < n_clean; ++i) {
        cont.rows.at(i, 0) = rng.uniform(-3.0, 3.0);
        lo = std::min(lo, cont.rows.at(i, 0));
        hi = std::max(hi, cont.rows.at(i, 0));
      }
      for (std::size_t i = n_clean; i < n_total; ++i)
        cont.rows.at(i, 0) = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.below(9));
      auto out = trimmed_mean_forward(cont, alpha);
      CHECK(out[0] >= lo);
      CHECK(out[0] <= hi);
    }
  }
}

TEST_CASE("sparse order-stat kernel matches the dense sort oracle") {
  // random sparse rows with negatives and explicit zeros over an implicit-zero
  // background
  Rng rng(606);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    const std::uint32_t dim = 2 + static_cast<std::uint32_t>(rng.below(6));
    std::vector<std::vector<std::uint32_t>> idx(n);
    std::vector<std::vector<double>> val(n);
    std::vector<std::vector<double>> dense(n, std::vector<double>(dim, 0.0));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::uint32_t d = 0; d < dim; ++d) {
        const double roll = rng.uniform01();
        if (roll < 0.5) continue;  // implicit zero
        double v = rng.uniform(-2.0, 2.0);
        if (roll < 0.6) v = 0.0;  // explicit zero entry
        idx[r].push_back(d);
        val[r].push_back(v);
        dense[r][d] = v;
      }
    }
    std::vector<std::span<const std::uint32_t>> ridx(idx.begin(), idx.end());
    std::vector<std::span<const double>> rval(val.begin(), val.end());

    for (const Aggregation agg : {Aggregation{AggKind::Median, 0.45},
                                  Aggregation{AggKind::TrimmedMean, 0.3}}) {
      std::vector<std::uint32_t> oi;
      std::vector<double> ov;
      kernels::order_stat_sparse(ridx, rval, n, agg.kind, agg.alpha, oi, ov);
      std::vector<double> got(dim, 0.0);
      for (std::size_t k = 0; k < oi.size(); ++k) got[oi[k]] = ov[k];
      const auto want = sort_oracle_stat(dense, agg.kind, agg.alpha);
      for (std::uint32_t d = 0; d < dim; ++d) CHECK(got[d] == want[d]);
    }
  }
}

TEST_CASE("theoretical breakdown points") {
  CHECK(theoretical_breakdown({AggKind::WeightedMean, 0.45}, 4) == doctest::Approx(0.2));
  CHECK(theoretical_breakdown({AggKind::Median, 0.45}, 3) == doctest::Approx(0.5));
  CHECK(theoretical_breakdown({AggKind::Median, 0.45}, 100) == doctest::Approx(0.5));
  CHECK(theoretical_breakdown({AggKind::TrimmedMean, 0.2}, 10) == doctest::Approx(0.3));
}

TEST_CASE("empirical breakdown") {
  SUBCASE("weighted mean breaks at m=1, fraction 1/6 for n=5") {
    auto in = column({0.1, 0.2, 0.3, 0.4, 0.5}, {0.2, 0.2, 0.2, 0.2, 0.2});
    auto r = empirical_breakdown({AggKind::WeightedMean, 0.45}, in, kSchedule, 5);
    REQUIRE(r.broke);
    CHECK(r.m_break == 1);
    CHECK(r.empirical_fraction == 1.0 / 6.0);
    CHECK(r.empirical_fraction == r.theoretical_fraction);
  }
  SUBCASE("median: no break with m_max=4, breaks at m=5 with m_max=5") {
    auto in = column({0.1, 0.2, 0.3, 0.4, 0.5});
    auto r4 = empirical_breakdown({AggKind::Median, 0.45}, in, kSchedule, 4);
    CHECK_FALSE(r4.broke);
    auto r5 = empirical_breakdown({AggKind::Median, 0.45}, in, kSchedule, 5);
    REQUIRE(r5.broke);
    CHECK(r5.m_break == 5);
    CHECK(r5.empirical_fraction == 0.5);
  }
  SUBCASE("trimmed mean alpha=.2, clean size 10 breaks at m=3") {
    AggregationInput in;
    in.rows = Matrix(10, 1);
    for (int i = 0; i < 10; ++i) in.rows.at(i, 0) = 0.1 * (i + 1);
    auto r = empirical_breakdown({AggKind::TrimmedMean, 0.2}, in, kSchedule, 10);
    REQUIRE(r.broke);
    CHECK(r.m_break == 3);
    // total-size convention: fraction matches the formula at n = 13
    CHECK(r.empirical_fraction == r.theoretical_fraction);
    CHECK(r.theoretical_fraction ==
          theoretical_breakdown({AggKind::TrimmedMean, 0.2}, 13));
  }
  SUBCASE("schedule must be increasing") {
    auto in = column({1, 2, 3});
    std::vector<double> bad{1e2, 1e2, 1e3};
    CHECK_THROWS_AS(empirical_breakdown({AggKind::Median, 0.45}, in, bad, 2),
                    std::invalid_argument);
  }
}
