#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lrmfg/core/kernel.hpp"
#include "lrmfg/graphon/cut_norm.hpp"

using namespace lrmfg;

namespace {

KernelMatrix random_signs(std::size_t n, CounterRng& rng) {
  KernelMatrix d(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d(i, j) = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return d;
}

KernelMatrix random_real(std::size_t n, CounterRng& rng) {
  KernelMatrix d(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d(i, j) = 2.0 * rng.uniform() - 1.0;
  return d;
}

// Independent oracle: enumerate every (S, T) pair.
double brute_cut(const KernelMatrix& d) {
  const std::size_t n = d.size();
  double best = 0.0;
  for (std::uint32_t s = 0; s < (1u << n); ++s)
    for (std::uint32_t t = 0; t < (1u << n); ++t) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (s >> i & 1u)
          for (std::size_t j = 0; j < n; ++j)
            if (t >> j & 1u) sum += d(i, j);
      best = std::max(best, std::abs(sum));
    }
  return best / static_cast<double>(n * n);
}

// Independent oracle: enumerate every pair of sign vectors.
double brute_infty_to_one(const KernelMatrix& d) {
  const std::size_t n = d.size();
  double best = -1e300;
  for (std::uint32_t s = 0; s < (1u << n); ++s)
    for (std::uint32_t t = 0; t < (1u << n); ++t) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          sum += d(i, j) * ((s >> i & 1u) ? 1.0 : -1.0) * ((t >> j & 1u) ? 1.0 : -1.0);
      best = std::max(best, sum);
    }
  return best / static_cast<double>(n * n);
}

double witness_value(const KernelMatrix& d, const NormEstimate& e) {
  double s = 0.0;
  for (auto i : e.rows)
    for (auto j : e.cols) s += d(i, j);
  return std::abs(s) / static_cast<double>(d.size() * d.size());
}

}  // namespace

TEST(KernelMatrix, StepValueUsesRightClosedCells) {
  KernelMatrix w(2, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(w.step_value(0.5, 0.5), 1.0);
  EXPECT_EQ(w.step_value(0.51, 0.5), 3.0);
  EXPECT_EQ(w.step_value(0.0, 1.0), 2.0);
  EXPECT_EQ(w.step_value(1.0, 1.0), 4.0);
  EXPECT_THROW(KernelMatrix(2, std::vector<double>{1, 2, 3}), InvalidArgument);
  EXPECT_THROW(KernelMatrix(0), InvalidArgument);
  auto k = Kernel::step(w);
  EXPECT_EQ(k(0.9, 0.1), 3.0);
  EXPECT_EQ(k.bound(), 4.0);
}

TEST(Discretize, Examples) {
  auto c = discretize_kernel(Kernel::constant(0.3), 5);
  for (double v : c.data()) EXPECT_EQ(v, 0.3);
  auto uv = discretize_kernel(Kernel::product(), 2);
  EXPECT_EQ(uv, KernelMatrix(2, std::vector<double>{0.25, 0.5, 0.5, 1.0}));
  auto g = discretize_kernel(Kernel::gaussian(1.0, 0.4), 9);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(g(i, j), g(j, i));
}

TEST(Bernoulli, DegenerateKernels) {
  auto ones = sample_bernoulli_graph(Kernel::constant(1.0), 20, 3);
  for (double v : ones.data()) EXPECT_EQ(v, 1.0);
  auto zeros = sample_bernoulli_graph(Kernel::constant(0.0), 20, 3);
  for (double v : zeros.data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(sample_bernoulli_graph(Kernel::constant(1.5), 4, 0), InvalidArgument);
  EXPECT_THROW(sample_bernoulli_graph(Kernel::bilinear(-0.1, 0.0, 0.0, 0.0), 4, 0), InvalidArgument);
}

TEST(Bernoulli, BinomialConcentration) {
  const std::size_t n = 1000;
  auto w = sample_bernoulli_graph(Kernel::constant(0.5), n, 11);
  // Binomial(n, 1/2) row mean has standard deviation sqrt(1/4 / n).
  const double row_sd = std::sqrt(0.25 / n), grand_sd = std::sqrt(0.25 / (n * n));
  double grand = 0.0;
  std::size_t outside = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : w.row(i)) s += v;
    s /= n;
    grand += s;
    if (std::abs(s - 0.5) > 3.0 * row_sd) ++outside;
  }
  grand /= n;
  EXPECT_NEAR(grand, 0.5, 0.05);
  EXPECT_NEAR(grand, 0.5, 3.0 * grand_sd);
  // P(|Z| > 3) = 0.27%; allow a generous 1%.
  EXPECT_LE(outside, n / 100);
}

TEST(Bernoulli, DeterministicGivenSeed) {
  auto a = sample_bernoulli_graph(Kernel::average(), 64, 5);
  auto b = sample_bernoulli_graph(Kernel::average(), 64, 5);
  auto c = sample_bernoulli_graph(Kernel::average(), 64, 6);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(CutNormExact, Examples) {
  EXPECT_EQ(cut_norm_exact(KernelMatrix(4)).value, 0.0);
  KernelMatrix d(2, std::vector<double>{1, -1, -1, 1});
  auto e = cut_norm_exact(d);
  EXPECT_DOUBLE_EQ(e.value, brute_cut(d));
  EXPECT_DOUBLE_EQ(e.value, 0.25);
  EXPECT_EQ(e.rows, (std::vector<std::size_t>{0}));
  EXPECT_EQ(e.cols, (std::vector<std::size_t>{0}));
  EXPECT_EQ(e.method, NormMethod::Exact);
  EXPECT_THROW(cut_norm_exact(KernelMatrix(kExactNormMaxN + 1)), InvalidArgument);
}

TEST(CutNormExact, MatchesBruteForce) {
  CounterRng rng(1);
  for (int t = 0; t < 30; ++t) {
    std::size_t n = 1 + t % 6;
    auto d = random_real(n, rng);
    auto e = cut_norm_exact(d);
    EXPECT_NEAR(e.value, brute_cut(d), 1e-12);
    EXPECT_NEAR(witness_value(d, e), e.value, 1e-12);
    EXPECT_NEAR(cut_norm_exact(d * -1.0).value, e.value, 1e-12);
  }
}

TEST(CutNormExact, IsASeminorm) {
  CounterRng rng(2);
  for (int t = 0; t < 50; ++t) {
    auto a = random_real(6, rng), b = random_real(6, rng);
    double c = 4.0 * rng.uniform() - 2.0;
    EXPECT_LE(cut_norm_exact(a + b).value, cut_norm_exact(a).value + cut_norm_exact(b).value + 1e-12);
    EXPECT_NEAR(cut_norm_exact(a * c).value, std::abs(c) * cut_norm_exact(a).value, 1e-12);
  }
}

TEST(CutNormHeuristic, LowerBoundAndQuality) {
  EXPECT_EQ(cut_norm_heuristic(KernelMatrix(5), 4, 0).value, 0.0);
  CounterRng rng(3);
  for (int t = 0; t < 100; ++t) {
    std::size_t n = 2 + t % 9;
    auto d = random_signs(n, rng);
    auto exact = cut_norm_exact(d).value;
    auto h = cut_norm_heuristic(d, 16, t);
    EXPECT_LE(h.value, exact + 1e-12);
    EXPECT_GE(h.value, 0.95 * exact);
    EXPECT_EQ(h.method, NormMethod::Heuristic);
    EXPECT_NEAR(witness_value(d, h), h.value, 1e-12);
  }
}

TEST(CutNormHeuristic, MonotoneInRestarts) {
  CounterRng rng(4);
  auto d = random_real(40, rng);
  double prev = 0.0;
  for (std::size_t r = 1; r <= 12; ++r) {
    double v = cut_norm_heuristic(d, r, 77).value;
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(InftyToOne, Examples) {
  EXPECT_EQ(infty_to_one_norm(KernelMatrix(3), NormMethod::Exact).value, 0.0);
  EXPECT_EQ(infty_to_one_norm(KernelMatrix(3), NormMethod::Heuristic).value, 0.0);
  EXPECT_EQ(infty_to_one_norm(KernelMatrix(1, -2.5), NormMethod::Exact).value, 2.5);
  EXPECT_EQ(infty_to_one_norm(KernelMatrix(1, -2.5), NormMethod::Heuristic).value, 2.5);
  EXPECT_THROW(infty_to_one_norm(KernelMatrix(kExactNormMaxN + 1), NormMethod::Exact), InvalidArgument);
}

TEST(InftyToOne, ExactMatchesBruteForceAndSandwich) {
  CounterRng rng(5);
  for (int t = 0; t < 100; ++t) {
    std::size_t n = 1 + t % 6;
    auto d = random_real(n, rng);
    auto e = infty_to_one_norm(d, NormMethod::Exact);
    if (t < 40) {
      EXPECT_NEAR(e.value, brute_infty_to_one(d), 1e-12);
    }
    double cut = cut_norm_exact(d).value;
    EXPECT_LE(cut, e.value + 1e-12);
    EXPECT_LE(e.value, 4.0 * cut + 1e-12);
    auto h = infty_to_one_norm(d, NormMethod::Heuristic, 16, t);
    EXPECT_LE(h.value, e.value + 1e-12);
  }
}

TEST(Graphon, SampleConvergesToKernel) {
  auto k = Kernel::average();
  std::vector<double> small, large;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto ds = sample_bernoulli_graph(k, 16, seed) - discretize_kernel(k, 16);
    auto dl = sample_bernoulli_graph(k, 96, seed) - discretize_kernel(k, 96);
    small.push_back(cut_norm_heuristic(ds, 8, seed).value);
    large.push_back(cut_norm_heuristic(dl, 8, seed).value);
  }
  std::sort(small.begin(), small.end());
  std::sort(large.begin(), large.end());
  EXPECT_LT(large[5], small[5]);
}

TEST(Graphon, DiscretizationGapShrinks) {
  auto k = Kernel::average();
  double coarse = discretization_gap(k, 8, 8, 0).value, fine = discretization_gap(k, 32, 8, 0).value;
  EXPECT_GT(coarse, 0.0);
  EXPECT_LT(fine, coarse);
  EXPECT_EQ(discretization_gap(Kernel::constant(1.0), 8, 4, 0).value, 0.0);
}
