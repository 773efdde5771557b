#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lrmfg/solver/mfg.hpp"
#include "lrmfg/solver/monotonicity.hpp"

using namespace lrmfg;

namespace {

Discretization single_cell(double horizon, std::size_t steps, std::size_t d = 2) {
  return {StateSpace(d), TimeGrid(horizon, steps), PositionAtlas::uniform(1)};
}

// F(x, m, u) = row[x] for every probability m.
InteractionSpec constant_field(std::vector<double> row) {
  const std::size_t d = row.size();
  std::vector<double> f(d * d);
  for (std::size_t x = 0; x < d; ++x)
    for (std::size_t y = 0; y < d; ++y) f[x * d + y] = row[x];
  return interaction::TwoBody{Kernel::constant(1.0), StateMatrix(d, std::move(f))};
}

double riccati(double tau) { return 1.0 / (1.0 + tau / 2.0); }

double riccati_error(std::size_t steps, double horizon, Integrator integ = Integrator::RK4) {
  auto disc = single_cell(horizon, steps);
  auto cost = CostModel::quadratic(2, 1.0);
  MeasureFlow flow(disc.time.points(), 1, 2, 0.5);
  auto v = solve_hjb_backward(cost, interaction::Zero{}, constant_field({0.0, 1.0}), flow, disc, integ);
  double err = 0.0;
  for (std::size_t k = 0; k < disc.time.points(); ++k) {
    err = std::max(err, std::abs(v(k, 0, 0)));
    err = std::max(err, std::abs(v(k, 0, 1) - riccati(horizon - disc.time.time(k))));
  }
  return err;
}

// Independent oracle: discrete-time DP on a fine grid with jump probability
// a * h per step and rates restricted to {0, 0.05, ..., 4}.
std::vector<double> dp_two_state(double theta, std::vector<double> c, std::vector<double> f, std::vector<double> g,
                                 double horizon, std::size_t fine_steps) {
  const double h = horizon / static_cast<double>(fine_steps);
  std::vector<double> v = g, next(2);
  for (std::size_t k = 0; k < fine_steps; ++k) {
    for (std::size_t x = 0; x < 2; ++x) {
      std::size_t y = 1 - x;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i <= 80; ++i) {
        double a = 0.05 * i;
        double val = (0.5 * theta * a * a + c[x] + f[x]) * h + a * h * v[y] + (1.0 - a * h) * v[x];
        best = std::min(best, val);
      }
      next[x] = best;
    }
    v = next;
  }
  return v;
}

}  // namespace

TEST(Hjb, ZeroDataGivesZeroValue) {
  auto disc = single_cell(1.0, 20, 3);
  MeasureFlow flow(21, 1, 3, 1.0 / 3.0);
  auto v = solve_hjb_backward(CostModel::quadratic(3, 1.0), interaction::Zero{}, interaction::Zero{}, flow, disc);
  for (double e : v.data()) EXPECT_EQ(e, 0.0);
}

TEST(Hjb, RiccatiClosedForm) {
  auto disc = single_cell(1.0, 200);
  MeasureFlow flow(201, 1, 2, 0.5);
  auto v = solve_hjb_backward(CostModel::quadratic(2, 1.0), interaction::Zero{}, constant_field({0.0, 1.0}), flow,
                              disc);
  EXPECT_NEAR(v(0, 0, 1), 2.0 / 3.0, 1e-4);
  EXPECT_LE(riccati_error(200, 1.0), 1e-4);
}

TEST(Hjb, FourthOrderConvergence) {
  for (std::size_t n : {10u, 20u, 40u}) {
    double coarse = riccati_error(n, 4.0), fine = riccati_error(2 * n, 4.0);
    EXPECT_GE(coarse / fine, 8.0) << "n=" << n;
  }
}

TEST(Hjb, ImplicitEulerIsFirstOrder) {
  double coarse = riccati_error(50, 1.0, Integrator::ImplicitEuler);
  double fine = riccati_error(100, 1.0, Integrator::ImplicitEuler);
  EXPECT_LT(fine, 1e-2);
  EXPECT_GT(coarse / fine, 1.8);
}

TEST(Hjb, TerminalConditionIsExact) {
  auto disc = Discretization{StateSpace(3), TimeGrid(1.5, 30), PositionAtlas::uniform(4)};
  MeasureFlow flow = random_flow(disc, 9);
  InteractionSpec g = interaction::TwoBody{Kernel::gaussian(0.7, 0.3), StateMatrix(3, {1, 2, 3, 0, -1, 2, 0.5, 0, 1})};
  auto v = solve_hjb_backward(CostModel::quadratic(3, 0.8), g, g, flow, disc);
  CellMeasure last{flow.slice(30), 3, &disc.atlas};
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t x = 0; x < 3; ++x) EXPECT_EQ(v(30, c, x), eval_interaction(g, x, last, disc.atlas.cell(c)));
}

TEST(Hjb, MatchesDynamicProgrammingOracle) {
  struct Case {
    double theta;
    std::vector<double> c, f, g;
  };
  std::vector<Case> cases{{1.0, {0, 0}, {0, 0}, {0, 1}},
                          {1.0, {0.3, 0.0}, {0.5, 0.0}, {0.0, 1.0}},
                          {0.5, {0.0, 0.2}, {0.0, 0.4}, {0.8, 0.0}}};
  for (const auto& cs : cases) {
    auto disc = single_cell(1.0, 3);
    auto cost = CostModel::quadratic(2, AffineProfile{cs.theta, 0.0}, StatePotential::constant(cs.c));
    MeasureFlow flow(4, 1, 2, 0.5);
    auto v = solve_hjb_backward(cost, constant_field(cs.f), constant_field(cs.g), flow, disc);
    auto dp = dp_two_state(cs.theta, cs.c, cs.f, cs.g, 1.0, 4000);
    EXPECT_NEAR(v(0, 0, 0), dp[0], 2e-2);
    EXPECT_NEAR(v(0, 0, 1), dp[1], 2e-2);
  }
}

TEST(Hjb, NonFiniteValueNamesTimeAndCell) {
  CustomCost cc;
  cc.value = [](std::size_t, std::span<const double>, double) { return std::numeric_limits<double>::quiet_NaN(); };
  cc.gradient = [](std::size_t, std::span<const double>, double, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
  };
  cc.argmin = [](std::size_t, std::span<const double>, double, std::span<double> a) {
    std::fill(a.begin(), a.end(), 0.0);
  };
  cc.gamma = 1.0;
  auto disc = Discretization{StateSpace(2), TimeGrid(1.0, 5), PositionAtlas::uniform(2)};
  MeasureFlow flow(6, 2, 2, 0.5);
  try {
    solve_hjb_backward(CostModel::custom(2, cc), interaction::Zero{}, interaction::Zero{}, flow, disc);
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    EXPECT_EQ(e.time_index(), 4u);
    EXPECT_EQ(e.cell(), 0u);
  }
}

TEST(Policy, FromValueExamples) {
  auto atlas = PositionAtlas::uniform(1);
  auto cost = CostModel::quadratic(2, AffineProfile{1.0, 0.0}, StatePotential::constant({3.0, -1.0}));
  ValueField zero(3, 1, 2);
  auto p0 = policy_from_value(cost, zero, atlas);
  for (double r : p0.data()) EXPECT_EQ(r, 0.0);

  ValueField v(3, 1, 2);
  for (std::size_t k = 0; k < 3; ++k) v(k, 0, 1) = 1.0;
  auto p = policy_from_value(cost, v, atlas);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(p(k, 0, 1, 0), 1.0);
    EXPECT_EQ(p(k, 0, 0, 1), 0.0);
    EXPECT_EQ(p(k, 0, 0, 0), 0.0);
    EXPECT_EQ(p(k, 0, 1, 1), 0.0);
  }

  ValueField shifted = v;
  for (std::size_t x = 0; x < 2; ++x) shifted(1, 0, x) += 17.25;
  EXPECT_EQ(policy_from_value(cost, shifted, atlas), p);
}

TEST(Policy, RateCapIsCounted) {
  auto atlas = PositionAtlas::uniform(1);
  ValueField v(2, 1, 2);
  v(0, 0, 1) = v(1, 0, 1) = 50.0;
  std::size_t capped = 0;
  auto p = policy_from_value(CostModel::quadratic(2, 1.0), v, atlas, 10.0, &capped);
  EXPECT_EQ(capped, 2u);
  EXPECT_EQ(p.max_rate(), 10.0);
}

TEST(Kolmogorov, ZeroPolicyKeepsInitial) {
  Policy zero(11, 2, 3);
  InitialDistribution m0{0.2, 0.3, 0.5, 1.0, 0.0, 0.0};
  auto flow = solve_kolmogorov_forward(zero, m0, TimeGrid(1.0, 10));
  for (std::size_t k = 0; k < 11; ++k)
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(flow.slice(k)[i], m0[i]);
}

TEST(Kolmogorov, SymmetricTwoStateClosedForm) {
  const std::size_t n = 100;
  Policy pol(n + 1, 1, 2);
  for (std::size_t k = 0; k <= n; ++k) pol(k, 0, 0, 1) = pol(k, 0, 1, 0) = 1.0;
  auto flow = solve_kolmogorov_forward(pol, {1.0, 0.0}, TimeGrid(1.0, n));
  EXPECT_NEAR(flow(n, 0, 0), 0.5 * (1.0 + std::exp(-2.0)), 1e-6);
  EXPECT_NEAR(flow(n, 0, 0), 0.56767, 1e-5);
  auto ie = solve_kolmogorov_forward(pol, {1.0, 0.0}, TimeGrid(1.0, n), Integrator::ImplicitEuler);
  EXPECT_NEAR(ie(n, 0, 0), 0.5 * (1.0 + std::exp(-2.0)), 5e-3);
}

TEST(Kolmogorov, PermutationEquivariance) {
  CounterRng rng(3);
  const std::size_t d = 3, n = 20;
  Policy pol(n + 1, 1, d), perm_pol(n + 1, 1, d);
  const std::size_t perm[3] = {2, 0, 1};
  for (std::size_t k = 0; k <= n; ++k)
    for (std::size_t x = 0; x < d; ++x)
      for (std::size_t y = 0; y < d; ++y)
        if (x != y) perm_pol(k, 0, perm[x], perm[y]) = pol(k, 0, x, y) = 3.0 * rng.uniform();
  InitialDistribution m0{0.6, 0.3, 0.1}, pm0(3);
  for (std::size_t x = 0; x < d; ++x) pm0[perm[x]] = m0[x];
  auto a = solve_kolmogorov_forward(pol, m0, TimeGrid(1.0, n));
  auto b = solve_kolmogorov_forward(perm_pol, pm0, TimeGrid(1.0, n));
  for (std::size_t k = 0; k <= n; ++k)
    for (std::size_t x = 0; x < d; ++x) EXPECT_NEAR(a(k, 0, x), b(k, 0, perm[x]), 1e-14);
}

TEST(Kolmogorov, MassConservationRandomized) {
  CounterRng rng(4);
  for (std::size_t d : {2u, 3u, 5u})
    for (std::size_t m : {1u, 4u, 16u})
      for (std::size_t n : {50u, 200u})
        for (auto integ : {Integrator::RK4, Integrator::ImplicitEuler}) {
          Policy pol(n + 1, m, d);
          for (std::size_t k = 0; k <= n; ++k)
            for (std::size_t c = 0; c < m; ++c)
              for (std::size_t x = 0; x < d; ++x)
                for (std::size_t y = 0; y < d; ++y)
                  if (x != y) pol(k, c, x, y) = 5.0 * rng.uniform();
          InitialDistribution m0(m * d);
          for (std::size_t c = 0; c < m; ++c) dirichlet_point(rng, std::span<double>(m0.data() + c * d, d));
          auto flow = solve_kolmogorov_forward(pol, m0, TimeGrid(1.0, n), integ);
          EXPECT_TRUE(is_on_simplex(flow, 1e-8, 1e-9)) << d << " " << m << " " << n;
        }
}

TEST(Kolmogorov, RejectsBadInputs) {
  Policy pol(3, 1, 2);
  EXPECT_THROW(solve_kolmogorov_forward(pol, {0.7, 0.7}, TimeGrid(1.0, 2)), InvalidArgument);
  EXPECT_THROW(solve_kolmogorov_forward(pol, {0.5, 0.5}, TimeGrid(1.0, 3)), GridMismatch);
}

TEST(Kolmogorov, StiffRatesReportSimplexViolation) {
  Policy pol(3, 1, 2);
  for (std::size_t k = 0; k < 3; ++k) pol(k, 0, 0, 1) = pol(k, 0, 1, 0) = 1e3;
  EXPECT_THROW(solve_kolmogorov_forward(pol, {1.0, 0.0}, TimeGrid(1.0, 2)), SimplexViolation);
  auto ie = solve_kolmogorov_forward(pol, {1.0, 0.0}, TimeGrid(1.0, 2), Integrator::ImplicitEuler);
  EXPECT_TRUE(is_on_simplex(ie));
}

TEST(SolveMfg, DecoupledConvergesInOneIteration) {
  auto disc = Discretization{StateSpace(2), TimeGrid(1.0, 40), PositionAtlas::uniform(3)};
  auto cost = CostModel::quadratic(2, AffineProfile{1.0, 0.0}, StatePotential::constant({1.0, 0.0}));
  auto res = solve_mfg(cost, interaction::Zero{}, interaction::Zero{}, uniform_initial(3, 2), disc);
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.iterations, 1u);
  ASSERT_EQ(res.residual_history.size(), 1u);
  EXPECT_EQ(res.residual_history[0], 0.0);
}

TEST(SolveMfg, MonotoneLocalInteractionIsUnique) {
  auto disc = single_cell(1.0, 50);
  auto cost = CostModel::quadratic(2, 1.0);
  InteractionSpec f = interaction::Local{StateMatrix::identity(2)};
  InitialDistribution m0{0.8, 0.2};
  std::vector<MeasureFlow> finals;
  for (std::uint64_t seed : {1u, 2u}) {
    SolverConfig cfg;
    cfg.initial_flow = random_flow(disc, seed);
    auto res = solve_mfg(cost, f, interaction::Zero{}, m0, disc, cfg);
    ASSERT_TRUE(res.converged);
    EXPECT_LE(res.residual_history.back(), 1e-6);
    EXPECT_LE(res.iterations, 200u);
    // Postcondition: the returned flow is a fixed point.
    auto br = best_response_map(cost, f, interaction::Zero{}, m0, res.flow, disc, cfg);
    EXPECT_LE(flow_distance(res.flow, br.flow, disc.atlas), cfg.tolerance);
    EXPECT_EQ(br.value, res.value);
    finals.push_back(res.flow);
  }
  EXPECT_LE(flow_distance(finals[0], finals[1], disc.atlas), 1e-4);
}

TEST(SolveMfg, FictitiousPlayAlsoConverges) {
  auto disc = Discretization{StateSpace(2), TimeGrid(1.0, 30), PositionAtlas::uniform(4)};
  InteractionSpec f = interaction::TwoBody{Kernel::gaussian(1.0, 0.3), StateMatrix::identity(2)};
  SolverConfig cfg;
  cfg.scheme = PicardScheme::FictitiousPlay;
  cfg.tolerance = 1e-4;
  cfg.max_iterations = 500;
  auto res = solve_mfg(CostModel::quadratic(2, 1.0), f, interaction::Zero{}, uniform_initial(4, 2), disc, cfg);
  EXPECT_TRUE(res.converged);
}

TEST(SolveMfg, NonConvergenceIsReported) {
  auto disc = single_cell(1.0, 20);
  SolverConfig cfg;
  cfg.max_iterations = 2;
  cfg.tolerance = 1e-14;
  auto res = solve_mfg(CostModel::quadratic(2, 1.0), interaction::Local{StateMatrix::identity(2)},
                       interaction::Zero{}, {0.9, 0.1}, disc, cfg);
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.iterations, 2u);
  EXPECT_EQ(res.residual_history.size(), 2u);
  EXPECT_FALSE(res.warnings.empty());
}

TEST(SolveMfg, ConfigValidation) {
  SolverConfig cfg;
  cfg.damping = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.damping = 1.5;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.damping = 1.0;
  cfg.tolerance = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(PicardMap, ContinuityProbe) {
  // Smoke test with a declared constant, not a theorem.
  constexpr double kC = 50.0;
  auto disc = Discretization{StateSpace(2), TimeGrid(1.0, 40), PositionAtlas::uniform(4)};
  auto cost = CostModel::quadratic(2, 0.5);
  InteractionSpec f = interaction::TwoBody{Kernel::average(), StateMatrix::identity(2)};
  InteractionSpec g = interaction::TwoBody{Kernel::constant(1.0), StateMatrix(2, {0, 1, 1, 0})};
  auto m0 = uniform_initial(4, 2);
  SolverConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto a = random_flow(disc, seed), b = random_flow(disc, seed + 100);
    auto pert = a;
    for (std::size_t i = 0; i < pert.data().size(); ++i) pert.data()[i] = 0.99 * a.data()[i] + 0.01 * b.data()[i];
    double delta = flow_distance(a, pert, disc.atlas);
    auto pa = best_response_map(cost, f, g, m0, a, disc, cfg).flow;
    auto pb = best_response_map(cost, f, g, m0, pert, disc, cfg).flow;
    EXPECT_LE(flow_distance(pa, pb, disc.atlas), kC * delta);
  }
}

TEST(PicardMap, FlowsAreTimeLipschitz) {
  auto disc = Discretization{StateSpace(3), TimeGrid(1.0, 50), PositionAtlas::uniform(3)};
  auto cost = CostModel::quadratic(3, 0.5);
  InteractionSpec g = interaction::TwoBody{Kernel::constant(1.0), StateMatrix(3, {0, 0, 0, 2, 2, 2, 4, 4, 4})};
  auto res = solve_mfg(cost, interaction::Zero{}, g, uniform_initial(3, 3), disc);
  const double lambda = res.policy.max_rate();
  ASSERT_GT(lambda, 0.0);
  for (std::size_t k = 0; k + 1 < disc.time.points(); ++k)
    EXPECT_LE(slice_distance(res.induced_flow.slice(k), res.induced_flow.slice(k + 1), 3, disc.atlas),
              lambda * 3.0 * disc.time.dt());
}

TEST(Monotonicity, Examples) {
  auto atlas = PositionAtlas::uniform(5);
  auto plus = check_monotonicity(interaction::Local{StateMatrix::identity(3)}, atlas, 3, 200, 1);
  EXPECT_TRUE(plus.monotone());
  EXPECT_GE(plus.min_value, 0.0);
  EXPECT_EQ(plus.samples, 200u);

  auto zero = check_monotonicity(interaction::Zero{}, atlas, 3, 50, 1);
  EXPECT_TRUE(zero.monotone());
  EXPECT_EQ(zero.min_value, 0.0);

  auto minus = check_monotonicity(interaction::Local{StateMatrix::identity(3, -1.0)}, atlas, 3, 50, 1);
  ASSERT_FALSE(minus.monotone());
  EXPECT_LT(minus.violation->value, 0.0);
  EXPECT_EQ(minus.violation->sample, 0u);
  EXPECT_NEAR(monotonicity_pairing(interaction::Local{StateMatrix::identity(3, -1.0)}, atlas, 3,
                                   minus.violation->m, minus.violation->m_tilde),
              minus.violation->value, 1e-15);
}

TEST(Monotonicity, PositiveSemidefiniteKernelIsMonotone) {
  auto atlas = PositionAtlas::uniform(6);
  auto rep = check_monotonicity(interaction::TwoBody{Kernel::gaussian(1.0, 0.2), StateMatrix::identity(2)}, atlas, 2,
                                300, 5);
  EXPECT_TRUE(rep.monotone());
}
