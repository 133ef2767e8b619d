#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "generators.hpp"
#include "tbdp/dhd.hpp"
#include "tbdp/noise.hpp"
#include "tbdp/reduction.hpp"

using namespace tbdp;

namespace {

StageSpaces spaces_222() {
  StageSpaces s;
  s.controls = {FiniteSpace(2), FiniteSpace(2)};
  s.uncertainties = {FiniteSpace(2), FiniteSpace(2), FiniteSpace(2)};
  return s;
}

ProblemSpec white_uniform_222(std::vector<Cost> j) {
  StageSpaces s = spaces_222();
  return ProblemSpec{s,
                     {StochasticKernel::white(1, Distribution::uniform(2)),
                      StochasticKernel::white(2, Distribution::uniform(2))},
                     Criterion::from_table(std::move(j))};
}

// Wraps an additive (or any) criterion problem as an equivalent full-table
// instance so the plain history DP can serve as the reference.
ProblemSpec as_full_table(const ProblemSpec& p) {
  long long n = p.spaces.history_count(p.horizon());
  std::vector<Cost> full;
  full.reserve(n);
  for (long long i = 0; i < n; ++i)
    full.push_back(p.criterion_value(p.spaces.history_at(p.horizon(), i)));
  return ProblemSpec{p.spaces, p.kernels, Criterion::from_table(std::move(full))};
}

}  // namespace

TEST_CASE("check_state_reduction accepts the canonical reduction") {
  gen::Rng rng(307);
  for (int it = 0; it < 20; ++it) {
    ProblemSpec p = gen::random_problem(rng, 3, 2, 2, 0.0);
    BlockSchedule schedule = gen::random_schedule(rng, p.horizon());
    Reduction canonical = Reduction::canonical(p.spaces, schedule);
    CHECK(!check_state_reduction(canonical, schedule, p).has_value());
  }
}

TEST_CASE("check_state_reduction rejects a collapsing theta with injective f") {
  // theta_1 constant while theta_0 is the identity and f is injective in the
  // state: commutation cannot hold on a 2-point uncertainty space.
  StageSpaces s;
  s.controls = {FiniteSpace(1)};
  s.uncertainties = {FiniteSpace(2), FiniteSpace(1)};
  ProblemSpec p{s,
                {StochasticKernel::white(1, Distribution({1.0}))},
                Criterion::from_table(std::vector<Cost>{Cost(0), Cost(0)})};
  BlockSchedule schedule{{0, 1}};
  Reduction r;
  r.theta.push_back(ReductionMap::identity(s, 0));
  ReductionMap collapse;
  collapse.stage = 1;
  collapse.state_space = FiniteSpace(2);
  collapse.table = {0, 0};
  r.theta.push_back(collapse);
  r.dynamics = {{0, 1}};  // f(x, seg) = x, injective in x
  auto ce = check_state_reduction(r, schedule, p);
  REQUIRE(ce.has_value());
  CHECK(ce->block == 0);
  CHECK(ce->history_index == 1);  // first violation in lexicographic order
}

TEST_CASE("dam stock reduction commutes on a 2-period instance") {
  gen::DamParams params = gen::dam_params(2, 2);
  DamFlat dam = build_dam_flat(params);
  BlockSchedule unit = BlockSchedule::unit(dam.problem.horizon());
  Reduction r = dam.reduction.as_reduction(dam.problem.spaces);
  CHECK(!check_state_reduction(r, unit, dam.problem).has_value());
  // Also across a single them-spanning block.
  BlockSchedule single{{0, dam.problem.horizon()}};
  Reduction coarse = Reduction::from_maps(
      dam.problem.spaces, single,
      {dam.reduction.theta.front(), dam.reduction.theta.back()});
  CHECK(!check_state_reduction(coarse, single, dam.problem).has_value());
}

TEST_CASE("derive_reduced_kernels on white noise yields the stage rows") {
  gen::Rng rng(331);
  StageSpaces s = spaces_222();
  Distribution rows[2] = {Distribution({0.25, 0.75}), Distribution({0.6, 0.4})};
  ProblemSpec p{s,
                {StochasticKernel::white(1, rows[0]),
                 StochasticKernel::white(2, rows[1])},
                Criterion::from_table(
                    std::vector<Cost>(s.history_count(2), Cost(0.0)))};
  BlockSchedule schedule{{0, 2}};
  // Any reduction passes kernel grouping under white noise; use a random one
  // that still commutes (constant maps always commute with constant f).
  Reduction r;
  ReductionMap c0{0, FiniteSpace(1), std::vector<int>(s.history_count(0), 0)};
  ReductionMap c2{2, FiniteSpace(1), std::vector<int>(s.history_count(2), 0)};
  r = Reduction::from_maps(s, schedule, {c0, c2});
  auto derived = derive_reduced_kernels(r, schedule, p);
  REQUIRE(derived.ok());
  for (int k = 0; k < 2; ++k)
    for (const Distribution& row : derived.kernels->rows[0][k])
      CHECK(total_variation(row, rows[k]) <= 1e-12);
  (void)rng;
}

TEST_CASE("derive_reduced_kernels flags a w0-dependent kernel under a w0-blind theta") {
  StageSpaces s;
  s.controls = {FiniteSpace(1)};
  s.uncertainties = {FiniteSpace(2), FiniteSpace(2)};
  std::vector<Distribution> rows = {Distribution({1.0, 0.0}),
                                    Distribution({0.0, 1.0})};
  ProblemSpec p{s,
                {StochasticKernel::full(1, rows)},
                Criterion::from_table(
                    std::vector<Cost>(s.history_count(1), Cost(0.0)))};
  BlockSchedule schedule{{0, 1}};
  ReductionMap c0{0, FiniteSpace(1), {0, 0}};  // discards w_0
  ReductionMap c1{1, FiniteSpace(1), std::vector<int>(s.history_count(1), 0)};
  Reduction r = Reduction::from_maps(s, schedule, {c0, c1});
  CHECK(!check_state_reduction(r, schedule, p).has_value());
  auto derived = derive_reduced_kernels(r, schedule, p);
  REQUIRE(!derived.ok());
  // The violating pair differs only in w_0.
  History a = s.history_at(0, derived.counterexample->history_index);
  History b = s.history_at(0, derived.counterexample->other_history_index);
  CHECK(a.entries[0] != b.entries[0]);
}

TEST_CASE("markov kernel is compatible with the last-uncertainty theta") {
  StageSpaces s = spaces_222();
  std::vector<Distribution> m1 = {Distribution({0.2, 0.8}),
                                  Distribution({0.9, 0.1})};
  ProblemSpec p{s,
                {StochasticKernel::markov(1, m1),
                 StochasticKernel::markov(2, m1)},
                Criterion::from_table(
                    std::vector<Cost>(s.history_count(2), Cost(0.0)))};
  BlockSchedule unit = BlockSchedule::unit(2);
  std::vector<ReductionMap> maps;
  for (int t = 0; t <= 2; ++t)
    maps.push_back(ReductionMap::last_uncertainty(s, t));
  Reduction r = Reduction::from_maps(s, unit, maps);
  CHECK(!check_state_reduction(r, unit, p).has_value());
  auto derived = derive_reduced_kernels(r, unit, p);
  REQUIRE(derived.ok());
  for (int block = 0; block < 2; ++block)
    for (int x = 0; x < 2; ++x)
      CHECK(total_variation(derived.kernels->rows[block][0][x], m1[x]) <=
            1e-12);
}

TEST_CASE("solve_reduced_dp single block with identity theta_0 equals history DP") {
  gen::Rng rng(349);
  for (int it = 0; it < 20; ++it) {
    StageSpaces s = spaces_222();
    gen::ChainInstance chain = gen::make_chain(rng, s, 3, false);
    BlockSchedule single{{0, 2}};
    Reduction r = gen::chain_reduction(chain, single);
    ReducedSolve solve = solve_reduced_dp(chain.problem, single, r,
                                          chain.reduced_criterion);
    auto vfs = solve_history_dp(chain.problem);
    for (long long i = 0; i < s.history_count(0); ++i)
      CHECK(cost_gap(vfs[0].values[i],
                     solve.boundary_values[0].values[r.theta[0].table[i]]) <=
            1e-9);
  }
}

TEST_CASE("canonical unit reduction reproduces the history DP exactly") {
  gen::Rng rng(353);
  for (int it = 0; it < 15; ++it) {
    ProblemSpec p = gen::random_problem(rng, 3, 2, 2, 0.1);
    BlockSchedule unit = BlockSchedule::unit(p.horizon());
    Reduction canonical = Reduction::canonical(p.spaces, unit);
    std::vector<Cost> j;
    for (long long i = 0; i < p.spaces.history_count(p.horizon()); ++i)
      j.push_back(p.criterion_value(p.spaces.history_at(p.horizon(), i)));
    ReducedSolve solve = solve_reduced_dp(p, unit, canonical, j);
    auto vfs = solve_history_dp(p);
    for (int t = 0; t <= p.horizon(); ++t)
      for (size_t i = 0; i < vfs[t].values.size(); ++i)
        CHECK(cost_gap(vfs[t].values[i],
                       solve.boundary_values[t].values[i]) == 0.0);
  }
}

TEST_CASE("controlled-Markov lifting across multi-stage blocks") {
  gen::Rng rng(359);
  for (int it = 0; it < 25; ++it) {
    StageSpaces s = gen::random_spaces(rng, 4, 2, 2);
    gen::ChainInstance chain = gen::make_chain(rng, s, 3, false);
    BlockSchedule schedule = gen::random_schedule(rng, s.horizon(), 2);
    Reduction r = gen::chain_reduction(chain, schedule);
    REQUIRE(!check_state_reduction(r, schedule, chain.problem).has_value());
    ReducedSolve solve =
        solve_reduced_dp(chain.problem, schedule, r, chain.reduced_criterion);
    auto vfs = solve_history_dp(chain.problem);
    for (size_t b = 0; b < schedule.boundaries.size(); ++b) {
      int t = schedule.boundaries[b];
      for (long long i = 0; i < s.history_count(t); ++i)
        CHECK(cost_gap(vfs[t].values[i],
                       solve.boundary_values[b].values[r.theta[b].table[i]]) <=
              1e-9);
    }
  }
}

TEST_CASE("criterion factorization failure reports a witness") {
  StageSpaces s;
  s.controls = {FiniteSpace(1)};
  s.uncertainties = {FiniteSpace(1), FiniteSpace(2)};
  ProblemSpec p{s,
                {StochasticKernel::white(1, Distribution::uniform(2))},
                Criterion::from_table(std::vector<Cost>{Cost(1), Cost(2)})};
  BlockSchedule schedule{{0, 1}};
  ReductionMap c0{0, FiniteSpace(1), {0}};
  ReductionMap c1{1, FiniteSpace(1), {0, 0}};  // merges histories with j=1, j=2
  Reduction r = Reduction::from_maps(s, schedule, {c0, c1});
  std::vector<Cost> reduced = {Cost(1)};
  CHECK_THROWS_AS(solve_reduced_dp(p, schedule, r, reduced), SolverError);
}

TEST_CASE("operator intertwining through theta") {
  gen::Rng rng(367);
  for (int it = 0; it < 25; ++it) {
    StageSpaces s = gen::random_spaces(rng, 4, 2, 2);
    gen::ChainInstance chain = gen::make_chain(rng, s, 3, false);
    BlockSchedule schedule = gen::random_schedule(rng, s.horizon(), 3);
    Reduction r = gen::chain_reduction(chain, schedule);
    auto derived = derive_reduced_kernels(r, schedule, chain.problem);
    REQUIRE(derived.ok());
    int block = gen::pick(rng, 0, schedule.blocks() - 1);
    int lo = schedule.boundaries[block], hi = schedule.boundaries[block + 1];
    // Random reduced phi over X_hi.
    std::vector<Cost> phi_tilde =
        gen::random_costs(rng, r.theta[block + 1].state_space.size, 0.1);
    // Reduced route: one block application, then lift through theta_lo.
    std::vector<Cost> reduced_out = apply_reduced_block(
        chain.problem, r, schedule, block, *derived.kernels, phi_tilde);
    // Flat route: lift through theta_hi, then compose flat operators.
    ValueFunction lifted;
    lifted.stage = hi;
    for (long long i = 0; i < s.history_count(hi); ++i)
      lifted.values.push_back(phi_tilde[r.theta[block + 1].table[i]]);
    ValueFunction flat = compose_bellman(lo, hi, lifted, chain.problem);
    for (long long i = 0; i < s.history_count(lo); ++i)
      CHECK(cost_gap(flat.values[i], reduced_out[r.theta[block].table[i]]) <=
            1e-9);
  }
}

TEST_CASE("schedule refinement preserves boundary values") {
  gen::Rng rng(373);
  for (int it = 0; it < 20; ++it) {
    StageSpaces s = gen::random_spaces(rng, 4, 2, 2);
    gen::ChainInstance chain = gen::make_chain(rng, s, 3, false);
    BlockSchedule coarse = gen::random_schedule(rng, s.horizon(), 3);
    BlockSchedule fine = BlockSchedule::unit(s.horizon());
    Reduction rc = gen::chain_reduction(chain, coarse);
    Reduction rf = gen::chain_reduction(chain, fine);
    ReducedSolve sc =
        solve_reduced_dp(chain.problem, coarse, rc, chain.reduced_criterion);
    ReducedSolve sf =
        solve_reduced_dp(chain.problem, fine, rf, chain.reduced_criterion);
    for (size_t b = 0; b < coarse.boundaries.size(); ++b) {
      int t = coarse.boundaries[b];
      for (size_t x = 0; x < sc.boundary_values[b].values.size(); ++x)
        CHECK(cost_gap(sc.boundary_values[b].values[x],
                       sf.boundary_values[t].values[x]) <= 1e-9);
    }
  }
}

TEST_CASE("solve_unit_block_dp equals the unit-schedule block solver") {
  gen::Rng rng(379);
  for (int it = 0; it < 25; ++it) {
    StageSpaces s = gen::random_spaces(rng, 4, 2, 2);
    gen::ChainInstance chain = gen::make_chain(rng, s, 3, false);
    ReducedSolve unit =
        solve_unit_block_dp(chain.problem, chain.unit, chain.reduced_criterion);
    BlockSchedule fine = BlockSchedule::unit(s.horizon());
    Reduction rf = gen::chain_reduction(chain, fine);
    ReducedSolve blocks =
        solve_reduced_dp(chain.problem, fine, rf, chain.reduced_criterion);
    for (size_t t = 0; t < unit.boundary_values.size(); ++t)
      for (size_t x = 0; x < unit.boundary_values[t].values.size(); ++x)
        CHECK(cost_gap(unit.boundary_values[t].values[x],
                       blocks.boundary_values[t].values[x]) == 0.0);
  }
}

TEST_CASE("unit-block DP matches the brute-force oracle through theta") {
  gen::Rng rng(383);
  for (int it = 0; it < 15; ++it) {
    StageSpaces s;
    s.controls = {FiniteSpace(2), FiniteSpace(2), FiniteSpace(2)};
    s.uncertainties = {FiniteSpace(2), FiniteSpace(2), FiniteSpace(2),
                       FiniteSpace(2)};
    gen::ChainInstance chain = gen::make_chain(rng, s, 2, true);
    ReducedSolve solve =
        solve_unit_block_dp(chain.problem, chain.unit, chain.reduced_criterion);
    for (long long i = 0; i < s.history_count(0); ++i) {
      Cost oracle = brute_force_value(0, s.history_at(0, i), chain.problem);
      CHECK(cost_gap(oracle, solve.boundary_values[0]
                                 .values[chain.unit.theta[0].table[i]]) <=
            1e-9);
    }
  }
}

TEST_CASE("solve_additive_dp pinned degenerate cases") {
  // K == 0, L == 1 per stage: expected cost-to-go is the stage count left.
  StageSpaces s = spaces_222();
  Criterion add;
  add.rep = Criterion::Rep::additive;
  UnitReduction unit;
  for (int t = 0; t <= 2; ++t) {
    ReductionMap id{t, FiniteSpace(1),
                    std::vector<int>(s.history_count(t), 0)};
    unit.theta.push_back(id);
    add.theta.push_back(id.table);
    add.state_sizes.push_back(1);
  }
  for (int t = 0; t < 2; ++t) {
    unit.dynamics.push_back(std::vector<int>(4, 0));
    add.stage_costs.push_back(std::vector<Cost>(4, Cost(1.0)));
  }
  add.final_cost = {Cost(0.0)};
  ProblemSpec p{s,
                {StochasticKernel::white(1, Distribution::uniform(2)),
                 StochasticKernel::white(2, Distribution::uniform(2))},
                add};
  ReducedSolve solve = solve_additive_dp(p, unit);
  for (int t = 0; t <= 2; ++t)
    CHECK(solve.boundary_values[t].values[0].value() ==
          doctest::Approx(2.0 - t));

  // Non-additive criterion is a representation error.
  ProblemSpec full = as_full_table(p);
  CHECK_THROWS_AS(solve_additive_dp(full, unit), SolverError);
}

TEST_CASE("solve_additive_dp with zero stage costs reduces to unit-block DP") {
  gen::Rng rng(389);
  for (int it = 0; it < 20; ++it) {
    StageSpaces s = gen::random_spaces(rng, 3, 2, 2);
    gen::ChainInstance chain = gen::make_chain(rng, s, 3, false);
    Criterion add;
    add.rep = Criterion::Rep::additive;
    for (int t = 0; t <= s.horizon(); ++t) {
      add.theta.push_back(chain.unit.theta[t].table);
      add.state_sizes.push_back(chain.unit.theta[t].state_space.size);
    }
    for (int t = 0; t < s.horizon(); ++t) {
      long long n = static_cast<long long>(add.state_sizes[t]) *
                    s.control_size(t) * s.uncertainty_size(t + 1);
      add.stage_costs.push_back(std::vector<Cost>(n, Cost(0.0)));
    }
    add.final_cost = chain.reduced_criterion;
    ProblemSpec p{s, chain.problem.kernels, add};
    ReducedSolve additive = solve_additive_dp(p, chain.unit);
    ReducedSolve unit =
        solve_unit_block_dp(chain.problem, chain.unit, chain.reduced_criterion);
    for (size_t t = 0; t < additive.boundary_values.size(); ++t)
      for (size_t x = 0; x < additive.boundary_values[t].values.size(); ++x)
        CHECK(cost_gap(additive.boundary_values[t].values[x],
                       unit.boundary_values[t].values[x]) <= 1e-12);
  }
}

TEST_CASE("additive DP agrees with the history DP on the wrapped criterion") {
  gen::Rng rng(397);
  for (int it = 0; it < 20; ++it) {
    StageSpaces s = gen::random_spaces(rng, 3, 2, 2);
    gen::ChainInstance chain = gen::make_chain(rng, s, 3, false);
    Criterion add;
    add.rep = Criterion::Rep::additive;
    for (int t = 0; t <= s.horizon(); ++t) {
      add.theta.push_back(chain.unit.theta[t].table);
      add.state_sizes.push_back(chain.unit.theta[t].state_space.size);
    }
    for (int t = 0; t < s.horizon(); ++t) {
      long long n = static_cast<long long>(add.state_sizes[t]) *
                    s.control_size(t) * s.uncertainty_size(t + 1);
      add.stage_costs.push_back(gen::random_costs(rng, n, 0.05));
    }
    add.final_cost = gen::random_costs(rng, add.state_sizes.back(), 0.05);
    ProblemSpec p{s, chain.problem.kernels, add};
    ReducedSolve additive = solve_additive_dp(p, chain.unit);
    auto vfs = solve_history_dp(as_full_table(p));
    // V_t(h_t) = (realized costs so far) + V^_t(theta_t(h_t)); at t = 0 the
    // realized part vanishes.
    for (long long i = 0; i < s.history_count(0); ++i)
      CHECK(cost_gap(vfs[0].values[i],
                     additive.boundary_values[0]
                         .values[chain.unit.theta[0].table[i]]) <= 1e-9);
    // Spot-check the factorization identity at a later stage.
    int t = s.horizon();
    for (long long i = 0; i < s.history_count(t); ++i) {
      History h = s.history_at(t, i);
      Cost realized(0.0);
      for (int k = 0; k < t; ++k) {
        auto [prefix, rest] = s.split(h, k);
        realized += p.stage_cost(k, add.theta[k][s.index_of(prefix)],
                                 h.entries[2 * k + 1], h.entries[2 * k + 2]);
      }
      CHECK(cost_gap(vfs[t].values[i],
                     realized + additive.boundary_values[t]
                                    .values[chain.unit.theta[t].table[i]]) <=
            1e-9);
    }
  }
}

TEST_CASE("unreached states carry infinite value") {
  StageSpaces s;
  s.controls = {FiniteSpace(1)};
  s.uncertainties = {FiniteSpace(1), FiniteSpace(1)};
  ProblemSpec p{s,
                {StochasticKernel::white(1, Distribution({1.0}))},
                Criterion::from_table(std::vector<Cost>{Cost(3.0)})};
  BlockSchedule schedule{{0, 1}};
  // Two declared states, only state 0 in the image of theta.
  ReductionMap t0{0, FiniteSpace(2), {0}};
  ReductionMap t1{1, FiniteSpace(2), {0}};
  Reduction r = Reduction::from_maps(s, schedule, {t0, t1});
  std::vector<Cost> reduced = {Cost(3.0), Cost(7.0)};
  ReducedSolve solve = solve_reduced_dp(p, schedule, r, reduced);
  CHECK(solve.boundary_values[0].values[0].value() == doctest::Approx(3.0));
  CHECK(solve.boundary_values[0].values[1].is_inf());
}
