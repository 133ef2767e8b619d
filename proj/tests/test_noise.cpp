#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "generators.hpp"
#include "tbdp/noise.hpp"

using namespace tbdp;

TEST_CASE("white-noise process yields constant rows equal to the marginals") {
  NoiseProcessSpec spec;
  spec.rep = NoiseProcessSpec::Rep::white_noise;
  spec.spaces = {FiniteSpace(2), FiniteSpace(2), FiniteSpace(2)};
  spec.marginals = {Distribution({0.5, 0.5}), Distribution({0.3, 0.7}),
                    Distribution({0.9, 0.1})};
  NoiseKernels nk = kernels_from_noise_process(spec);
  CHECK(!nk.zero_probability_rows);
  REQUIRE(nk.kernels.size() == 2);
  StageSpaces s;
  s.controls = {FiniteSpace(2), FiniteSpace(2)};
  s.uncertainties = spec.spaces;
  for (int st = 1; st <= 2; ++st) {
    long long n = s.history_count(st - 1);
    for (long long i = 0; i < n; ++i)
      CHECK(total_variation(nk.kernels[st - 1].row(s, s.history_at(st - 1, i)),
                            spec.marginals[st]) == 0.0);
  }
}

TEST_CASE("perfectly correlated joint gives a Dirac conditional") {
  NoiseProcessSpec spec;
  spec.rep = NoiseProcessSpec::Rep::joint_table;
  spec.spaces = {FiniteSpace(2), FiniteSpace(2)};
  spec.joint = {0.4, 0.0, 0.0, 0.6};  // w_1 == w_0 almost surely
  NoiseKernels nk = kernels_from_noise_process(spec);
  CHECK(!nk.zero_probability_rows);
  StageSpaces s;
  s.controls = {FiniteSpace(1)};
  s.uncertainties = spec.spaces;
  for (int w0 = 0; w0 < 2; ++w0) {
    const Distribution& row = nk.kernels[0].row(s, History(0, {w0}));
    CHECK(row[w0] == doctest::Approx(1.0));
  }
}

TEST_CASE("impossible conditioning paths fall back to uniform and are flagged") {
  NoiseProcessSpec spec;
  spec.rep = NoiseProcessSpec::Rep::joint_table;
  spec.spaces = {FiniteSpace(2), FiniteSpace(2)};
  spec.joint = {0.0, 0.0, 0.5, 0.5};  // w_0 = 0 never happens
  NoiseKernels nk = kernels_from_noise_process(spec);
  CHECK(nk.zero_probability_rows);
  StageSpaces s;
  s.controls = {FiniteSpace(1)};
  s.uncertainties = spec.spaces;
  const Distribution& row = nk.kernels[0].row(s, History(0, {0}));
  CHECK(row[0] == doctest::Approx(0.5));
  CHECK(row[1] == doctest::Approx(0.5));
}

TEST_CASE("noise kernel rows ignore the control part of the history") {
  gen::Rng rng(601);
  for (int it = 0; it < 30; ++it) {
    gen::NoiseInstance inst = gen::make_noise_instance(rng, 3, 2, 2, 0.0);
    const StageSpaces& s = inst.problem.spaces;
    for (int st = 1; st <= s.horizon(); ++st) {
      long long n = s.history_count(st - 1);
      for (long long i = 0; i < n; ++i) {
        History h = s.history_at(st - 1, i);
        History permuted = h;
        bool changed = false;
        for (size_t k = 1; k < permuted.entries.size(); k += 2) {
          int size = s.control_size(static_cast<int>(k / 2));
          if (size > 1) {
            permuted.entries[k] = (permuted.entries[k] + 1) % size;
            changed = true;
          }
        }
        if (!changed) continue;
        CHECK(total_variation(inst.problem.kernel(st).row(s, h),
                              inst.problem.kernel(st).row(s, permuted)) ==
              0.0);
      }
    }
  }
}

TEST_CASE("adapted oracle degenerate cases") {
  gen::Rng rng(607);

  // Deterministic noise: the oracle is the open-loop minimum.
  {
    StageSpaces s;
    s.controls = {FiniteSpace(2), FiniteSpace(2)};
    s.uncertainties = {FiniteSpace(1), FiniteSpace(1), FiniteSpace(1)};
    std::vector<Cost> j = {Cost(5), Cost(2), Cost(9), Cost(4)};
    NoiseProcessSpec spec;
    spec.rep = NoiseProcessSpec::Rep::white_noise;
    spec.spaces = s.uncertainties;
    spec.marginals = {Distribution({1.0}), Distribution({1.0}),
                      Distribution({1.0})};
    ProblemSpec p{s, kernels_from_noise_process(spec).kernels,
                  Criterion::from_table(j)};
    // Open-loop minimum over the 4 control sequences.
    CHECK(adapted_value_oracle(0, History(0, {0}), p).value() ==
          doctest::Approx(2.0));
  }

  // Single remaining stage: min over controls of the conditional expectation.
  {
    StageSpaces s;
    s.controls = {FiniteSpace(2)};
    s.uncertainties = {FiniteSpace(1), FiniteSpace(2)};
    NoiseProcessSpec spec;
    spec.rep = NoiseProcessSpec::Rep::white_noise;
    spec.spaces = s.uncertainties;
    spec.marginals = {Distribution({1.0}), Distribution({0.25, 0.75})};
    std::vector<Cost> j = {Cost(4), Cost(0), Cost(1), Cost(2)};  // (u, w)
    ProblemSpec p{s, kernels_from_noise_process(spec).kernels,
                  Criterion::from_table(j)};
    // u=0: 0.25*4 = 1; u=1: 0.25*1 + 0.75*2 = 1.75.
    CHECK(adapted_value_oracle(0, History(0, {0}), p).value() ==
          doctest::Approx(1.0));
  }
}

TEST_CASE("adapted oracle equals the history DP on noise-driven problems") {
  gen::Rng rng(613);
  for (int it = 0; it < 30; ++it) {
    gen::NoiseInstance inst = gen::make_noise_instance(rng, 3, 2, 2, 0.1);
    auto vfs = solve_history_dp(inst.problem);
    const StageSpaces& s = inst.problem.spaces;
    for (int t = 0; t <= s.horizon(); ++t) {
      long long n = s.history_count(t);
      for (long long i = 0; i < n; ++i)
        CHECK(cost_gap(vfs[t].values[i],
                       adapted_value_oracle(t, s.history_at(t, i),
                                            inst.problem)) <= 1e-9);
    }
  }
}

TEST_CASE("white-noise DP equals the unit-block solver") {
  gen::Rng rng(617);
  for (int it = 0; it < 25; ++it) {
    StageSpaces s = gen::random_spaces(rng, 3, 2, 2);
    gen::ChainInstance chain = gen::make_chain(rng, s, 3, true);
    // Re-express the criterion in final-state form for the direct solver.
    ProblemSpec p{s, chain.problem.kernels,
                  Criterion::from_final_state(
                      chain.unit.theta.back().table,
                      chain.unit.theta.back().state_space.size,
                      chain.reduced_criterion)};
    auto direct = solve_white_noise_dp(p, chain.unit, WhiteNoiseMode::final_cost);
    ReducedSolve unit =
        solve_unit_block_dp(chain.problem, chain.unit, chain.reduced_criterion);
    for (size_t t = 0; t < direct.size(); ++t)
      for (size_t x = 0; x < direct[t].values.size(); ++x)
        CHECK(cost_gap(direct[t].values[x],
                       unit.boundary_values[t].values[x]) == 0.0);
  }
}

TEST_CASE("white-noise DP rejects non-white kernels and bad theta_0") {
  gen::Rng rng(619);
  StageSpaces s = gen::random_spaces(rng, 2, 2, 2);
  while (s.uncertainty_size(0) < 2)  // a collapsed theta_0 must be detectable
    s = gen::random_spaces(rng, 2, 2, 2);
  gen::ChainInstance white = gen::make_chain(rng, s, 2, true);
  ProblemSpec p{s, white.problem.kernels,
                Criterion::from_final_state(
                    white.unit.theta.back().table,
                    white.unit.theta.back().state_space.size,
                    white.reduced_criterion)};
  // Dirac marginals stay legal (deterministic DP).
  std::vector<StochasticKernel> dirac;
  for (int st = 1; st <= s.horizon(); ++st)
    dirac.push_back(
        StochasticKernel::white(st, Distribution::dirac(
                                        s.uncertainty_size(st), 0)));
  ProblemSpec pd = p;
  pd.kernels = dirac;
  auto solved = solve_white_noise_dp(pd, white.unit, WhiteNoiseMode::final_cost);
  CHECK(solved.size() == static_cast<size_t>(s.horizon()) + 1);

  // A markov kernel is rejected.
  ProblemSpec bad = p;
  std::vector<Distribution> rows;
  for (int i = 0; i < s.uncertainty_size(0); ++i)
    rows.push_back(gen::random_distribution(rng, s.uncertainty_size(1)));
  bad.kernels[0] = StochasticKernel::markov(1, rows);
  CHECK_THROWS_AS(solve_white_noise_dp(bad, white.unit,
                                       WhiteNoiseMode::final_cost),
                  SolverError);

  // theta_0 must be the identity on W_0.
  gen::ChainInstance other = white;
  for (int& x : other.unit.theta[0].table) x = 0;
  CHECK_THROWS_AS(solve_white_noise_dp(p, other.unit,
                                       WhiteNoiseMode::final_cost),
                  SolverError);
}

TEST_CASE("additive white-noise DP and its degenerate equivalences") {
  gen::Rng rng(631);
  for (int it = 0; it < 25; ++it) {
    StageSpaces s = gen::random_spaces(rng, 3, 2, 2);
    gen::ChainInstance chain = gen::make_chain(rng, s, 3, true);
    Criterion add;
    add.rep = Criterion::Rep::additive;
    for (int t = 0; t <= s.horizon(); ++t) {
      add.theta.push_back(chain.unit.theta[t].table);
      add.state_sizes.push_back(chain.unit.theta[t].state_space.size);
    }
    bool zero_stage = it % 2 == 0;
    for (int t = 0; t < s.horizon(); ++t) {
      long long n = static_cast<long long>(add.state_sizes[t]) *
                    s.control_size(t) * s.uncertainty_size(t + 1);
      add.stage_costs.push_back(zero_stage
                                    ? std::vector<Cost>(n, Cost(0.0))
                                    : gen::random_costs(rng, n, 0.05));
    }
    add.final_cost = chain.reduced_criterion;
    ProblemSpec p{s, chain.problem.kernels, add};
    auto direct = solve_white_noise_dp(p, chain.unit, WhiteNoiseMode::additive);
    ReducedSolve additive = solve_additive_dp(p, chain.unit);
    for (size_t t = 0; t < direct.size(); ++t)
      for (size_t x = 0; x < direct[t].values.size(); ++x)
        CHECK(cost_gap(direct[t].values[x],
                       additive.boundary_values[t].values[x]) <= 1e-12);
    if (zero_stage) {
      // L == 0: additive mode equals final-cost mode on K.
      ProblemSpec fp{s, chain.problem.kernels,
                     Criterion::from_final_state(
                         chain.unit.theta.back().table,
                         chain.unit.theta.back().state_space.size,
                         chain.reduced_criterion)};
      auto final_mode =
          solve_white_noise_dp(fp, chain.unit, WhiteNoiseMode::final_cost);
      for (size_t t = 0; t < direct.size(); ++t)
        for (size_t x = 0; x < direct[t].values.size(); ++x)
          CHECK(cost_gap(direct[t].values[x], final_mode[t].values[x]) <=
                1e-12);
    }
  }
}

TEST_CASE("day-independent slow-scale solve matches the generic block solver") {
  gen::Rng rng(641);
  for (int it = 0; it < 15; ++it) {
    gen::NoiseTwoScale ts = gen::make_noise_two_scale(rng, 2, 1);
    ReducedSolve adapted = solve_white_noise_2ts(ts.problem, ts.spec,
                                                 ts.reduction,
                                                 ts.reduced_criterion);
    ReducedSolve generic =
        solve_two_timescale(ts.problem, ts.reduction, ts.reduced_criterion);
    for (size_t d = 0; d < adapted.boundary_values.size(); ++d)
      for (size_t x = 0; x < adapted.boundary_values[d].values.size(); ++x)
        CHECK(cost_gap(adapted.boundary_values[d].values[x],
                       generic.boundary_values[d].values[x]) <= 1e-9);
  }
}

TEST_CASE("day-independent slow-scale solve matches the flat history DP") {
  gen::Rng rng(643);
  for (int it = 0; it < 15; ++it) {
    gen::NoiseTwoScale ts = gen::make_noise_two_scale(rng, 1, 1);
    ReducedSolve adapted = solve_white_noise_2ts(ts.problem, ts.spec,
                                                 ts.reduction,
                                                 ts.reduced_criterion);
    auto vfs = solve_history_dp(ts.problem.flat);
    const StageSpaces& s = ts.problem.flat.spaces;
    for (int d = 0; d <= ts.problem.clock.days + 1; ++d) {
      int t = ts.problem.clock.lex_index(d, 0);
      for (long long i = 0; i < s.history_count(t); ++i)
        CHECK(cost_gap(vfs[t].values[i],
                       adapted.boundary_values[d]
                           .values[ts.reduction.theta[d].table[i]]) <= 1e-9);
    }
  }
}

TEST_CASE("joint tables are accepted when they factor across days") {
  gen::Rng rng(647);
  gen::NoiseTwoScale ts = gen::make_noise_two_scale(rng, 1, 1, 2, 2);
  // Build the equivalent joint table by multiplying the blocks.
  NoiseProcessSpec joint;
  joint.rep = NoiseProcessSpec::Rep::joint_table;
  joint.spaces = ts.spec.spaces;
  long long paths = joint.path_count();
  const TwoScaleClock& clock = ts.spec.clock;
  for (long long path = 0; path < paths; ++path) {
    // Decode the path into per-stage coordinates (most significant first).
    std::vector<int> coords(joint.spaces.size());
    long long rest = path;
    for (int i = static_cast<int>(coords.size()) - 1; i >= 0; --i) {
      coords[i] = static_cast<int>(rest % joint.spaces[i].size);
      rest /= joint.spaces[i].size;
    }
    double prob = ts.spec.marginals[0][coords[0]];
    for (int d = 0; d <= clock.days; ++d) {
      long long block_index = 0;
      for (int m = 1; m <= clock.minutes + 1; ++m) {
        int stage = d * (clock.minutes + 1) + m;
        block_index =
            block_index * joint.spaces[stage].size + coords[stage];
      }
      prob *= ts.spec.day_joint[d][block_index];
    }
    joint.joint.push_back(prob);
  }
  ReducedSolve from_blocks = solve_white_noise_2ts(ts.problem, ts.spec,
                                                   ts.reduction,
                                                   ts.reduced_criterion);
  ReducedSolve from_joint = solve_white_noise_2ts(ts.problem, joint,
                                                  ts.reduction,
                                                  ts.reduced_criterion);
  for (size_t d = 0; d < from_blocks.boundary_values.size(); ++d)
    for (size_t x = 0; x < from_blocks.boundary_values[d].values.size(); ++x)
      CHECK(cost_gap(from_blocks.boundary_values[d].values[x],
                     from_joint.boundary_values[d].values[x]) <= 1e-9);
}

TEST_CASE("cross-day correlation is rejected as an independence violation") {
  // Two days, one minute each would blow up; keep M=0, D=1: stages 0..2 with
  // day blocks {w_1} and {w_2}, then correlate w_2 with w_1.
  TwoScaleClock clock{1, 0};
  StageSpaces s;
  s.controls = {FiniteSpace(1), FiniteSpace(1)};
  s.uncertainties = {FiniteSpace(1), FiniteSpace(2), FiniteSpace(2)};
  NoiseProcessSpec joint;
  joint.rep = NoiseProcessSpec::Rep::joint_table;
  joint.spaces = s.uncertainties;
  joint.joint = {0.5, 0.0, 0.0, 0.5};  // w_2 == w_1: not day-independent
  ProblemSpec flat{s, kernels_from_noise_process(joint).kernels,
                   Criterion::from_table(
                       std::vector<Cost>(s.history_count(2), Cost(0.0)))};
  TwoScaleProblem p = make_two_scale_problem(clock, flat);
  BlockSchedule schedule = day_boundary_schedule(clock);
  Reduction canonical = Reduction::canonical(s, schedule);
  std::vector<Cost> reduced(s.history_count(2), Cost(0.0));
  CHECK_THROWS_AS(
      solve_white_noise_2ts(p, joint, canonical, reduced), SolverError);
}

TEST_CASE("white-noise head/tail recursion matches solve_dhd") {
  gen::Rng rng(653);
  for (int it = 0; it < 25; ++it) {
    gen::DhdChain chain = gen::make_dhd_chain(rng, 3, 2, 3, true);
    auto direct = solve_white_noise_dhd(chain.problem, chain.reduction,
                                        chain.reduced_criterion);
    auto generic =
        solve_dhd(chain.problem, chain.reduction, chain.reduced_criterion);
    for (size_t s = 0; s < direct.size(); ++s)
      for (size_t x = 0; x < direct[s].values.size(); ++x)
        CHECK(cost_gap(direct[s].values[x], generic[s].values[x]) <= 1e-9);
  }
}

TEST_CASE("white-noise head/tail recursion on the dam") {
  gen::DamParams params = gen::dam_params(2, 2);
  DamDhd dam = build_dam_dhd(params);
  auto direct = solve_white_noise_dhd(dam.problem, dam.reduction,
                                      dam.reduced_criterion);
  auto generic = solve_dhd(dam.problem, dam.reduction, dam.reduced_criterion);
  for (size_t s = 0; s < direct.size(); ++s)
    for (size_t x = 0; x < direct[s].values.size(); ++x)
      CHECK(cost_gap(direct[s].values[x], generic[s].values[x]) <= 1e-9);

  // Dirac inflows: deterministic two-decision recursion still agrees.
  gen::DamParams det = params;
  for (Distribution& d : det.inflows) d = Distribution::dirac(2, 1);
  DamDhd dam2 = build_dam_dhd(det);
  auto d2 = solve_white_noise_dhd(dam2.problem, dam2.reduction,
                                  dam2.reduced_criterion);
  auto g2 = solve_dhd(dam2.problem, dam2.reduction, dam2.reduced_criterion);
  for (size_t s = 0; s < d2.size(); ++s)
    for (size_t x = 0; x < d2[s].values.size(); ++x)
      CHECK(cost_gap(d2[s].values[x], g2[s].values[x]) <= 1e-9);
}
