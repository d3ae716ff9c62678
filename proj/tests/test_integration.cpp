#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "cpdoc/integration/losses.hpp"
#include "cpdoc/integration/subgoals.hpp"
#include "support/finite_diff.hpp"

using namespace cpdoc;

namespace {

AgentHyper unit_temp() {
  AgentHyper hy;
  hy.temperature = 1.0;
  return hy;
}

// Adjusted Rand index between two labelings (oracle for the clustering test).
double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b) {
  const int n = static_cast<int>(a.size());
  std::map<std::pair<int, int>, long> joint;
  std::map<int, long> ra, rb;
  for (int i = 0; i < n; ++i) {
    ++joint[{a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i)]}];
    ++ra[a[static_cast<std::size_t>(i)]];
    ++rb[b[static_cast<std::size_t>(i)]];
  }
  const auto c2 = [](long m) { return 0.5 * m * (m - 1); };
  double sij = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [k, v] : joint) sij += c2(v);
  for (const auto& [k, v] : ra) sa += c2(v);
  for (const auto& [k, v] : rb) sb += c2(v);
  const double total = c2(n);
  const double expected = sa * sb / total;
  const double maxi = 0.5 * (sa + sb);
  if (maxi == expected) return 1.0;
  return (sij - expected) / (maxi - expected);
}

}  // namespace

TEST_CASE("sharpening keeps the fixed point and steepens elsewhere") {
  for (double tau : {0.2, 0.5, 1.0, 3.0})
    REQUIRE_THAT(sharpen(0.5, tau), Catch::Matchers::WithinAbs(0.5, 1e-12));
  REQUIRE_THAT(sharpen(0.3, 1.0), Catch::Matchers::WithinAbs(0.3, 1e-9));
  REQUIRE_THAT(sharpen(0.8, 1.0), Catch::Matchers::WithinAbs(0.8, 1e-9));
  REQUIRE(sharpen(0.7, 0.05) > 0.999);
  REQUIRE(sharpen(0.3, 0.05) < 0.001);
  REQUIRE(sharpen(0.7, 0.5) > 0.7);   // above the fixed point moves up
  REQUIRE(sharpen(0.3, 0.5) < 0.3);   // below moves down
  REQUIRE(sharpen(0.7, 3.0) < 0.7);   // high temperature flattens instead
  REQUIRE_THROWS_AS(sharpen(0.5, 0.0), ConfigError);
  REQUIRE_THROWS_AS(sharpen(0.5, -1.0), ConfigError);
}

TEST_CASE("boundary neighborhoods upweight nearby steps") {
  std::vector<double> p(12, 0.1);
  SECTION("quiet probabilities leave uniform weights") {
    const std::vector<double> w = boundary_weights(p, 0.6, 2, 1.0);
    for (double v : w) REQUIRE(v == 1.0);
  }
  SECTION("one boundary doubles weights within its radius") {
    p[6] = 0.9;
    const std::vector<double> w = boundary_weights(p, 0.6, 2, 1.0);
    for (int t = 0; t < 12; ++t) {
      if (t >= 4 && t <= 8) REQUIRE(w[static_cast<std::size_t>(t)] == 2.0);
      else REQUIRE(w[static_cast<std::size_t>(t)] == 1.0);
    }
  }
  SECTION("edge boundaries clip their neighborhood") {
    p[0] = 0.95;
    const std::vector<double> w = boundary_weights(p, 0.6, 2, 0.5);
    REQUIRE(w[0] == 1.5);
    REQUIRE(w[2] == 1.5);
    REQUIRE(w[3] == 1.0);
  }
}

TEST_CASE("termination supervision at the uninformative fixed point") {
  OptionCriticAgent agent(2, 3, 5, unit_temp());
  std::vector<FeatureVec> feats;
  std::vector<int> options;
  std::vector<double> p;
  for (int t = 0; t < 6; ++t) {
    feats.push_back(FeatureVec::one_hot(5, t % 5));
    options.push_back(t % 2);
    p.push_back(0.5);
  }
  TerminationSupervisionConfig cfg;
  cfg.tau = 1.0;
  cfg.lr = 0.0;
  const auto res = termination_supervision(agent, feats, options, p, cfg);
  REQUIRE_THAT(res.loss, Catch::Matchers::WithinAbs(std::log(2.0), 1e-9));
  REQUIRE_THAT(res.grad_norm, Catch::Matchers::WithinAbs(0.0, 1e-12));

  std::vector<double> short_p(3, 0.5);
  REQUIRE_THROWS_AS(termination_supervision(agent, feats, options, short_p, cfg), UsageError);
}

TEST_CASE("termination supervision vanishes when predictions meet targets") {
  OptionCriticAgent agent(1, 2, 3, unit_temp());
  agent.termination[0].weights() = {20.0, 20.0, 20.0};  // beta ~ 1 everywhere
  std::vector<FeatureVec> feats = {FeatureVec::one_hot(3, 0), FeatureVec::one_hot(3, 1)};
  std::vector<int> options = {0, 0};
  std::vector<double> p = {0.999999, 0.999999};  // sharpened targets pin to ~1
  TerminationSupervisionConfig cfg;
  const auto res = termination_supervision(agent, feats, options, p, cfg);
  REQUIRE(res.loss < 1e-4);
}

TEST_CASE("termination supervision gradient matches finite differences") {
  const int dim = 4;
  OptionCriticAgent agent(2, 3, dim, unit_temp());
  Rng rng(17);
  for (auto& nu : agent.termination)
    for (double& w : nu.weights()) w = rng.uniform(-1.0, 1.0);

  std::vector<FeatureVec> feats;
  std::vector<int> options;
  std::vector<double> p;
  for (int t = 0; t < 9; ++t) {
    feats.push_back(FeatureVec::one_hot(dim, t % dim));
    options.push_back(t % 2);
    p.push_back(rng.uniform(0.05, 0.95));
  }
  TerminationSupervisionConfig cfg;
  cfg.lr = 0.0;

  const auto eval = [&]() {
    return termination_supervision(agent, feats, options, p, cfg).loss;
  };

  // analytic gradient read back from the applied step at lr = 1, lambda = 1
  OptionCriticAgent stepped = agent;
  TerminationSupervisionConfig up = cfg;
  up.lr = 1.0;
  up.lambda_beta = 1.0;
  termination_supervision(stepped, feats, options, p, up);

  const double h = 1e-6;
  for (int opt = 0; opt < 2; ++opt)
    for (int i = 0; i < dim; ++i) {
      double& w = agent.termination[static_cast<std::size_t>(opt)].weights()[static_cast<std::size_t>(i)];
      const double saved = w;
      w = saved + h;
      const double fp = eval();
      w = saved - h;
      const double fm = eval();
      w = saved;
      const double fd = (fp - fm) / (2.0 * h);
      const double analytic =
          saved - stepped.termination[static_cast<std::size_t>(opt)].weights()[static_cast<std::size_t>(i)];
      if (std::abs(fd) < 1e-9) {
        REQUIRE(std::abs(analytic) < 1e-9);
      } else {
        REQUIRE_THAT(analytic, Catch::Matchers::WithinRel(fd, 1e-5));
      }
    }

  // nothing but termination weights moves
  for (int opt = 0; opt < 2; ++opt)
    for (int a = 0; a < 3; ++a)
      for (int i = 0; i < dim; ++i) {
        REQUIRE(stepped.intra[static_cast<std::size_t>(opt)][static_cast<std::size_t>(a)]
                    .weights()[static_cast<std::size_t>(i)] ==
                agent.intra[static_cast<std::size_t>(opt)][static_cast<std::size_t>(a)]
                    .weights()[static_cast<std::size_t>(i)]);
        REQUIRE(stepped.q_u[static_cast<std::size_t>(opt)][static_cast<std::size_t>(a)]
                    .weights()[static_cast<std::size_t>(i)] ==
                agent.q_u[static_cast<std::size_t>(opt)][static_cast<std::size_t>(a)]
                    .weights()[static_cast<std::size_t>(i)]);
      }
}

TEST_CASE("boundary upweighting scales exactly the nearby losses") {
  OptionCriticAgent agent(1, 2, 3, unit_temp());
  agent.termination[0].weights() = {0.4, -0.3, 0.2};
  std::vector<FeatureVec> feats = {FeatureVec::one_hot(3, 0), FeatureVec::one_hot(3, 1),
                                   FeatureVec::one_hot(3, 2)};
  std::vector<int> options = {0, 0, 0};
  std::vector<double> p = {0.1, 0.9, 0.1};  // boundary at t=1 covers all three steps

  TerminationSupervisionConfig flat;
  flat.alpha_w = 0.0;
  TerminationSupervisionConfig up;
  up.alpha_w = 1.0;
  const double l0 = termination_supervision(agent, feats, options, p, flat).loss;
  const double l1 = termination_supervision(agent, feats, options, p, up).loss;
  REQUIRE_THAT(l1, Catch::Matchers::WithinRel(2.0 * l0, 1e-12));
}

TEST_CASE("segment pooling is a mean") {
  const Embedding a = {1.0, 2.0}, b = {3.0, 6.0}, c = {5.0, 4.0};
  SECTION("identical states pool to themselves") {
    const Embedding u = pool_segment({a, a, a});
    REQUIRE(u == a);
  }
  SECTION("permutation invariance") {
    REQUIRE(pool_segment({a, b, c}) == pool_segment({c, a, b}));
  }
  SECTION("size-weighted merge equals pooling the union") {
    const Embedding left = pool_segment({a, b});
    const Embedding right = pool_segment({c});
    Embedding merged(2);
    for (std::size_t i = 0; i < 2; ++i) merged[i] = (2.0 * left[i] + 1.0 * right[i]) / 3.0;
    const Embedding whole = pool_segment({a, b, c});
    for (std::size_t i = 0; i < 2; ++i)
      REQUIRE_THAT(merged[i], Catch::Matchers::WithinAbs(whole[i], 1e-12));
  }
  SECTION("empty segment is rejected") {
    REQUIRE_THROWS_AS(pool_segment({}), UsageError);
  }
}

TEST_CASE("k-means recovers well-separated clouds") {
  Rng rng(5);
  std::vector<Embedding> pts;
  std::vector<int> truth;
  const double centers[3][2] = {{0, 0}, {6, 0}, {0, 6}};
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 8; ++i) {
      pts.push_back({centers[k][0] + 0.05 * rng.normal(), centers[k][1] + 0.05 * rng.normal()});
      truth.push_back(k);
    }
  const ClusterResult cr = cluster_segments(pts, 3, rng);
  REQUIRE(cr.ok);
  REQUIRE(cr.prototypes.size() == 3);
  REQUIRE_THAT(adjusted_rand(cr.assignment, truth), Catch::Matchers::WithinAbs(1.0, 1e-12));
  for (const Embedding& c : cr.prototypes)
    for (double v : c) REQUIRE(std::isfinite(v));
}

TEST_CASE("k-means degenerate and edge cases") {
  SECTION("K=1 gives the global mean") {
    Rng rng(6);
    const std::vector<Embedding> pts = {{1, 1}, {3, 5}, {2, 0}};
    const ClusterResult cr = cluster_segments(pts, 1, rng);
    REQUIRE(cr.ok);
    REQUIRE_THAT(cr.prototypes[0][0], Catch::Matchers::WithinAbs(2.0, 1e-12));
    REQUIRE_THAT(cr.prototypes[0][1], Catch::Matchers::WithinAbs(2.0, 1e-12));
  }
  SECTION("duplicates share a cluster") {
    Rng rng(7);
    const std::vector<Embedding> pts = {{1, 1}, {1, 1}, {1, 1}, {9, 9}, {9, 9}};
    const ClusterResult cr = cluster_segments(pts, 2, rng);
    REQUIRE(cr.ok);
    REQUIRE(cr.assignment[0] == cr.assignment[1]);
    REQUIRE(cr.assignment[1] == cr.assignment[2]);
    REQUIRE(cr.assignment[3] == cr.assignment[4]);
    REQUIRE(cr.assignment[0] != cr.assignment[3]);
  }
  SECTION("fewer points than clusters defers") {
    Rng rng(8);
    const ClusterResult cr = cluster_segments({{1, 1}}, 2, rng);
    REQUIRE_FALSE(cr.ok);
  }
  SECTION("seeded determinism") {
    std::vector<Embedding> pts;
    Rng gen(9);
    for (int i = 0; i < 20; ++i) pts.push_back({gen.uniform(0, 10), gen.uniform(0, 10)});
    Rng r1(11), r2(11);
    const ClusterResult a = cluster_segments(pts, 4, r1);
    const ClusterResult b = cluster_segments(pts, 4, r2);
    REQUIRE(a.assignment == b.assignment);
    REQUIRE(a.prototypes == b.prototypes);
  }
}

TEST_CASE("reach radius is a low percentile of pairwise distances") {
  std::vector<Embedding> line;
  for (int i = 0; i < 5; ++i) line.push_back({static_cast<double>(i)});
  // distances sorted: 1,1,1,1,2,2,2,3,3,4 -> 10th percentile index 0
  REQUIRE_THAT(compute_reach_radius(line), Catch::Matchers::WithinAbs(1.0, 1e-12));
  REQUIRE(compute_reach_radius({}) == 0.0);
  REQUIRE(compute_reach_radius({{1.0, 2.0}}) == 0.0);
}

TEST_CASE("shaping bonus fires once per option execution") {
  SubgoalSet sg;
  sg.prototypes = {{0.0, 0.0}, {5.0, 5.0}};
  sg.reach_radius = 1.0;
  sg.alpha_bonus = 2.5;

  bool fired = false;
  REQUIRE(shaping_bonus(sg, 0, {0.2, 0.1}, fired) == 2.5);
  REQUIRE(fired);
  REQUIRE(shaping_bonus(sg, 0, {0.0, 0.0}, fired) == 0.0);  // latched
  fired = false;                                            // new execution
  REQUIRE(shaping_bonus(sg, 0, {0.0, 0.0}, fired) == 2.5);

  fired = false;
  REQUIRE(shaping_bonus(sg, 0, {3.0, 3.0}, fired) == 0.0);  // out of reach
  REQUIRE_FALSE(fired);
  REQUIRE(shaping_bonus(sg, 1, {5.4, 5.1}, fired) == 2.5);  // second option's goal

  SubgoalSet none;
  fired = false;
  REQUIRE(shaping_bonus(none, 0, {0.0, 0.0}, fired) == 0.0);
  SubgoalSet zero = sg;
  zero.alpha_bonus = 0.0;
  REQUIRE(shaping_bonus(zero, 0, {0.0, 0.0}, fired) == 0.0);
}

TEST_CASE("termination warm start near prototypes (tabular)") {
  OptionCriticAgent agent(2, 3, 4, unit_temp());
  SubgoalSet sg;
  sg.prototypes = {{0.0}, {10.0}};
  sg.reach_radius = 0.5;
  std::vector<BetaInitSample> samples;
  for (int s = 0; s < 4; ++s)
    samples.push_back({FeatureVec::one_hot(4, s), {static_cast<double>(s * 10)}});
  // state 0 sits on prototype 0, state 1 on prototype 1; others far away

  beta_init_near_subgoals(agent, sg, 2.0, samples, true);
  REQUIRE_THAT(agent.termination_prob(0, FeatureVec::one_hot(4, 0)),
               Catch::Matchers::WithinAbs(1.0 / (1.0 + std::exp(-2.0)), 1e-12));
  REQUIRE_THAT(agent.termination_prob(1, FeatureVec::one_hot(4, 1)),
               Catch::Matchers::WithinAbs(1.0 / (1.0 + std::exp(-2.0)), 1e-12));
  REQUIRE(agent.termination_prob(0, FeatureVec::one_hot(4, 1)) == 0.5);
  REQUIRE(agent.termination_prob(0, FeatureVec::one_hot(4, 2)) == 0.5);
  REQUIRE(agent.termination_prob(1, FeatureVec::one_hot(4, 3)) == 0.5);

  OptionCriticAgent before = agent;
  beta_init_near_subgoals(agent, sg, 0.0, samples, true);
  for (int opt = 0; opt < 2; ++opt)
    REQUIRE(agent.termination[static_cast<std::size_t>(opt)].weights() ==
            before.termination[static_cast<std::size_t>(opt)].weights());
}

TEST_CASE("termination warm start fits dense features by least squares") {
  OptionCriticAgent agent(1, 2, 3, unit_temp());
  agent.termination[0].weights() = {0.3, -0.2, 0.1};
  SubgoalSet sg;
  sg.prototypes = {{0.0}};
  sg.reach_radius = 0.5;

  // three independent dense features; the first sample is near the prototype
  std::vector<BetaInitSample> samples = {
      {FeatureVec::dense({1.0, 0.2, 0.0}), {0.1}},
      {FeatureVec::dense({0.0, 1.0, 0.3}), {4.0}},
      {FeatureVec::dense({0.4, 0.0, 1.0}), {8.0}},
  };
  std::vector<double> want;
  for (const auto& s : samples)
    want.push_back(agent.termination[0].value(s.feat) + (s.phi[0] <= 0.5 ? 2.0 : 0.0));

  beta_init_near_subgoals(agent, sg, 2.0, samples, false);
  for (std::size_t m = 0; m < samples.size(); ++m)
    REQUIRE_THAT(agent.termination[0].value(samples[m].feat),
                 Catch::Matchers::WithinAbs(want[m], 1e-4));
}

TEST_CASE("diversity is zero for clones and matches the hand value") {
  AgentHyper hy = unit_temp();
  OptionCriticAgent agent(2, 2, 1, hy);
  const FeatureVec s = FeatureVec::one_hot(1, 0);

  SECTION("identical policies have no diversity") {
    const auto r = diversity_update(agent, {s}, 0.0, 1.0);
    REQUIRE_THAT(r.value, Catch::Matchers::WithinAbs(0.0, 1e-12));
  }

  SECTION("opposed near-deterministic policies hit the analytic value") {
    agent.intra[0][0].weights() = {std::log(0.9)};
    agent.intra[0][1].weights() = {std::log(0.1)};
    agent.intra[1][0].weights() = {std::log(0.1)};
    agent.intra[1][1].weights() = {std::log(0.9)};
    const auto r = diversity_update(agent, {s}, 0.0, 1.0);
    REQUIRE_THAT(r.value, Catch::Matchers::WithinAbs(2.0 * 0.8 * std::log(9.0), 1e-9));
  }

  SECTION("diversity is nonnegative on random policies") {
    Rng rng(23);
    OptionCriticAgent rnd(3, 4, 2, hy);
    for (auto& opt : rnd.intra)
      for (auto& row : opt)
        for (double& w : row.weights()) w = rng.uniform(-2.0, 2.0);
    const FeatureVec s0 = FeatureVec::one_hot(2, 0), s1 = FeatureVec::one_hot(2, 1);
    const auto r = diversity_update(rnd, {s0, s1}, 0.0, 1.0);
    REQUIRE(r.value >= 0.0);
  }

  SECTION("fewer than two options yields zero") {
    OptionCriticAgent solo(1, 2, 1, hy);
    REQUIRE(diversity_update(solo, {s}, 0.0, 1.0).value == 0.0);
  }
}

TEST_CASE("diversity ascent direction matches finite differences") {
  AgentHyper hy;
  hy.temperature = 0.7;
  OptionCriticAgent agent(2, 3, 2, hy);
  Rng rng(29);
  for (auto& opt : agent.intra)
    for (auto& row : opt)
      for (double& w : row.weights()) w = rng.uniform(-1.0, 1.0);
  const std::vector<FeatureVec> states = {FeatureVec::one_hot(2, 0), FeatureVec::one_hot(2, 1)};

  const auto eval = [&]() { return diversity_update(agent, states, 0.0, 1.0).value; };

  OptionCriticAgent stepped = agent;
  diversity_update(stepped, states, 1.0, 1.0);

  const double h = 1e-6;
  int informative = 0;
  for (int opt = 0; opt < 2; ++opt)
    for (int a = 0; a < 3; ++a)
      for (int i = 0; i < 2; ++i) {
        double& w = agent.intra[static_cast<std::size_t>(opt)][static_cast<std::size_t>(a)]
                        .weights()[static_cast<std::size_t>(i)];
        const double saved = w;
        w = saved + h;
        const double fp = eval();
        w = saved - h;
        const double fm = eval();
        w = saved;
        const double fd = (fp - fm) / (2.0 * h);
        const double applied =
            stepped.intra[static_cast<std::size_t>(opt)][static_cast<std::size_t>(a)]
                .weights()[static_cast<std::size_t>(i)] -
            saved;  // ascent: applied step equals +gradient
        if (std::abs(fd) < 1e-9) {
          REQUIRE(std::abs(applied) < 1e-9);
        } else {
          REQUIRE_THAT(applied, Catch::Matchers::WithinRel(fd, 1e-4));
          ++informative;
        }
      }
  REQUIRE(informative >= 8);

  // termination and critics untouched by the diversity step
  for (int opt = 0; opt < 2; ++opt)
    REQUIRE(stepped.termination[static_cast<std::size_t>(opt)].weights() ==
            agent.termination[static_cast<std::size_t>(opt)].weights());
}

TEST_CASE("behavioral cloning concentrates on the demonstrated actions") {
  AgentHyper hy = unit_temp();
  OptionCriticAgent agent(2, 3, 4, hy);

  // deterministic demonstrations: cluster 0 always acts 2, cluster 1 acts 0
  std::vector<std::vector<BCSample>> clusters(2);
  for (int s = 0; s < 4; ++s) {
    clusters[0].push_back({FeatureVec::one_hot(4, s), 2});
    clusters[1].push_back({FeatureVec::one_hot(4, s), 0});
  }

  const FeatureVec probe = FeatureVec::one_hot(4, 1);
  double prev0 = agent.intra_probs(0, probe)[2];
  double prev1 = agent.intra_probs(1, probe)[0];
  for (int round = 0; round < 5; ++round) {
    const BCReport rep = bc_pretrain(agent, clusters, 40, 0.5);
    REQUIRE(rep.skipped_options.empty());
    const double now0 = agent.intra_probs(0, probe)[2];
    const double now1 = agent.intra_probs(1, probe)[0];
    REQUIRE(now0 > prev0);
    REQUIRE(now1 > prev1);
    prev0 = now0;
    prev1 = now1;
  }
  REQUIRE(prev0 > 0.95);
  REQUIRE(prev1 > 0.95);

  SECTION("zero epochs changes nothing") {
    OptionCriticAgent fresh(2, 3, 4, hy);
    OptionCriticAgent probe_agent = fresh;
    const BCReport rep = bc_pretrain(probe_agent, clusters, 0, 0.5);
    REQUIRE(rep.epoch_loss.empty());
    for (int opt = 0; opt < 2; ++opt)
      for (int a = 0; a < 3; ++a)
        REQUIRE(probe_agent.intra[static_cast<std::size_t>(opt)][static_cast<std::size_t>(a)]
                    .weights() ==
                fresh.intra[static_cast<std::size_t>(opt)][static_cast<std::size_t>(a)].weights());
  }

  SECTION("empty clusters are skipped and reported") {
    OptionCriticAgent two(2, 3, 4, hy);
    std::vector<std::vector<BCSample>> holey(2);
    holey[1].push_back({FeatureVec::one_hot(4, 0), 1});
    const BCReport rep = bc_pretrain(two, holey, 3, 0.2);
    REQUIRE(rep.skipped_options == std::vector<int>{0});
    for (int a = 0; a < 3; ++a)
      REQUIRE(two.intra[0][static_cast<std::size_t>(a)].weights() ==
              std::vector<double>(4, 0.0));
  }
}

TEST_CASE("held-out behavioral-cloning loss drops after training") {
  AgentHyper hy = unit_temp();
  OptionCriticAgent agent(2, 3, 6, hy);
  Rng rng(37);

  // stochastic but option-specific demonstrations over six states
  std::vector<std::vector<BCSample>> train(2), holdout(2);
  for (int i = 0; i < 200; ++i) {
    const int s = rng.uniform_int(6);
    const int a0 = rng.uniform() < 0.85 ? (s % 3) : rng.uniform_int(3);
    const int a1 = rng.uniform() < 0.85 ? ((s + 1) % 3) : rng.uniform_int(3);
    auto& dst0 = (i % 5 == 0) ? holdout[0] : train[0];
    auto& dst1 = (i % 5 == 0) ? holdout[1] : train[1];
    dst0.push_back({FeatureVec::one_hot(6, s), a0});
    dst1.push_back({FeatureVec::one_hot(6, s), a1});
  }

  const double before = bc_eval(agent, holdout);
  bc_pretrain(agent, train, 60, 0.3);
  const double after = bc_eval(agent, holdout);
  REQUIRE(after < before);
}

TEST_CASE("total objective weighs its parts") {
  LossComponents c;
  c.rl = 2.5;
  c.termination = 0.8;
  c.diversity = 2.0;
  c.bc = 1.2;
  c.cpd = 0.6;

  LossWeights off;
  off.termination = off.diversity = off.bc = off.cpd = 0.0;
  REQUIRE(total_loss(c, off) == 2.5);

  LossWeights w;
  w.termination = 0.5;
  w.diversity = 0.25;
  w.bc = 1.0;
  w.cpd = 2.0;
  const double expect = 2.5 + 0.5 * 0.8 - 0.25 * 2.0 + 1.0 * 1.2 + 2.0 * 0.6;
  REQUIRE_THAT(total_loss(c, w), Catch::Matchers::WithinAbs(expect, 1e-12));

  LossWeights dbl = w;
  dbl.termination = 1.0;
  REQUIRE_THAT(total_loss(c, dbl) - total_loss(c, w),
               Catch::Matchers::WithinAbs(0.5 * 0.8, 1e-12));

  LossWeights bad;
  bad.diversity = -0.1;
  REQUIRE_THROWS_AS(total_loss(c, bad), ConfigError);
}

namespace {

SegmentRecord cloud_segment(int episode, double cx, double cy, int action, Rng& rng) {
  SegmentRecord rec;
  rec.episode = episode;
  for (int t = 0; t < 5; ++t) {
    const Embedding phi = {cx + 0.05 * rng.normal(), cy + 0.05 * rng.normal()};
    rec.phis.push_back(phi);
    rec.feats.push_back(FeatureVec::one_hot(9, (episode * 5 + t) % 9));
    rec.actions.push_back(action);
  }
  rec.embedding = pool_segment(rec.phis);
  return rec;
}

}  // namespace

TEST_CASE("subgoal refresh adopts on drift and holds otherwise") {
  SubgoalTrackerConfig cfg;
  cfg.n_clusters = 2;
  cfg.period = 5;
  cfg.drift_threshold = 0.5;
  cfg.history_episodes = 10;
  SubgoalTracker tracker(cfg);
  Rng rng(41);
  Rng refresh_rng(42);

  // episodes 1..5: two stationary clouds, one segment of each per episode
  for (int ep = 1; ep <= 5; ++ep) {
    tracker.add_segment(cloud_segment(ep, 0.0, 0.0, 0, rng));
    tracker.add_segment(cloud_segment(ep, 6.0, 6.0, 1, rng));
    const bool adopted = tracker.maybe_refresh(ep, refresh_rng);
    if (ep == 5) {
      REQUIRE(adopted);  // first clustering always lands
      REQUIRE(tracker.has_subgoals());
      REQUIRE(tracker.subgoals().prototypes.size() == 2);
    } else {
      REQUIRE_FALSE(adopted);
    }
  }

  // BC buckets are pure: each cluster holds a single demonstrated action
  {
    const auto& buckets = tracker.bc_clusters();
    REQUIRE(buckets.size() == 2);
    for (const auto& bucket : buckets) {
      REQUIRE_FALSE(bucket.empty());
      for (const BCSample& s : bucket) REQUIRE(s.action == bucket.front().action);
    }
    REQUIRE(buckets[0].front().action != buckets[1].front().action);
  }

  // episodes 6..10: same distribution -> refresh computed but not adopted
  for (int ep = 6; ep <= 10; ++ep) {
    tracker.add_segment(cloud_segment(ep, 0.0, 0.0, 0, rng));
    tracker.add_segment(cloud_segment(ep, 6.0, 6.0, 1, rng));
    REQUIRE_FALSE(tracker.maybe_refresh(ep, refresh_rng));
  }
  REQUIRE(tracker.refreshes().size() == 2);
  REQUIRE(tracker.refreshes()[1].displacement < 0.5);
  REQUIRE_FALSE(tracker.refreshes()[1].adopted);

  // episodes 11..15: clouds jump far away -> adopted at the next refresh
  const std::vector<Embedding> old_protos = tracker.subgoals().prototypes;
  bool adopted_after_shift = false;
  for (int ep = 11; ep <= 15; ++ep) {
    tracker.add_segment(cloud_segment(ep, 20.0, 0.0, 0, rng));
    tracker.add_segment(cloud_segment(ep, 0.0, 20.0, 1, rng));
    if (tracker.maybe_refresh(ep, refresh_rng)) adopted_after_shift = true;
  }
  REQUIRE(adopted_after_shift);
  REQUIRE(tracker.subgoals().prototypes != old_protos);

  // diversity sampling draws from retained segments
  Rng sample_rng(43);
  const std::vector<FeatureVec> sample = tracker.sample_states(16, sample_rng);
  REQUIRE(sample.size() == 16);
  for (const FeatureVec& f : sample) REQUIRE(f.dim == 9);
}

TEST_CASE("subgoal refresh defers, disables, and prunes") {
  SECTION("too few segments defers without recording") {
    SubgoalTrackerConfig cfg;
    cfg.n_clusters = 2;
    cfg.period = 1;
    SubgoalTracker tracker(cfg);
    Rng rng(47), seg_rng(48);
    tracker.add_segment(cloud_segment(1, 0, 0, 0, seg_rng));
    REQUIRE_FALSE(tracker.maybe_refresh(1, rng));
    REQUIRE(tracker.refreshes().empty());
    REQUIRE_FALSE(tracker.has_subgoals());
  }
  SECTION("nonpositive period never refreshes") {
    SubgoalTrackerConfig cfg;
    cfg.n_clusters = 1;
    cfg.period = 0;
    SubgoalTracker tracker(cfg);
    Rng rng(49), seg_rng(50);
    for (int ep = 1; ep <= 20; ++ep) {
      tracker.add_segment(cloud_segment(ep, 0, 0, 0, seg_rng));
      REQUIRE_FALSE(tracker.maybe_refresh(ep, rng));
    }
    REQUIRE(tracker.refreshes().empty());
  }
  SECTION("history window drops stale segments") {
    SubgoalTrackerConfig cfg;
    cfg.n_clusters = 1;
    cfg.period = 0;
    cfg.history_episodes = 10;
    SubgoalTracker tracker(cfg);
    Rng seg_rng(51);
    tracker.add_segment(cloud_segment(1, 0, 0, 0, seg_rng));
    tracker.add_segment(cloud_segment(5, 0, 0, 0, seg_rng));
    REQUIRE(tracker.segments_held() == 2);
    tracker.add_segment(cloud_segment(20, 0, 0, 0, seg_rng));
    REQUIRE(tracker.segments_held() == 1);
  }
}
