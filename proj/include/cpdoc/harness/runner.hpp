#pragma once

// Per-seed training loops for every variant, seed-parallel execution, and the
// on-disk run layout: merged metrics CSV, per-seed checkpoints, boundary and
// prototype dumps, and a run_meta.json snapshot.
//
// Determinism contract: each seed derives independent streams for the
// environment, the agent, the detector, and the subgoal machinery, and each
// worker touches only its own result slot, so the output bytes do not depend
// on --jobs. Wall-clock columns are the only nondeterministic field.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "cpdoc/core/error.hpp"
#include "cpdoc/core/rng.hpp"
#include "cpdoc/cpd/model.hpp"
#include "cpdoc/cpd/segment.hpp"
#include "cpdoc/cpd/tokens.hpp"
#include "cpdoc/cpd/train.hpp"
#include "cpdoc/harness/config.hpp"
#include "cpdoc/harness/csv.hpp"
#include "cpdoc/integration/losses.hpp"
#include "cpdoc/integration/subgoals.hpp"
#include "cpdoc/oc/adapters.hpp"
#include "cpdoc/oc/agent.hpp"
#include "cpdoc/oc/episode.hpp"
#include "json.hpp"

namespace cpdoc {

inline std::string metrics_header(int n_options) {
  std::string h = "seed,episode,steps,return,switches,mean_option_len";
  for (int i = 0; i < n_options; ++i) h += ",usage_" + std::to_string(i);
  h += ",cpd_p,cpd_r,cpd_f1,wall_ms";
  return h;
}

struct SeedResult {
  int seed = 0;
  bool ok = false;
  std::string error;
  std::string metrics;     // data rows only, newline-terminated
  std::string boundaries;  // full CSV (header + rows); empty when unused
  std::string prototypes;  // full CSV (header + rows); empty when unused
  std::string checkpoint;  // JSON document
};

// ---------------------------------------------------------------------------
// Checkpoint serialization

inline nlohmann::json linear_to_json(const LinearFn& f) { return f.weights(); }

inline nlohmann::json agent_state_to_json(const OptionCriticAgent& agent) {
  nlohmann::json j;
  j["options"] = agent.n_options();
  j["actions"] = agent.n_actions();
  j["feature_dim"] = agent.feature_dim();
  j["hyper"] = agent_to_json(agent.hyper);
  nlohmann::json intra = nlohmann::json::array(), qu = nlohmann::json::array();
  nlohmann::json qom = nlohmann::json::array(), term = nlohmann::json::array();
  for (int w = 0; w < agent.n_options(); ++w) {
    const auto wi = static_cast<std::size_t>(w);
    nlohmann::json per_act = nlohmann::json::array(), per_act_q = nlohmann::json::array();
    for (int a = 0; a < agent.n_actions(); ++a) {
      per_act.push_back(linear_to_json(agent.intra[wi][static_cast<std::size_t>(a)]));
      per_act_q.push_back(linear_to_json(agent.q_u[wi][static_cast<std::size_t>(a)]));
    }
    intra.push_back(per_act);
    qu.push_back(per_act_q);
    qom.push_back(linear_to_json(agent.q_omega[wi]));
    term.push_back(linear_to_json(agent.termination[wi]));
  }
  j["intra"] = intra;
  j["q_u"] = qu;
  j["q_omega"] = qom;
  j["termination"] = term;
  return j;
}

namespace detail {
inline void fill_weights(LinearFn& f, const nlohmann::json& j, const char* what) {
  std::vector<double> w = j.get<std::vector<double>>();
  if (w.size() != f.weights().size())
    throw CorruptedStateError(std::string("checkpoint: ") + what + " length mismatch");
  f.weights() = std::move(w);
}
}  // namespace detail

inline void agent_state_from_json(OptionCriticAgent& agent, const nlohmann::json& j) {
  if (j.at("options").get<int>() != agent.n_options() ||
      j.at("actions").get<int>() != agent.n_actions() ||
      j.at("feature_dim").get<int>() != agent.feature_dim())
    throw CorruptedStateError("checkpoint: agent dimensions disagree");
  for (int w = 0; w < agent.n_options(); ++w) {
    const auto wi = static_cast<std::size_t>(w);
    for (int a = 0; a < agent.n_actions(); ++a) {
      const auto ai = static_cast<std::size_t>(a);
      detail::fill_weights(agent.intra[wi][ai], j.at("intra").at(wi).at(ai), "intra");
      detail::fill_weights(agent.q_u[wi][ai], j.at("q_u").at(wi).at(ai), "q_u");
    }
    detail::fill_weights(agent.q_omega[wi], j.at("q_omega").at(wi), "q_omega");
    detail::fill_weights(agent.termination[wi], j.at("termination").at(wi), "termination");
  }
}

inline nlohmann::json cpd_state_to_json(CPDModel& model) {
  nlohmann::json j;
  j["hyper"] = cpd_to_json(model.hyper());
  nlohmann::json params = nlohmann::json::array();
  for (Tensor& t : model.params()) params.push_back(t.values());
  j["params"] = params;
  return j;
}

inline void cpd_state_from_json(CPDModel& model, const nlohmann::json& j) {
  std::vector<Tensor> params = model.params();
  const auto& stored = j.at("params");
  if (stored.size() != params.size())
    throw CorruptedStateError("checkpoint: detector parameter count disagrees");
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<double> v = stored.at(i).get<std::vector<double>>();
    if (v.size() != params[i].size())
      throw CorruptedStateError("checkpoint: detector parameter size disagrees");
    std::copy(v.begin(), v.end(), params[i].data());
  }
}

inline nlohmann::json subgoals_to_json(const SubgoalSet& s) {
  nlohmann::json j;
  j["prototypes"] = s.prototypes;
  j["reach_radius"] = s.reach_radius;
  j["alpha_bonus"] = s.alpha_bonus;
  return j;
}

// ---------------------------------------------------------------------------
// Per-seed loop

namespace detail {

struct EnvBundle {
  FourRoomsConfig fourrooms;
  PinballConfig pinball;
  bool tabular = false;
};

inline FeatureVec feature_of_step(bool tabular, int feature_dim, const Transition& tr) {
  if (tabular) return FeatureVec::one_hot(feature_dim, tr.state_id);
  return FeatureVec::dense(fourier_features(tr.obs));
}

template <class Adapter>
SeedResult run_seed_impl(const ExperimentConfig& cfg, const EnvBundle& envs, Adapter adapter,
                         int seed) {
  using clock = std::chrono::steady_clock;
  SeedResult out;
  out.seed = seed;

  const bool tabular = envs.tabular;
  const bool use_cpd = variant_uses_cpd(cfg.variant);
  const IntegrationConfig& ic = cfg.integration;

  Rng env_rng(Rng::derive_seed(static_cast<std::uint64_t>(seed), 1));
  Rng agent_rng(Rng::derive_seed(static_cast<std::uint64_t>(seed), 2));
  Rng cpd_rng(Rng::derive_seed(static_cast<std::uint64_t>(seed), 3));
  Rng integ_rng(Rng::derive_seed(static_cast<std::uint64_t>(seed), 4));

  OptionCriticAgent agent(cfg.options, Adapter::kActions, adapter.feature_dim(), cfg.agent);

  std::unique_ptr<CPDModel> model;
  std::unique_ptr<CPDTrainState> train_state;
  SubgoalTrackerConfig tcfg;
  tcfg.n_clusters = cfg.options;
  tcfg.alpha_bonus = ic.alpha_bonus;
  tcfg.period = ic.refresh_period;
  tcfg.drift_threshold = ic.drift_threshold;
  tcfg.history_episodes = ic.history_episodes;
  SubgoalTracker tracker(tcfg);
  if (use_cpd) {
    const int state_dim = tabular ? adapter.feature_dim() : 4;
    model = std::make_unique<CPDModel>(state_dim, Adapter::kActions, tabular, cfg.cpd, cpd_rng);
    train_state = std::make_unique<CPDTrainState>(cfg.cpd);
  }

  TerminationSupervisionConfig tscfg;
  tscfg.tau = ic.tau;
  tscfg.threshold = cfg.cpd.threshold;
  tscfg.half_width = ic.half_width;
  tscfg.alpha_w = ic.alpha_w;
  tscfg.lambda_beta = ic.lambda_beta;
  tscfg.lr = ic.beta_lr;

  bool latch = false;  // one-shot shaping latch, reset per option execution
  EpisodeHooks hooks;
  if (use_cpd && ic.alpha_bonus != 0.0) {
    hooks.shaped_bonus = [&](int option, const EnvView& arrival) {
      if (!tracker.has_subgoals()) return 0.0;
      const Embedding phi = model->encode_state(tabular ? arrival.state_id : -1, arrival.obs);
      return shaping_bonus(tracker.subgoals(), option, phi, latch);
    };
    hooks.on_transition = [&](const Transition& tr) {
      if (tr.terminated || tr.done) latch = false;
    };
  }

  std::string boundary_rows, proto_rows;
  std::size_t next_switch = 0;

  for (int e = 1; e <= cfg.episodes; ++e) {
    while (next_switch < cfg.goal_switches.size() &&
           cfg.goal_switches[next_switch].episode == e) {
      if constexpr (std::is_same_v<Adapter, FourRoomsAdapter>)
        adapter.env().set_goal(cfg.goal_switches[next_switch].row,
                               cfg.goal_switches[next_switch].col);
      ++next_switch;
    }

    latch = false;
    const auto t0 = clock::now();
    Trajectory traj;
    const EpisodeStats st =
        run_episode(agent, adapter, agent_rng, env_rng, hooks, use_cpd ? &traj : nullptr);

    double cpd_p = -1.0, cpd_r = -1.0, cpd_f1 = -1.0;
    if (use_cpd) {
      const TokenSeq seq = tokenize(traj, tabular);
      if (ic.lambda_cpd > 0.0) {
        for (CPDWindow& w : harvest_windows(seq, cfg.cpd)) train_state->buffer.push(std::move(w));
        if (static_cast<int>(train_state->buffer.size()) >= ic.min_train_windows)
          cpd_train_step(*train_state, *model, cpd_rng);
      }

      // An untrained detector has nothing to report, so lambda_cpd gates
      // inference as well as training.
      if (ic.lambda_cpd > 0.0 && e > ic.warmup_episodes && seq.size() >= 2) {
        const std::vector<double> p = boundary_probs(*model, seq);
        const SegmentList seg = segment_from_probs(p, cfg.cpd.threshold, cfg.cpd.delta);

        // Doorway crossings are the reference boundaries in the gridworld.
        if (tabular) {
          std::vector<int> refs;
          for (std::size_t t = 0; t + 1 < traj.steps.size(); ++t)
            if (traj.steps[t].enters_doorway) refs.push_back(static_cast<int>(t) + 1);
          if (!refs.empty()) {
            const DetectionScore sc = cpd_accuracy(seg.boundaries, refs, 2);
            cpd_p = sc.precision;
            cpd_r = sc.recall;
            cpd_f1 = sc.f1;
          }
        }

        if (ic.lambda_beta > 0.0 && ic.beta_lr > 0.0) {
          std::vector<FeatureVec> feats;
          std::vector<int> options;
          feats.reserve(traj.steps.size());
          options.reserve(traj.steps.size());
          for (const Transition& tr : traj.steps) {
            feats.push_back(feature_of_step(tabular, adapter.feature_dim(), tr));
            options.push_back(tr.option);
          }
          termination_supervision(agent, feats, options, p, tscfg);
        }

        for (const auto& [a, b] : seg.segments) {
          SegmentRecord rec;
          rec.episode = e;
          for (int t = a; t < b; ++t) {
            const Transition& tr = traj.steps[static_cast<std::size_t>(t)];
            rec.feats.push_back(feature_of_step(tabular, adapter.feature_dim(), tr));
            rec.phis.push_back(model->encode_state(tabular ? tr.state_id : -1, tr.obs));
            rec.actions.push_back(tr.action);
          }
          rec.embedding = pool_segment(rec.phis);
          tracker.add_segment(std::move(rec));
        }

        if (tracker.maybe_refresh(e, integ_rng)) {
          const RefreshEvent& ev = tracker.refreshes().back();
          for (std::size_t k = 0; k < ev.prototypes.size(); ++k) {
            proto_rows += std::to_string(ev.refresh_index) + "," + std::to_string(k);
            for (double v : ev.prototypes[k]) proto_rows += "," + fmt_fixed(v);
            proto_rows += "," + fmt_fixed(ev.displacement) + "\n";
          }
          if (ic.beta_boost > 0.0)
            beta_init_near_subgoals(agent, tracker.subgoals(), ic.beta_boost,
                                    tracker.beta_samples(), tabular);
          // Cloning re-anchors the policies to recent behavior at every
          // drift-gated adoption, so a regime change that moves the
          // prototypes also clears stale action commitments.
          if (ic.lambda_bc > 0.0 && ic.bc_epochs > 0)
            bc_pretrain(agent, tracker.bc_clusters(), ic.bc_epochs, ic.bc_lr);
        }

        if (ic.lambda_div > 0.0 && ic.div_lr > 0.0) {
          const std::vector<FeatureVec> states = tracker.sample_states(ic.div_states, integ_rng);
          if (!states.empty()) diversity_update(agent, states, ic.div_lr, ic.lambda_div);
        }

        if (cfg.output.boundary_dump_every > 0 && e % cfg.output.boundary_dump_every == 0)
          for (int t = 0; t < seq.size(); ++t)
            boundary_rows += std::to_string(e) + "," + std::to_string(t) + "," +
                             fmt_fixed(p[static_cast<std::size_t>(t)]) + "," +
                             std::to_string(seg.indicators[static_cast<std::size_t>(t)]) + "\n";
      }
    }

    const double wall_ms =
        std::chrono::duration<double, std::milli>(clock::now() - t0).count();

    out.metrics += std::to_string(seed) + "," + std::to_string(e) + "," +
                   std::to_string(st.steps) + "," + fmt_fixed(st.ret) + "," +
                   std::to_string(st.switches) + "," + fmt_fixed(st.mean_option_len);
    const double inv_steps = st.steps > 0 ? 1.0 / st.steps : 0.0;
    for (int w = 0; w < cfg.options; ++w)
      out.metrics += "," + fmt_fixed(st.usage[static_cast<std::size_t>(w)] * inv_steps);
    out.metrics += "," + fmt_fixed(cpd_p) + "," + fmt_fixed(cpd_r) + "," + fmt_fixed(cpd_f1) +
                   "," + fmt_fixed(wall_ms, 3) + "\n";

    agent.hyper.eps_action *= agent.hyper.eps_action_decay;
  }

  if (!boundary_rows.empty()) out.boundaries = "episode,t,p,b\n" + boundary_rows;
  if (!proto_rows.empty()) {
    std::string head = "refresh,k";
    for (int d = 0; d < cfg.cpd.d_model; ++d) head += ",c" + std::to_string(d);
    out.prototypes = head + ",displacement\n" + proto_rows;
  }

  nlohmann::json ck;
  ck["format_version"] = 1;
  ck["variant"] = variant_name(cfg.variant);
  ck["seed"] = seed;
  ck["episodes"] = cfg.episodes;
  ck["agent"] = agent_state_to_json(agent);
  if (use_cpd) {
    ck["cpd"] = cpd_state_to_json(*model);
    if (tracker.has_subgoals()) ck["subgoals"] = subgoals_to_json(tracker.subgoals());
  }
  out.checkpoint = ck.dump(1);
  out.ok = true;
  return out;
}

}  // namespace detail

inline SeedResult run_seed(const ExperimentConfig& cfg, const detail::EnvBundle& envs, int seed) {
  try {
    if (cfg.env_type == "fourrooms")
      return detail::run_seed_impl(cfg, envs, FourRoomsAdapter(envs.fourrooms), seed);
    return detail::run_seed_impl(cfg, envs, PinballAdapter(envs.pinball), seed);
  } catch (const std::exception& e) {
    SeedResult r;
    r.seed = seed;
    r.ok = false;
    r.error = e.what();
    return r;
  }
}

// ---------------------------------------------------------------------------
// Experiment driver

struct RunOutcome {
  std::filesystem::path dir;
  int ok_seeds = 0;
  std::vector<std::string> errors;  // "seed N: reason" lines
};

inline RunOutcome run_experiment(const ExperimentConfig& cfg, int jobs, int seed_offset) {
  if (jobs < 1) throw ConfigError("jobs: must be >= 1");

  detail::EnvBundle envs;
  envs.tabular = cfg.env_type == "fourrooms";
  int optimal_initial = -1, optimal_final = -1;
  if (envs.tabular) {
    envs.fourrooms = fourrooms_load(cfg.env_config_path);
    optimal_initial = FourRooms(envs.fourrooms).optimal_steps();
    FourRoomsConfig last = envs.fourrooms;
    if (!cfg.goal_switches.empty()) {
      last.goal_r = cfg.goal_switches.back().row;
      last.goal_c = cfg.goal_switches.back().col;
    }
    optimal_final = FourRooms(last).optimal_steps();
  } else {
    envs.pinball = pinball_load(cfg.env_config_path);
  }

  std::vector<int> seeds;
  for (int i = 0; i < cfg.seeds; ++i) seeds.push_back(cfg.base_seed + seed_offset + i);

  std::vector<SeedResult> results(seeds.size());
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= seeds.size()) return;
      results[i] = run_seed(cfg, envs, seeds[i]);
    }
  };
  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(jobs), seeds.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  RunOutcome outcome;
  outcome.dir = cfg.output.dir;
  std::filesystem::create_directories(outcome.dir / "checkpoints");

  std::ofstream metrics(outcome.dir / "metrics.csv");
  if (!metrics) throw UsageError("run: cannot write " + (outcome.dir / "metrics.csv").string());
  metrics << metrics_header(cfg.options) << "\n";
  for (const SeedResult& r : results) {
    if (!r.ok) {
      outcome.errors.push_back("seed " + std::to_string(r.seed) + ": " + r.error);
      continue;
    }
    ++outcome.ok_seeds;
    metrics << r.metrics;
    std::ofstream(outcome.dir / "checkpoints" / ("seed_" + std::to_string(r.seed) + ".json"))
        << r.checkpoint << "\n";
    if (!r.boundaries.empty()) {
      std::filesystem::create_directories(outcome.dir / "boundaries");
      std::ofstream(outcome.dir / "boundaries" / ("seed_" + std::to_string(r.seed) + ".csv"))
          << r.boundaries;
    }
    if (!r.prototypes.empty()) {
      std::filesystem::create_directories(outcome.dir / "prototypes");
      std::ofstream(outcome.dir / "prototypes" / ("seed_" + std::to_string(r.seed) + ".csv"))
          << r.prototypes;
    }
  }
  metrics.close();

  if (!outcome.errors.empty()) {
    std::ofstream log(outcome.dir / "errors.log");
    for (const std::string& e : outcome.errors) log << e << "\n";
  }
  if (outcome.ok_seeds == 0)
    throw CorruptedStateError("run: every seed failed; see " +
                              (outcome.dir / "errors.log").string());

  nlohmann::json meta;
  meta["format_version"] = 1;
  meta["name"] = cfg.name;
  meta["variant"] = variant_name(cfg.variant);
  meta["env_type"] = cfg.env_type;
  meta["options"] = cfg.options;
  meta["episodes"] = cfg.episodes;
  meta["seeds"] = seeds;
  if (!cfg.goal_switches.empty())
    meta["switch_episode"] = cfg.goal_switches.front().episode;
  else
    meta["switch_episode"] = nullptr;
  if (envs.tabular) {
    meta["optimal_steps_initial"] = optimal_initial;
    meta["optimal_steps_final"] = optimal_final;
  }
  meta["effective_config"] = experiment_to_json(cfg);
  std::ofstream(outcome.dir / "run_meta.json") << meta.dump(1) << "\n";

  return outcome;
}

}  // namespace cpdoc
