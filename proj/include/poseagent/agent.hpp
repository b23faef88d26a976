#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <utility>
#include <vector>

#include "poseagent/energy_net.hpp"

namespace poseagent {

/// Anything that maps a hypothesis state to its (E, E') pair.
template <class S>
concept EnergyScorer = requires(S s, const SyntheticScene& scene, const Pose& pose,
                                const FeatureVector& features) {
    { s(scene, pose, features) } -> std::convertible_to<std::pair<double, double>>;
};

struct EpisodeParams {
    int budget = 77;       // B0, total refinement steps per scene
    int tau_max = 3;       // per-hypothesis selection cap
    int m_max = 10;        // inner-step cap per refinement call
    double inlier_threshold = 0.0;  // <= 0 derives 2.5 sigma from the scene
    double correct_threshold_fraction = 0.1;
};

inline double effective_inlier_threshold(const EpisodeParams& params, const SyntheticScene& scene) {
    return params.inlier_threshold > 0.0 ? params.inlier_threshold
                                         : default_inlier_threshold(scene);
}

/// Softmax over an action set's energies, computed with max subtraction.
/// The in-place form exists so hot sampling loops can reuse one buffer; the
/// arithmetic is shared so both forms produce bit-identical probabilities.
inline void policy_distribution_into(std::span<const double> energies, std::vector<double>& probs) {
    if (energies.empty()) throw EmptyActionSet("policy over an empty action set");
    const double maximum = *std::max_element(energies.begin(), energies.end());
    probs.resize(energies.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < energies.size(); ++i) {
        probs[i] = std::exp(energies[i] - maximum);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
}

inline std::vector<double> policy_distribution(std::span<const double> energies) {
    std::vector<double> probs;
    policy_distribution_into(energies, probs);
    return probs;
}

/// d log pi(chosen) / d E_a for every a in the action set:
/// 1 - pi(chosen) at the chosen index, -pi(a) elsewhere.
inline std::vector<double> log_policy_gradient_wrt_energies(std::span<const double> pi,
                                                            int chosen) {
    std::vector<double> grad(pi.size());
    for (std::size_t i = 0; i < pi.size(); ++i) grad[i] = -pi[i];
    grad[static_cast<std::size_t>(chosen)] += 1.0;
    return grad;
}

/// One pool entry: current pose, how often it was refined, its context
/// features and the cached energies of those features.
struct HypothesisState {
    Pose pose;
    int tau = 0;
    FeatureVector features;
    double energy_refine = 0.0;
    double energy_final = 0.0;
};

struct EpisodePool {
    std::vector<HypothesisState> states;
    int budget_remaining = 0;
    int tau_max = 0;
    int m_max = 1;
    double inlier_threshold = 0.0;
    double correct_threshold_fraction = 0.1;
    int step_index = 0;
    std::vector<double> pool_distances;  // static pool-spread feature, diameters

    int size() const { return static_cast<int>(states.size()); }

    /// A^t = { a : tau_a < tau_max }, recomputed on demand.
    std::vector<int> action_set() const {
        std::vector<int> actions;
        actions.reserve(states.size());
        for (int a = 0; a < size(); ++a)
            if (states[static_cast<std::size_t>(a)].tau < tau_max) actions.push_back(a);
        return actions;
    }
};

/// Scores a hypothesis state; the default implementation evaluates the
/// energy network on the state's features.
struct NetScorer {
    const EnergyNet* net;
    std::pair<double, double> operator()(const SyntheticScene&, const Pose&,
                                         const FeatureVector& features) const {
        return forward(*net, features);
    }
};

template <EnergyScorer Scorer>
inline EpisodePool make_episode_pool(const SyntheticScene& scene, const HypothesisPool& pool,
                                     Scorer&& scorer, const EpisodeParams& params) {
    if (params.m_max < 1) throw ConfigError("m_max must be >= 1");
    if (params.tau_max < 0) throw ConfigError("tau_max must be >= 0");
    if (params.budget < 0) throw ConfigError("budget must be >= 0");

    EpisodePool episode;
    episode.budget_remaining = params.budget;
    episode.tau_max = params.tau_max;
    episode.m_max = params.m_max;
    episode.inlier_threshold = effective_inlier_threshold(params, scene);
    episode.correct_threshold_fraction = params.correct_threshold_fraction;
    episode.pool_distances = mean_pool_distances(pool, scene.model);

    episode.states.reserve(pool.hypotheses.size());
    for (int a = 0; a < pool.pool_size(); ++a) {
        HypothesisState state;
        state.pose = pool.hypotheses[static_cast<std::size_t>(a)];
        state.features = featurize(scene, episode.pool_distances[static_cast<std::size_t>(a)],
                                   state.pose, 0.0, 0, params.tau_max, episode.inlier_threshold);
        std::tie(state.energy_refine, state.energy_final) =
            scorer(scene, state.pose, state.features);
        episode.states.push_back(std::move(state));
    }
    return episode;
}

inline EpisodePool make_episode_pool(const SyntheticScene& scene, const HypothesisPool& pool,
                                     const EnergyNet& net, const EpisodeParams& params) {
    return make_episode_pool(scene, pool, NetScorer{&net}, params);
}

struct EpisodeStep {
    int t = 0;
    int action = 0;
    int tau_before = 0;
    int steps_spent = 0;  // m^t
};

struct EpisodeTrace {
    std::vector<EpisodeStep> actions;
    int final_action = -1;
    double reward = 0.0;
    int total_steps_spent = 0;
};

struct EpisodeOptions {
    bool uniform_refinement_policy = false;  // RandRef-style selection
    bool greedy_final = false;               // argmax E' instead of sampling
};

/// Deterministic argmax over final-decision energies, lowest index wins ties.
inline int greedy_final_choice(const EpisodePool& pool) {
    if (pool.states.empty()) throw EmptyActionSet("greedy final choice over an empty pool");
    int best = 0;
    for (int a = 1; a < pool.size(); ++a)
        if (pool.states[static_cast<std::size_t>(a)].energy_final >
            pool.states[static_cast<std::size_t>(best)].energy_final)
            best = a;
    return best;
}

inline Rng episode_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

/// Full episode: refinement phase while the remaining budget still covers a
/// worst-case refinement and legal actions exist, then the final decision
/// over all hypotheses. Observers see each decision as it is made;
/// `on_step(pool, actions, pi, chosen)` runs before the chosen hypothesis is
/// refined, `on_final(pool, pi, chosen)` before the reward is computed.
template <EnergyScorer Scorer, class StepObserver, class FinalObserver>
inline EpisodeTrace run_episode_observed(const SyntheticScene& scene, EpisodePool& pool,
                                         Scorer&& scorer, std::uint64_t rng_seed,
                                         const EpisodeOptions& options, StepObserver&& on_step,
                                         FinalObserver&& on_final) {
    Rng rng = episode_rng(rng_seed);
    EpisodeTrace trace;

    while (pool.budget_remaining >= pool.m_max) {
        const std::vector<int> actions = pool.action_set();
        if (actions.empty()) break;

        std::vector<double> energies(actions.size());
        for (std::size_t i = 0; i < actions.size(); ++i)
            energies[i] = options.uniform_refinement_policy
                              ? 0.0
                              : pool.states[static_cast<std::size_t>(actions[i])].energy_refine;
        const std::vector<double> pi = policy_distribution(energies);
        const int chosen_local = sample_categorical(pi, rng);
        const int chosen = actions[static_cast<std::size_t>(chosen_local)];
        on_step(const_cast<const EpisodePool&>(pool), actions, pi, chosen_local);

        HypothesisState& state = pool.states[static_cast<std::size_t>(chosen)];
        const RefinementResult refined =
            refine(scene, state.pose, pool.m_max, pool.inlier_threshold);
        trace.actions.push_back({pool.step_index, chosen, state.tau, refined.steps_used});
        trace.total_steps_spent += refined.steps_used;

        state.pose = refined.refined_pose;
        state.tau += 1;
        state.features = featurize(scene, pool.pool_distances[static_cast<std::size_t>(chosen)],
                                   state.pose, refined.moved_distance, state.tau, pool.tau_max,
                                   pool.inlier_threshold);
        std::tie(state.energy_refine, state.energy_final) =
            scorer(scene, state.pose, state.features);

        pool.budget_remaining -= refined.steps_used;
        pool.step_index += 1;
    }

    if (options.greedy_final) {
        trace.final_action = greedy_final_choice(pool);
    } else {
        std::vector<double> energies(pool.states.size());
        for (std::size_t a = 0; a < pool.states.size(); ++a)
            energies[a] = pool.states[a].energy_final;
        const std::vector<double> pi = policy_distribution(energies);
        trace.final_action = sample_categorical(pi, rng);
        on_final(const_cast<const EpisodePool&>(pool), pi, trace.final_action);
    }

    const Pose& chosen_pose =
        pool.states[static_cast<std::size_t>(trace.final_action)].pose;
    trace.reward = is_pose_correct(chosen_pose, scene.truth, scene.model,
                                   pool.correct_threshold_fraction)
                       ? 1.0
                       : -1.0;
    return trace;
}

template <EnergyScorer Scorer>
inline EpisodeTrace run_episode(const SyntheticScene& scene, EpisodePool& pool, Scorer&& scorer,
                                std::uint64_t rng_seed, const EpisodeOptions& options = {}) {
    auto no_step = [](const EpisodePool&, const std::vector<int>&, const std::vector<double>&,
                      int) {};
    auto no_final = [](const EpisodePool&, const std::vector<double>&, int) {};
    return run_episode_observed(scene, pool, std::forward<Scorer>(scorer), rng_seed, options,
                                no_step, no_final);
}

inline EpisodeTrace run_episode(const SyntheticScene& scene, EpisodePool& pool,
                                const EnergyNet& net, std::uint64_t rng_seed,
                                const EpisodeOptions& options = {}) {
    return run_episode(scene, pool, NetScorer{&net}, rng_seed, options);
}

}  // namespace poseagent
