#include "banditlab/episode.hpp"

namespace banditlab {

EpisodeTally run_episode(const Environment& env, Agent& agent, std::uint64_t user_seed, const EventSink& sink,
                         std::uint64_t user_id) {
  EpisodeTally tally;
  UserModel user = env.reset(user_seed);
  bool done = false;
  while (!done) {
    EventRecord event;
    event.user_id = user_id;
    event.t = user.steps;
    event.session = user.session;

    std::optional<std::size_t> action;
    if (user.session == Session::Bandit) action = agent.act();
    const StepOutcome out = env.step(user, action);
    ++tally.events;

    if (out.reward) {
      agent.observe_reward(*action, *out.reward);
      ++tally.displays;
      if (*out.reward) ++tally.clicks;
      event.action = action;
      event.reward = out.reward;
    }
    for (auto p : out.observation) {
      agent.observe_view(p);
      ++tally.organic_views;
      event.viewed_product = p;
    }
    if (sink) sink(event);
    done = out.done;
  }
  return tally;
}

}  // namespace banditlab
