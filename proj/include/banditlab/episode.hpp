#pragma once

#include <cstdint>
#include <functional>

#include "banditlab/agents.hpp"
#include "banditlab/env.hpp"

namespace banditlab {

struct EpisodeTally {
  std::uint64_t clicks = 0;
  std::uint64_t displays = 0;
  std::uint64_t events = 0;
  std::uint64_t organic_views = 0;

  // Undefined without displays.
  std::optional<double> ctr() const {
    if (displays == 0) return std::nullopt;
    return static_cast<double>(clicks) / static_cast<double>(displays);
  }
};

using EventSink = std::function<void(const EventRecord&)>;

// Resets a user from `user_seed` and steps until done. Bandit steps query the
// agent and feed back the click; organic views go to observe_view.
EpisodeTally run_episode(const Environment& env, Agent& agent, std::uint64_t user_seed,
                         const EventSink& sink = {}, std::uint64_t user_id = 0);

}  // namespace banditlab
