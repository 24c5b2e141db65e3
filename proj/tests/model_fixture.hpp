#pragma once

// A small generated environment with one episode, shared by model-level tests.

#include <memory>

#include "oikg/model.hpp"
#include "oikg/synthenv.hpp"
#include "oikg/training.hpp"

namespace model_fixture {

struct World {
    oikg::Environment env;
    oikg::EnvContext ctx;
    oikg::Episode episode;
};

inline oikg::EnvParams small_params(int visual_dim = 32, int views = 36) {
    oikg::EnvParams p;
    p.node_count = 16;
    p.extent = 12.0;
    p.connection_radius = 4.5;
    p.visual_dim = visual_dim;
    p.views = views;
    p.seed = 17;
    return p;
}

/// Heap-allocated so the context's environment pointer stays valid.
inline std::unique_ptr<World> make_world(int visual_dim = 32, int views = 36) {
    auto w = std::make_unique<World>();
    w->env = oikg::generate_environment(small_params(visual_dim, views));
    w->ctx = oikg::EnvContext::build(w->env);
    w->episode = oikg::make_episode(w->env.graph, 3, oikg::PathMode::Shortest);
    return w;
}

inline oikg::ModelConfig config_for(const oikg::Environment& env, oikg::ModelConfig base) {
    base.views = env.params.views;
    base.visual_dim = env.params.visual_dim;
    return base;
}

}  // namespace model_fixture
