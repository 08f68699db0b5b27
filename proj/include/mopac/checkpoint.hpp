#ifndef MOPAC_CHECKPOINT_HPP
#define MOPAC_CHECKPOINT_HPP

#include <memory>
#include <optional>
#include <string>

#include "mopac/config.hpp"
#include "mopac/model.hpp"
#include "mopac/sac.hpp"

namespace mopac {

// Versioned binary checkpoint bundling the actor-critic and (when present)
// the ensemble model, together with enough metadata to rebuild the setup.
struct Checkpoint {
    std::string env_id;
    Algorithm algorithm = Algorithm::Mopac;
    int epoch = 0;
    long env_steps = 0;
    ActorCritic agent;
    std::optional<EnsembleModel> model;
    MprSection mpr; // needed to re-run receding-horizon control on load
    double gamma = 0.99;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

} // namespace mopac

#endif
