#pragma once

#include <string>

#include "keepout/env.hpp"
#include "keepout/kv.hpp"
#include "keepout/trainer.hpp"

namespace keepout {

// Scenario documents are flat key-value files; all angles carry a _deg unit
// suffix in the key and are converted at this boundary.
ScenarioSpec load_scenario(const std::string& path);
void save_scenario(const ScenarioSpec& spec, const std::string& path);

struct TrainSetup {
    PhaseConfig phase;
    SacHyper hyper;
    EnvConfig env;
};

// Phase defaults overridden by an optional config document. Unknown keys are
// rejected.
TrainSetup make_train_setup(int phase, const KvDoc* doc);

} // namespace keepout
