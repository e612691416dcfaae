#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lcirt/data.hpp"
#include "lcirt/design.hpp"

namespace lcirt {

struct SimulationPlan {
    ModelSpec spec;
    ParameterSet params;
    std::size_t units = 0;
    std::uint64_t seed = 0;
    double missing_rate = 0.0;  // MCAR, per cell
    int threads = 1;
};

struct Simulation {
    RawResponses responses;
    std::vector<int> classes;  // latent class per unit (0-based), kept out of the data
};

// Units are generated in fixed-size blocks with per-block seeds, so the output
// depends only on the plan and never on the thread count.
Simulation simulate(const SimulationPlan& plan);

}  // namespace lcirt
