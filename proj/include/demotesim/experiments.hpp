#pragma once

#include <string>
#include <vector>

#include "demotesim/config.hpp"
#include "demotesim/report.hpp"

namespace dsim {

// Experiment registry: bench, algorithm1, demote-time, page-levels, covert,
// kaslr, evset, reverse-llc, reverse-dir, taxonomy.
const std::vector<std::string>& experiment_names();

// Dispatches to the owning module. Throws on unknown experiment names and
// propagates module errors with context.
ExperimentReport run_experiment(const std::string& name, const MachineConfig& cfg,
                                uint64_t seed);

}  // namespace dsim
