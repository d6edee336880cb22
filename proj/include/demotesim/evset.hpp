#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "demotesim/exec.hpp"

namespace dsim {

enum class EvLevel : uint8_t { L2, LLC, Directory };
enum class Placement : uint8_t { HelperThread, Cldemote };

struct EvictionSet {
  VirtAddr target;
  std::vector<VirtAddr> members;
  EvLevel level;
};

struct BuildStats {
  uint64_t memory_ops = 0;
  uint64_t simulated_cycles = 0;
  bool success = false;
};

// Pool of addresses sharing va bits 11:6 with the target, physical bits
// 16:12 and slice unknown to the attacker (4 KiB pages).
std::vector<VirtAddr> generate_candidates(Machine& m, VirtAddr target,
                                          uint32_t pool_size);

// Moves addr's line into the LLC. helper_thread uses a second physical core
// plus a coordination cost; cldemote stays on the attacker's core.
void place_in_llc(Machine& m, VirtAddr addr, Placement how);

// Attacker-view eviction test: primes members per level, then times a
// target access against the level's latency threshold.
bool is_eviction_set(Machine& m, VirtAddr target,
                     const std::vector<VirtAddr>& members, EvLevel level,
                     Placement placement = Placement::Cldemote);

// Group-testing reduction (Vila-style): split into a+1 groups, discard a
// group whose removal keeps the set evicting, until exactly `assoc` remain.
EvictionSet reduce(Machine& m, VirtAddr target, std::vector<VirtAddr> candidates,
                   uint32_t assoc, EvLevel level, Placement placement,
                   BuildStats* stats);

struct ConstructResult {
  EvictionSet set;
  BuildStats stats;
};

// End-to-end pipeline: generate, place every tested line via `placement`,
// reduce. Deterministic under the machine seed.
ConstructResult construct(Machine& m, VirtAddr target, Placement placement,
                          uint32_t pool_size, uint32_t assoc = 0);

struct ReverseCurve {
  std::vector<double> mean_cycles;  // index n = 1..max_n
  std::vector<uint32_t> breakpoints;
};

struct LlcReverseResult {
  ReverseCurve curve;
  uint32_t l1_ways = 0, l2_ways = 0, llc_ways = 0;
};

struct DirReverseResult {
  ReverseCurve curve;
  uint32_t dir_ways = 0;  // 0 = inconclusive
  bool conclusive = false;
};

// Oracle-assisted congruent address generation (the bootstrap step the
// procedure presumes); the detection algorithms see latencies only.
std::vector<VirtAddr> oracle_congruent(Machine& m, VirtAddr target, uint32_t n);

LlcReverseResult reverse_llc(Machine& m, VirtAddr target, uint32_t max_n,
                             uint32_t repeats);
DirReverseResult reverse_directory(Machine& m, VirtAddr target, uint32_t max_n,
                                   uint32_t repeats);

std::vector<uint32_t> detect_breakpoints(const std::vector<double>& means,
                                         double step_min);

}  // namespace dsim
