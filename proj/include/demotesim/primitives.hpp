#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "demotesim/exec.hpp"

namespace dsim {

struct Threshold {
  uint64_t cycles = 0;
  double hit_mean = 0;
  double miss_mean = 0;
};

struct CalibrationSample {
  uint64_t round;
  int state;  // 1 = victim-accessed ground truth
  uint64_t cycles;
};

// Samples both ground-truth states and places the threshold at the midpoint
// of the two means. Throws if the distributions overlap beyond the
// configured sigma gap.
Threshold calibrate(Machine& m, ProbeKind kind, VirtAddr target,
                    std::vector<CalibrationSample>* trace = nullptr);

// One reset/measure round against `target`. Returns the decoded bit
// (victim-accessed or not) and leaves the target in the reset state for the
// next round. Polarity: slow means accessed for FlushDemote/FlushFlush,
// fast means accessed for the reload kinds.
bool probe(Machine& m, ThreadId t, ProbeKind kind, VirtAddr target,
           const Threshold& thr, uint64_t* latency_out = nullptr);

struct Algorithm1Result {
  double accuracy;
  double hit_mean;
  double miss_mean;
  uint64_t iterations;
};

// Attacker and victim on sibling logical cores of one physical core; the
// victim touches the line on even iterations only.
Algorithm1Result run_algorithm1(Machine& m, ProbeKind kind, VirtAddr target,
                                uint64_t iterations);

// Executes cldemote `repeats` times on va and returns the mean latency.
// Never faults regardless of the mapping.
double demote_time(Machine& m, ThreadId t, VirtAddr va, uint32_t repeats,
                   uint64_t* cycles_out = nullptr);

struct PageLevelResult {
  std::array<double, 5> cldemote_mean;   // abort level PGD..PT
  std::array<double, 5> prefetch_mean;
};

// Five addresses whose walks abort at PGD..PT respectively.
PageLevelResult page_level_scan(Machine& m, const std::array<VirtAddr, 5>& addrs,
                                uint64_t repeats);

// Builds the five abort-level addresses in a fresh region of `m`'s space.
std::array<VirtAddr, 5> make_abort_ladder(Machine& m);

}  // namespace dsim
