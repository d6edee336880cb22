#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "demotesim/exec.hpp"
#include "demotesim/primitives.hpp"

namespace dsim {

struct ChannelConfig {
  uint64_t window_cycles = 700;
  uint64_t bits = 1000000;
  ProbeKind primitive = ProbeKind::FlushDemote;
};

struct ChannelReport {
  double raw_rate_bps = 0;  // clock / window
  double ber = 0;
  double capacity_bps = 0;
  uint64_t bits = 0;
  uint64_t errors = 0;
  uint64_t window_cycles = 0;
};

double binary_entropy(double p);
double bsc_capacity(double raw_rate_bps, double ber);

// Sender and receiver on sibling logical cores, windows aligned to multiples
// of the window size on the shared cycle clock. The sender loads the agreed
// line during '1' windows and idles during '0'; the receiver runs one
// measure/reset round per window.
ChannelReport channel_run(Machine& m, const ChannelConfig& cfg, Rng msg_rng);

struct SweepPoint {
  uint64_t window;
  ChannelReport report;
};

std::vector<SweepPoint> channel_sweep(Machine& m, const std::vector<uint64_t>& windows,
                                      uint64_t bits_per_point, ProbeKind primitive,
                                      Rng msg_rng);

struct KaslrLayout {
  VirtAddr region_start = 0xffffffff80000000ULL;
  VirtAddr region_end = 0xffffffffc0000000ULL;
  uint64_t slot_size = 2ULL << 20;
  uint32_t slots = 512;
  uint32_t kernel_start_slot = 0;
  uint32_t kernel_slots = 22;
  VirtAddr base() const { return region_start + uint64_t(kernel_start_slot) * slot_size; }
};

// Uniformly places the kernel and maps its slots P=1,U=0,A=1.
KaslrLayout kaslr_randomize(Machine& m, uint32_t kernel_slots, Rng& rng);

struct KaslrScan {
  std::vector<double> slot_mean;  // per slot
  uint64_t total_cycles = 0;
  uint64_t probes = 0;
};

KaslrScan kaslr_scan(Machine& m, const KaslrLayout& layout, uint32_t repeats);

// Threshold-classifies slots and takes the longest low-latency run.
std::optional<VirtAddr> kaslr_locate(const KaslrScan& scan, const KaslrLayout& layout,
                                     double threshold);

struct KaslrEval {
  double accuracy = 0;
  double mean_scan_cycles = 0;
  double mean_scan_ms = 0;
  uint32_t trials = 0;
};

KaslrEval kaslr_evaluate(const MachineConfig& cfg, uint32_t trials, uint32_t reboots,
                         uint32_t repeats, uint32_t kernel_slots);

double kaslr_threshold(const LatencyProfile& p);

}  // namespace dsim
