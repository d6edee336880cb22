#include "demotesim/primitives.hpp"

#include <cmath>
#include <stdexcept>

namespace dsim {

namespace {

// Probe rounds read the machine's true line state for the measured step and
// sample from the per-primitive mean table; the instructions' state effects
// are applied through the normal cache operations.
bool probe_hit_state(Machine& m, ThreadId t, ProbeKind kind, PhysAddr pa) {
  LineState st = m.caches().locate(pa);
  if (kind == ProbeKind::FlushDemote) {
    uint16_t me = static_cast<uint16_t>(1u << t.core);
    return ((st.l1d_mask | st.l1i_mask | st.l2_mask) & me) != 0;
  }
  return st.anywhere();
}

uint64_t measured_step(Machine& m, ThreadId t, ProbeKind kind, VirtAddr target,
                       bool* hit_state_out = nullptr) {
  auto pa_opt = m.translate_quiet(target);
  if (!pa_opt) throw std::runtime_error("probe: target not mapped");
  PhysAddr pa = *pa_opt;
  bool hit = probe_hit_state(m, t, kind, pa);
  if (hit_state_out) *hit_state_out = hit;

  if (m.config().cm.privileged_only && kind == ProbeKind::FlushDemote) {
    // countermeasure: the measured cldemote is a fixed-latency nop
    m.execute(t, {Op::Cldemote, target});
    return m.sample_latency(m.profile().nop_latency);
  }

  const ProbePair& pair = m.profile().probe_pair(kind);
  switch (kind) {
    case ProbeKind::FlushDemote:
      m.execute(t, {Op::Cldemote, target});
      break;
    case ProbeKind::FlushReload:
    case ProbeKind::StreamReload: {
      ExecResult r = m.execute(t, {Op::Load, target});
      if (r.fault) throw std::runtime_error("probe: reload faulted");
      break;
    }
    case ProbeKind::FlushFlush:
      m.execute(t, {Op::Clflush, target});
      break;
    default:
      throw std::runtime_error("probe: demote-time has no reset/measure pair");
  }
  return m.sample_latency(hit ? pair.hit : pair.miss);
}

void reset_step(Machine& m, ThreadId t, ProbeKind kind, VirtAddr target) {
  switch (kind) {
    case ProbeKind::FlushDemote:
    case ProbeKind::FlushReload:
      m.execute(t, {Op::Clflush, target});
      break;
    case ProbeKind::StreamReload: {
      ExecResult r = m.execute(t, {Op::Movnt, target});
      if (r.fault)
        throw std::runtime_error("stream-reload: movnt faulted (read-only page)");
      break;
    }
    case ProbeKind::FlushFlush:
      break;  // the timed flush is its own reset
    default:
      break;
  }
}

}  // namespace

bool probe(Machine& m, ThreadId t, ProbeKind kind, VirtAddr target,
           const Threshold& thr, uint64_t* latency_out) {
  bool hit_state = false;
  uint64_t lat = measured_step(m, t, kind, target, &hit_state);
  if (latency_out) *latency_out = lat;
  reset_step(m, t, kind, target);
  bool slow = lat > thr.cycles;
  // slow-means-accessed for FlushDemote/FlushFlush, fast for reload kinds
  if (kind == ProbeKind::FlushDemote || kind == ProbeKind::FlushFlush) return slow;
  return !slow;
}

Threshold calibrate(Machine& m, ProbeKind kind, VirtAddr target,
                    std::vector<CalibrationSample>* trace) {
  ThreadId attacker{0, 0};
  ThreadId victim{0, 1};
  if (kind == ProbeKind::DemoteTime) {
    const auto& prof = m.profile();
    double hit = prof.tlb_cldemote[static_cast<size_t>(TlbClass::P1U0A1Wb)].hit;
    double miss = prof.tlb_cldemote[static_cast<size_t>(TlbClass::P0U0A1Wb)].miss;
    return Threshold{static_cast<uint64_t>(std::llround((hit + miss) / 2.0)), hit, miss};
  }

  uint64_t n = m.config().calibrate_samples;
  double sum[2] = {0, 0}, sq[2] = {0, 0};
  m.execute(attacker, {Op::Clflush, target});
  for (uint64_t i = 0; i < 2 * n; ++i) {
    bool want_hit = (i & 1) != 0;
    if (want_hit) m.execute(victim, {Op::Load, target});
    uint64_t lat = measured_step(m, attacker, kind, target);
    reset_step(m, attacker, kind, target);
    int s = want_hit ? 1 : 0;
    sum[s] += static_cast<double>(lat);
    sq[s] += static_cast<double>(lat) * static_cast<double>(lat);
    if (trace) trace->push_back({i, s, lat});
  }
  double hit_mean = sum[1] / static_cast<double>(n);
  double miss_mean = sum[0] / static_cast<double>(n);
  double var = (sq[0] + sq[1]) / static_cast<double>(2 * n) -
               ((hit_mean + miss_mean) / 2) * ((hit_mean + miss_mean) / 2);
  double sigma = m.profile().noise_sigma;
  double gap = std::fabs(hit_mean - miss_mean);
  if (sigma > 0 && gap < m.config().calibrate_min_gap_sigmas * sigma) {
    (void)var;
    throw std::runtime_error("calibration failure: hit/miss distributions overlap");
  }
  Threshold thr;
  thr.hit_mean = hit_mean;
  thr.miss_mean = miss_mean;
  thr.cycles = static_cast<uint64_t>(std::llround((hit_mean + miss_mean) / 2.0));
  return thr;
}

Algorithm1Result run_algorithm1(Machine& m, ProbeKind kind, VirtAddr target,
                                uint64_t iterations) {
  // attacker and victim pinned to sibling logical cores of physical core 0;
  // the two wait_thread() calls of the loop body map to the strict
  // flush -> victim turn -> measure alternation of the deterministic driver
  ThreadId attacker{0, 0};
  ThreadId victim{0, 1};
  Threshold thr;
  try {
    thr = calibrate(m, kind, target);
  } catch (const std::runtime_error&) {
    // countermeasures can collapse the two distributions; fall back to the
    // profile's published means
    const ProbePair& p = m.profile().probe_pair(kind);
    thr.hit_mean = p.hit;
    thr.miss_mean = p.miss;
    thr.cycles = static_cast<uint64_t>(std::llround((p.hit + p.miss) / 2.0));
  }

  uint64_t correct = 0;
  double sum_hit = 0, sum_miss = 0;
  uint64_t n_hit = 0, n_miss = 0;
  m.execute(attacker, {Op::Clflush, target});
  for (uint64_t i = 1; i <= iterations; ++i) {
    bool victim_accesses = (i % 2) == 0;
    if (victim_accesses) m.execute(victim, {Op::Load, target});
    uint64_t lat = 0;
    bool bit = probe(m, attacker, kind, target, thr, &lat);
    if (bit == victim_accesses) ++correct;
    if (victim_accesses) {
      sum_hit += static_cast<double>(lat);
      ++n_hit;
    } else {
      sum_miss += static_cast<double>(lat);
      ++n_miss;
    }
  }
  Algorithm1Result r;
  r.iterations = iterations;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(iterations);
  r.hit_mean = n_hit ? sum_hit / static_cast<double>(n_hit) : 0;
  r.miss_mean = n_miss ? sum_miss / static_cast<double>(n_miss) : 0;
  return r;
}

double demote_time(Machine& m, ThreadId t, VirtAddr va, uint32_t repeats,
                   uint64_t* cycles_out) {
  uint64_t total = 0;
  for (uint32_t i = 0; i < repeats; ++i) {
    total += m.execute(t, {Op::Cldemote, va}).latency;
  }
  if (cycles_out) *cycles_out = total;
  return static_cast<double>(total) / static_cast<double>(repeats ? repeats : 1);
}

std::array<VirtAddr, 5> make_abort_ladder(Machine& m) {
  // Five supervisor addresses whose walks abort at PGD..PT. Distinct PGD
  // slots keep the partial paths independent.
  std::array<VirtAddr, 5> va{};
  VirtAddr base = 0xff0000000000ULL;  // inside the 56-bit space, outside user maps
  for (int depth = 0; depth < 5; ++depth) {
    VirtAddr a = base | (uint64_t(0x80 + depth) << 48);
    if (depth > 0) m.space().map_prefix(a, depth);
    va[static_cast<size_t>(depth)] = a;
  }
  return va;
}

PageLevelResult page_level_scan(Machine& m, const std::array<VirtAddr, 5>& addrs,
                                uint64_t repeats) {
  LatencyContext saved = m.context();
  m.set_context(LatencyContext::PageLevel);
  ThreadId t{0, 0};
  PageLevelResult r{};
  for (size_t lvl = 0; lvl < 5; ++lvl) {
    uint64_t sum = 0;
    for (uint64_t i = 0; i < repeats; ++i)
      sum += m.execute(t, {Op::Cldemote, addrs[lvl]}).latency;
    r.cldemote_mean[lvl] = static_cast<double>(sum) / static_cast<double>(repeats);
  }
  for (size_t lvl = 0; lvl < 5; ++lvl) {
    uint64_t sum = 0;
    for (uint64_t i = 0; i < repeats; ++i)
      sum += m.execute(t, {Op::Prefetch, addrs[lvl]}).latency;
    r.prefetch_mean[lvl] = static_cast<double>(sum) / static_cast<double>(repeats);
  }
  m.set_context(saved);
  return r;
}

}  // namespace dsim
