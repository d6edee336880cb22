#include "demotesim/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dsim {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw std::runtime_error("config: bad numeric value for '" + key + "': " + v);
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  double d = to_double(key, v);
  if (d < 0) throw std::runtime_error("config: negative value for '" + key + "'");
  return static_cast<uint64_t>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw std::runtime_error("config: bad boolean for '" + key + "': " + v);
}

}  // namespace

ProbeKind probe_kind_from_string(const std::string& s) {
  if (s == "flush-demote" || s == "flush_demote") return ProbeKind::FlushDemote;
  if (s == "flush-reload" || s == "flush_reload") return ProbeKind::FlushReload;
  if (s == "flush-flush" || s == "flush_flush") return ProbeKind::FlushFlush;
  if (s == "stream-reload" || s == "stream_reload") return ProbeKind::StreamReload;
  if (s == "demote-time" || s == "demote_time") return ProbeKind::DemoteTime;
  throw std::runtime_error("unknown probe kind: " + s);
}

const char* probe_kind_name(ProbeKind k) {
  switch (k) {
    case ProbeKind::FlushDemote: return "flush-demote";
    case ProbeKind::FlushReload: return "flush-reload";
    case ProbeKind::FlushFlush: return "flush-flush";
    case ProbeKind::StreamReload: return "stream-reload";
    case ProbeKind::DemoteTime: return "demote-time";
  }
  return "?";
}

void MachineConfig::set(const std::string& key, const std::string& value) {
  auto num = [&] { return to_double(key, value); };
  auto u = [&] { return to_u64(key, value); };
  auto b = [&] { return to_bool(key, value); };

  if (key == "cores" || key == "hierarchy.cores") { hierarchy.cores = u(); return; }
  if (key == "hierarchy.l1d.sets") { hierarchy.l1d.sets = u(); return; }
  if (key == "hierarchy.l1d.ways") { hierarchy.l1d.ways = u(); return; }
  if (key == "hierarchy.l1i.sets") { hierarchy.l1i.sets = u(); return; }
  if (key == "hierarchy.l1i.ways") { hierarchy.l1i.ways = u(); return; }
  if (key == "hierarchy.l2.sets") { hierarchy.l2.sets = u(); return; }
  if (key == "hierarchy.l2.ways") { hierarchy.l2.ways = u(); return; }
  if (key == "hierarchy.llc.sets") { hierarchy.llc.sets = u(); return; }
  if (key == "hierarchy.llc.ways") { hierarchy.llc.ways = u(); return; }
  if (key == "hierarchy.dir.sets") { hierarchy.dir.sets = u(); return; }
  if (key == "hierarchy.dir.ways") { hierarchy.dir.ways = u(); return; }
  if (key == "noise.sigma") { profile.noise_sigma = num(); return; }
  if (key == "clock.ghz") { clock_ghz = num(); return; }
  if (key == "tlb.entries") { tlb_entries = u(); return; }
  if (key == "psc.entries") { psc_entries = u(); return; }
  if (key == "seed") { seed = u(); return; }

  if (key == "latency.cldemote.l1") { profile.cldemote_l1 = num(); return; }
  if (key == "latency.cldemote.l2") { profile.cldemote_l2 = num(); return; }
  if (key == "latency.cldemote.llc") { profile.cldemote_llc = num(); return; }
  if (key == "latency.cldemote.absent") { profile.cldemote_absent = num(); return; }
  if (key == "latency.load.l1") { profile.load_l1 = num(); return; }
  if (key == "latency.load.l2") { profile.load_l2 = num(); return; }
  if (key == "latency.load.llc") { profile.load_llc = num(); return; }
  if (key == "latency.load.remote") { profile.load_remote = num(); return; }
  if (key == "latency.load.memory") { profile.load_memory = num(); return; }
  if (key == "latency.flush.cached") { profile.flush_cached = num(); return; }
  if (key == "latency.flush.absent") { profile.flush_absent = num(); return; }
  if (key == "latency.prefetch") { profile.prefetch_cost = num(); return; }
  if (key == "latency.movnt") { profile.movnt_cost = num(); return; }
  if (key == "latency.fence") { profile.fence_cost = num(); return; }
  if (key == "latency.reset") { profile.reset_cost = num(); return; }
  if (key == "latency.nop") { profile.nop_latency = num(); return; }
  if (key == "latency.probe.stream-reload.hit") { profile.probe_stream_reload.hit = num(); return; }
  if (key == "latency.probe.stream-reload.miss") { profile.probe_stream_reload.miss = num(); return; }
  if (key == "latency.probe.flush-reload.hit") { profile.probe_flush_reload.hit = num(); return; }
  if (key == "latency.probe.flush-reload.miss") { profile.probe_flush_reload.miss = num(); return; }
  if (key == "latency.probe.flush-flush.hit") { profile.probe_flush_flush.hit = num(); return; }
  if (key == "latency.probe.flush-flush.miss") { profile.probe_flush_flush.miss = num(); return; }
  if (key == "latency.probe.flush-demote.hit") { profile.probe_flush_demote.hit = num(); return; }
  if (key == "latency.probe.flush-demote.miss") { profile.probe_flush_demote.miss = num(); return; }
  if (key == "walk.ladder.pgd") { profile.walk_ladder[0] = num(); return; }
  if (key == "walk.ladder.p4d") { profile.walk_ladder[1] = num(); return; }
  if (key == "walk.ladder.pud") { profile.walk_ladder[2] = num(); return; }
  if (key == "walk.ladder.pmd") { profile.walk_ladder[3] = num(); return; }
  if (key == "walk.ladder.pt") { profile.walk_ladder[4] = num(); return; }
  if (key == "latency.page-prefetch.hit") { profile.page_prefetch_hit = num(); return; }
  if (key == "latency.page-prefetch.cold") { profile.page_prefetch_cold = num(); return; }

  if (key == "countermeasure.noise_injection") { cm.noise_injection = b(); return; }
  if (key == "countermeasure.noise_amplitude") { cm.noise_amplitude = num(); return; }
  if (key == "countermeasure.privileged_only") { cm.privileged_only = b(); return; }

  if (key == "bench.samples") { bench_samples = u(); return; }
  if (key == "algorithm1.iterations") { algo1_iters = u(); return; }
  if (key == "table4.samples") { table4_samples = u(); return; }
  if (key == "pagelevel.repeats") { pagelevel_repeats = u(); return; }
  if (key == "calibrate.samples") { calibrate_samples = u(); return; }
  if (key == "calibrate.min_gap_sigmas") { calibrate_min_gap_sigmas = num(); return; }

  if (key == "channel.window") { channel.window = u(); return; }
  if (key == "channel.bits") { channel.bits = u(); return; }
  if (key == "channel.sweep_bits") { channel.sweep_bits = u(); return; }
  if (key == "channel.primitive") { channel.primitive = value; return; }

  if (key == "kaslr.trials") { kaslr.trials = u(); return; }
  if (key == "kaslr.reboots") { kaslr.reboots = u(); return; }
  if (key == "kaslr.repeats") { kaslr.repeats = u(); return; }
  if (key == "kaslr.kernel_slots") { kaslr.kernel_slots = u(); return; }

  if (key == "evset.pool") { evset.pool = u(); return; }
  if (key == "evset.runs") { evset.runs = u(); return; }
  if (key == "evset.helper_cost") { evset.helper_cost = num(); return; }
  if (key == "evset.vote") { evset.vote = u(); return; }

  if (key == "reverse.max_n") { reverse.max_n = u(); return; }
  if (key == "reverse.repeats") { reverse.repeats = u(); return; }
  if (key == "reverse.step_min") { reverse.step_min = num(); return; }
  if (key == "reverse.runs") { reverse.runs = u(); return; }

  if (key == "runtime.parallel") { parallel = b(); return; }
  if (key == "runtime.threads") { threads = u(); return; }

  throw std::runtime_error("config: unknown key '" + key + "'");
}

MachineConfig MachineConfig::from_text(const std::string& text) {
  MachineConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               " is not 'key = value'");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    cfg.set(key, value);
  }
  cfg.validate();
  return cfg;
}

MachineConfig MachineConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str());
}

void MachineConfig::validate() const {
  auto pow2 = [](uint32_t v) { return v && (v & (v - 1)) == 0; };
  if (!pow2(hierarchy.l1d.sets) || !pow2(hierarchy.l2.sets) || !pow2(hierarchy.llc.sets) ||
      !pow2(hierarchy.dir.sets) || !pow2(hierarchy.l1i.sets))
    throw std::runtime_error("config: cache set counts must be powers of two");
  if (hierarchy.llc.sets != hierarchy.dir.sets)
    throw std::runtime_error("config: llc and directory must share the set count");
  if (profile.noise_sigma < 0) throw std::runtime_error("config: noise.sigma must be >= 0");
  if (clock_ghz <= 0) throw std::runtime_error("config: clock.ghz must be positive");
  auto positive = [&](double v, const char* what) {
    if (v <= 0) throw std::runtime_error(std::string("config: ") + what + " must be positive");
  };
  positive(profile.cldemote_l1, "latency.cldemote.l1");
  positive(profile.load_memory, "latency.load.memory");
  for (double v : profile.walk_ladder) positive(v, "walk.ladder.*");
  if (tlb_entries == 0 || psc_entries == 0)
    throw std::runtime_error("config: tlb/psc entries must be positive");
}

nlohmann::json MachineConfig::echo() const {
  nlohmann::json j;
  j["cores"] = hierarchy.cores;
  j["hierarchy"] = {
      {"l1d", {{"sets", hierarchy.l1d.sets}, {"ways", hierarchy.l1d.ways}}},
      {"l1i", {{"sets", hierarchy.l1i.sets}, {"ways", hierarchy.l1i.ways}}},
      {"l2", {{"sets", hierarchy.l2.sets}, {"ways", hierarchy.l2.ways}}},
      {"llc", {{"sets", hierarchy.llc.sets}, {"ways", hierarchy.llc.ways}}},
      {"dir", {{"sets", hierarchy.dir.sets}, {"ways", hierarchy.dir.ways}}},
  };
  j["noise"] = {{"sigma", profile.noise_sigma}};
  j["clock"] = {{"ghz", clock_ghz}};
  j["tlb"] = {{"entries", tlb_entries}};
  j["psc"] = {{"entries", psc_entries}};
  j["latency"] = {
      {"cldemote", {{"l1", profile.cldemote_l1}, {"l2", profile.cldemote_l2},
                    {"llc", profile.cldemote_llc}, {"absent", profile.cldemote_absent}}},
      {"load", {{"l1", profile.load_l1}, {"l2", profile.load_l2}, {"llc", profile.load_llc},
                {"remote", profile.load_remote}, {"memory", profile.load_memory}}},
      {"flush", {{"cached", profile.flush_cached}, {"absent", profile.flush_absent}}},
      {"reset", profile.reset_cost},
      {"probe", {{"stream-reload", {profile.probe_stream_reload.hit, profile.probe_stream_reload.miss}},
                 {"flush-reload", {profile.probe_flush_reload.hit, profile.probe_flush_reload.miss}},
                 {"flush-flush", {profile.probe_flush_flush.hit, profile.probe_flush_flush.miss}},
                 {"flush-demote", {profile.probe_flush_demote.hit, profile.probe_flush_demote.miss}}}},
      {"walk_ladder", profile.walk_ladder},
  };
  j["countermeasure"] = {{"noise_injection", cm.noise_injection},
                         {"noise_amplitude", cm.noise_amplitude},
                         {"privileged_only", cm.privileged_only}};
  j["channel"] = {{"window", channel.window}, {"bits", channel.bits},
                  {"sweep_bits", channel.sweep_bits}, {"primitive", channel.primitive}};
  j["kaslr"] = {{"trials", kaslr.trials}, {"reboots", kaslr.reboots},
                {"repeats", kaslr.repeats}, {"kernel_slots", kaslr.kernel_slots}};
  j["evset"] = {{"pool", evset.pool}, {"runs", evset.runs},
                {"helper_cost", evset.helper_cost}, {"vote", evset.vote}};
  j["reverse"] = {{"max_n", reverse.max_n}, {"repeats", reverse.repeats},
                  {"step_min", reverse.step_min}, {"runs", reverse.runs}};
  j["runtime"] = {{"parallel", parallel}, {"threads", threads}};
  j["seed"] = seed;
  return j;
}

}  // namespace dsim
