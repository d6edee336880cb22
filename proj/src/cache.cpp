#include "demotesim/cache.hpp"

#include <stdexcept>

namespace dsim {

namespace {
inline uint64_t line_of(PhysAddr pa) { return pa >> 6; }
inline uint16_t bit(uint32_t core) { return static_cast<uint16_t>(1u << core); }
}  // namespace

CacheHierarchy::CacheHierarchy(const HierarchyConfig& geom) : geom_(geom) {
  if (geom_.cores == 0 || geom_.cores > 16)
    throw std::runtime_error("hierarchy: cores must be in 1..16");
  for (uint32_t c = 0; c < geom_.cores; ++c) {
    l1d_.push_back(make_bank(geom_.l1d));
    l1i_.push_back(make_bank(geom_.l1i));
    l2_.push_back(make_bank(geom_.l2));
  }
  for (uint32_t s = 0; s < geom_.cores; ++s) {
    llc_.push_back(make_bank(geom_.llc));
    dir_.emplace_back(geom_.dir.sets * geom_.dir.ways);
  }
}

CacheHierarchy::Bank CacheHierarchy::make_bank(const CacheGeom& g) const {
  Bank b;
  b.sets = g.sets;
  b.assoc = g.ways;
  b.ways.resize(size_t(g.sets) * g.ways);
  return b;
}

uint32_t CacheHierarchy::slice_of(PhysAddr pa) const {
  uint64_t x = pa >> 17;
  uint32_t h = 0;
  while (x) {
    h ^= static_cast<uint32_t>(x & 0xFFFF);
    x >>= 16;
  }
  return h % geom_.cores;
}

CacheCoordinates CacheHierarchy::coords(PhysAddr pa) const {
  CacheCoordinates c;
  c.offset = pa & 0x3F;
  c.set = static_cast<uint32_t>((pa >> 6) & (geom_.llc.sets - 1));
  c.slice = slice_of(pa);
  c.tag = pa >> 17;
  return c;
}

CacheHierarchy::Way* CacheHierarchy::find(Bank& b, uint32_t set, uint64_t line) {
  Way* row = &b.ways[size_t(set) * b.assoc];
  for (uint32_t i = 0; i < b.assoc; ++i)
    if (row[i].valid && row[i].line == line) return &row[i];
  return nullptr;
}

const CacheHierarchy::Way* CacheHierarchy::find(const Bank& b, uint32_t set,
                                                uint64_t line) const {
  const Way* row = &b.ways[size_t(set) * b.assoc];
  for (uint32_t i = 0; i < b.assoc; ++i)
    if (row[i].valid && row[i].line == line) return &row[i];
  return nullptr;
}

void CacheHierarchy::presence_add(uint32_t core, uint64_t line) {
  l2_presence_[line] |= bit(core);
}

void CacheHierarchy::presence_remove(uint32_t core, uint64_t line) {
  auto it = l2_presence_.find(line);
  if (it == l2_presence_.end()) return;
  it->second &= ~bit(core);
  if (it->second == 0) l2_presence_.erase(it);
}

void CacheHierarchy::l1_insert(Bank& l1, uint32_t set_l1, uint64_t line,
                               Coherence coh, bool dirty) {
  if (Way* w = find(l1, set_l1, line)) {
    touch(*w);
    w->coh = coh;
    w->dirty |= dirty;
    return;
  }
  Way* row = &l1.ways[size_t(set_l1) * l1.assoc];
  Way* victim = nullptr;
  for (uint32_t i = 0; i < l1.assoc; ++i) {
    if (!row[i].valid) { victim = &row[i]; break; }
    if (!victim || row[i].lru < victim->lru) victim = &row[i];
  }
  // L1 eviction is silent: the line remains in the inclusive L2.
  *victim = Way{line, ++tick_, coh, dirty, true};
}

void CacheHierarchy::dir_on_l2_eviction(uint32_t core, uint64_t line, PhysAddr pa) {
  if (DirWay* d = dir_find(pa)) {
    d->owners &= ~bit(core);
    // owners==0 leaves the entry in "llc" state; recency is preserved.
  }
  (void)line;
}

void CacheHierarchy::l2_insert(uint32_t core, PhysAddr pa, Coherence coh, bool dirty) {
  Bank& l2 = l2_[core];
  uint64_t line = line_of(pa);
  uint32_t set = static_cast<uint32_t>((pa >> 6) & (l2.sets - 1));
  if (Way* w = find(l2, set, line)) {
    touch(*w);
    w->coh = coh;
    w->dirty |= dirty;
    return;
  }
  Way* row = &l2.ways[size_t(set) * l2.assoc];
  Way* victim = nullptr;
  for (uint32_t i = 0; i < l2.assoc; ++i) {
    if (!row[i].valid) { victim = &row[i]; break; }
    if (!victim || row[i].lru < victim->lru) victim = &row[i];
  }
  if (victim->valid) {
    uint64_t vline = victim->line;
    PhysAddr vpa = vline << 6;
    // inclusive back-invalidation from this core's L1s
    Bank& d1 = l1d_[core];
    uint32_t s1 = static_cast<uint32_t>((vpa >> 6) & (d1.sets - 1));
    if (Way* w = find(d1, s1, vline)) w->valid = false;
    Bank& i1 = l1i_[core];
    uint32_t s2 = static_cast<uint32_t>((vpa >> 6) & (i1.sets - 1));
    if (Way* w = find(i1, s2, vline)) w->valid = false;
    presence_remove(core, vline);
    // clean and dirty victims both install into the LLC
    llc_install(vpa, victim->coh, victim->dirty);
    dir_on_l2_eviction(core, vline, vpa);
  }
  *victim = Way{line, ++tick_, coh, dirty, true};
  presence_add(core, line);
}

void CacheHierarchy::llc_install(PhysAddr pa, Coherence coh, bool dirty) {
  uint32_t slice = slice_of(pa);
  Bank& b = llc_[slice];
  uint64_t line = line_of(pa);
  uint32_t set = static_cast<uint32_t>((pa >> 6) & (b.sets - 1));
  if (Way* w = find(b, set, line)) {
    touch(*w);
    w->dirty |= dirty;
    w->coh = coh;
    return;
  }
  Way* row = &b.ways[size_t(set) * b.assoc];
  Way* victim = nullptr;
  for (uint32_t i = 0; i < b.assoc; ++i) {
    if (!row[i].valid) { victim = &row[i]; break; }
  }
  if (!victim) {
    // Victim selection: lines also held in a private cache lose their LLC
    // copy first (the data survives upstream); otherwise LRU.
    Way* dup = nullptr;
    Way* lru = nullptr;
    for (uint32_t i = 0; i < b.assoc; ++i) {
      Way& w = row[i];
      if (!lru || w.lru < lru->lru) lru = &w;
      if (private_resident(w.line) && (!dup || w.lru < dup->lru)) dup = &w;
    }
    victim = dup ? dup : lru;
    if (!private_resident(victim->line)) {
      if (victim->dirty) ++writebacks_;
      // drop a vestigial llc-state directory entry, if any
      PhysAddr vpa = victim->line << 6;
      if (DirWay* d = dir_find(vpa)) {
        if (d->owners == 0) d->valid = false;
      }
    }
  }
  *victim = Way{line, ++tick_, coh, dirty, true};
}

void CacheHierarchy::llc_drop(PhysAddr pa) {
  Bank& b = llc_[slice_of(pa)];
  uint32_t set = static_cast<uint32_t>((pa >> 6) & (b.sets - 1));
  if (Way* w = find(b, set, line_of(pa))) {
    if (w->dirty) ++writebacks_;
    w->valid = false;
  }
}

CacheHierarchy::DirWay* CacheHierarchy::dir_find(PhysAddr pa) {
  uint32_t slice = slice_of(pa);
  uint32_t set = static_cast<uint32_t>((pa >> 6) & (geom_.dir.sets - 1));
  uint64_t line = line_of(pa);
  DirWay* row = &dir_[slice][size_t(set) * geom_.dir.ways];
  for (uint32_t i = 0; i < geom_.dir.ways; ++i)
    if (row[i].valid && row[i].line == line) return &row[i];
  return nullptr;
}

void CacheHierarchy::back_invalidate(uint64_t line, PhysAddr pa, uint16_t owners) {
  Coherence coh = Coherence::E;
  bool dirty = false;
  for (uint32_t c = 0; c < geom_.cores; ++c) {
    if (!(owners & bit(c))) continue;
    Bank& d1 = l1d_[c];
    uint32_t s1 = static_cast<uint32_t>((pa >> 6) & (d1.sets - 1));
    if (Way* w = find(d1, s1, line)) { dirty |= w->dirty; coh = w->coh; w->valid = false; }
    Bank& i1 = l1i_[c];
    uint32_t s2 = static_cast<uint32_t>((pa >> 6) & (i1.sets - 1));
    if (Way* w = find(i1, s2, line)) { dirty |= w->dirty; w->valid = false; }
    Bank& l2 = l2_[c];
    uint32_t s3 = static_cast<uint32_t>((pa >> 6) & (l2.sets - 1));
    if (Way* w = find(l2, s3, line)) { dirty |= w->dirty; coh = w->coh; w->valid = false; }
    presence_remove(c, line);
  }
  llc_install(pa, coh, dirty);
}

// Overflow victim: private entries of other cores first (the directory
// conflict displaces private lines), then vestigial llc-state entries, then
// the requester's own; LRU within each class.
void CacheHierarchy::dir_evict_for(uint32_t requester, uint32_t slice, uint32_t set) {
  DirWay* row = &dir_[slice][size_t(set) * geom_.dir.ways];
  DirWay* remote = nullptr;
  DirWay* vestigial = nullptr;
  DirWay* own = nullptr;
  for (uint32_t i = 0; i < geom_.dir.ways; ++i) {
    DirWay& w = row[i];
    if (!w.valid) continue;
    if (w.owners == 0) {
      if (!vestigial || w.lru < vestigial->lru) vestigial = &w;
    } else if (w.owners & bit(requester)) {
      if (!own || w.lru < own->lru) own = &w;
    } else {
      if (!remote || w.lru < remote->lru) remote = &w;
    }
  }
  DirWay* victim = remote ? remote : (vestigial ? vestigial : own);
  if (!victim) throw std::runtime_error("directory eviction on empty set");
  if (victim->owners != 0) {
    back_invalidate(victim->line, victim->line << 6, victim->owners);
  }
  victim->valid = false;
}

void CacheHierarchy::dir_fill_update(uint32_t core, PhysAddr pa) {
  if (DirWay* d = dir_find(pa)) {
    d->owners |= bit(core);
    d->lru = ++tick_;
    return;
  }
  uint32_t slice = slice_of(pa);
  uint32_t set = static_cast<uint32_t>((pa >> 6) & (geom_.dir.sets - 1));
  DirWay* row = &dir_[slice][size_t(set) * geom_.dir.ways];
  DirWay* free_way = nullptr;
  for (uint32_t i = 0; i < geom_.dir.ways; ++i)
    if (!row[i].valid) { free_way = &row[i]; break; }
  if (!free_way) {
    dir_evict_for(core, slice, set);
    for (uint32_t i = 0; i < geom_.dir.ways; ++i)
      if (!row[i].valid) { free_way = &row[i]; break; }
  }
  *free_way = DirWay{line_of(pa), ++tick_, bit(core), true};
}

HitLevel CacheHierarchy::load(uint32_t core, PhysAddr pa, bool is_store) {
  uint64_t line = line_of(pa);
  Bank& d1 = l1d_[core];
  uint32_t s1 = static_cast<uint32_t>((pa >> 6) & (d1.sets - 1));
  if (Way* w = find(d1, s1, line)) {
    touch(*w);
    if (is_store) {
      w->dirty = true;
      w->coh = Coherence::M;
      Bank& l2 = l2_[core];
      if (Way* w2 = find(l2, static_cast<uint32_t>((pa >> 6) & (l2.sets - 1)), line)) {
        w2->dirty = true;
        w2->coh = Coherence::M;
      }
    }
    return HitLevel::L1;
  }
  Bank& l2 = l2_[core];
  uint32_t s2 = static_cast<uint32_t>((pa >> 6) & (l2.sets - 1));
  if (Way* w = find(l2, s2, line)) {
    touch(*w);
    Coherence coh = is_store ? Coherence::M : w->coh;
    if (is_store) { w->dirty = true; w->coh = Coherence::M; }
    l1_insert(d1, s1, line, coh, is_store);
    return HitLevel::L2;
  }
  // LLC lookup: a hit serves the line, keeps the LLC copy, and updates its
  // recency; the recency of LLC lines never moves on private-cache hits.
  Bank& llc = llc_[slice_of(pa)];
  uint32_t s3 = static_cast<uint32_t>((pa >> 6) & (llc.sets - 1));
  if (Way* w = find(llc, s3, line)) {
    touch(*w);
    Coherence coh = is_store ? Coherence::M : w->coh;
    if (is_store) w->dirty = true;
    l2_insert(core, pa, coh, is_store);
    l1_insert(d1, s1, line, coh, is_store);
    dir_fill_update(core, pa);
    return HitLevel::LLC;
  }
  uint16_t others = presence_mask(line) & static_cast<uint16_t>(~bit(core));
  if (others) {
    // remote private hit: the line is copied into the shared LLC and into
    // the requester's private caches; owners keep their copies
    llc_install(pa, Coherence::S, false);
    for (uint32_t c = 0; c < geom_.cores; ++c) {
      if (!(others & bit(c))) continue;
      Bank& rl2 = l2_[c];
      if (Way* w = find(rl2, static_cast<uint32_t>((pa >> 6) & (rl2.sets - 1)), line))
        w->coh = Coherence::S;
    }
    Coherence coh = is_store ? Coherence::M : Coherence::S;
    l2_insert(core, pa, coh, is_store);
    l1_insert(d1, s1, line, coh, is_store);
    dir_fill_update(core, pa);
    return HitLevel::Remote;
  }
  // memory fill: private caches only (non-inclusive LLC)
  Coherence coh = is_store ? Coherence::M : Coherence::E;
  l2_insert(core, pa, coh, is_store);
  l1_insert(d1, s1, line, coh, is_store);
  dir_fill_update(core, pa);
  return HitLevel::Memory;
}

HitLevel CacheHierarchy::fetch(uint32_t core, PhysAddr pa) {
  uint64_t line = line_of(pa);
  Bank& i1 = l1i_[core];
  uint32_t s1 = static_cast<uint32_t>((pa >> 6) & (i1.sets - 1));
  if (Way* w = find(i1, s1, line)) {
    touch(*w);
    return HitLevel::L1;
  }
  Bank& l2 = l2_[core];
  uint32_t s2 = static_cast<uint32_t>((pa >> 6) & (l2.sets - 1));
  if (Way* w = find(l2, s2, line)) {
    touch(*w);
    l1_insert(i1, s1, line, w->coh, false);
    return HitLevel::L2;
  }
  Bank& llc = llc_[slice_of(pa)];
  uint32_t s3 = static_cast<uint32_t>((pa >> 6) & (llc.sets - 1));
  bool in_llc = find(llc, s3, line) != nullptr;
  if (in_llc) touch(*find(llc, s3, line));
  l2_insert(core, pa, Coherence::S, false);
  l1_insert(i1, s1, line, Coherence::S, false);
  dir_fill_update(core, pa);
  return in_llc ? HitLevel::LLC : HitLevel::Memory;
}

bool CacheHierarchy::demote(uint32_t core, PhysAddr pa) {
  uint64_t line = line_of(pa);
  Coherence coh = Coherence::E;
  bool dirty = false;
  bool found = false;
  Bank& d1 = l1d_[core];
  if (Way* w = find(d1, static_cast<uint32_t>((pa >> 6) & (d1.sets - 1)), line)) {
    coh = w->coh;
    dirty |= w->dirty;
    w->valid = false;
    found = true;
  }
  Bank& i1 = l1i_[core];
  if (Way* w = find(i1, static_cast<uint32_t>((pa >> 6) & (i1.sets - 1)), line)) {
    dirty |= w->dirty;
    w->valid = false;
    found = true;
  }
  Bank& l2 = l2_[core];
  if (Way* w = find(l2, static_cast<uint32_t>((pa >> 6) & (l2.sets - 1)), line)) {
    coh = w->coh;
    dirty |= w->dirty;
    w->valid = false;
    found = true;
  }
  if (!found) return false;  // lines elsewhere are never affected
  presence_remove(core, line);
  // same coherence state, no write-back to memory
  llc_install(pa, coh, dirty);
  if (DirWay* d = dir_find(pa)) {
    d->owners &= ~bit(core);  // recency preserved on the llc-state transition
  }
  return true;
}

void CacheHierarchy::flush(PhysAddr pa) {
  uint64_t line = line_of(pa);
  bool dirty = false;
  for (uint32_t c = 0; c < geom_.cores; ++c) {
    Bank& d1 = l1d_[c];
    if (Way* w = find(d1, static_cast<uint32_t>((pa >> 6) & (d1.sets - 1)), line)) {
      dirty |= w->dirty;
      w->valid = false;
    }
    Bank& i1 = l1i_[c];
    if (Way* w = find(i1, static_cast<uint32_t>((pa >> 6) & (i1.sets - 1)), line)) {
      dirty |= w->dirty;
      w->valid = false;
    }
    Bank& l2 = l2_[c];
    if (Way* w = find(l2, static_cast<uint32_t>((pa >> 6) & (l2.sets - 1)), line)) {
      dirty |= w->dirty;
      w->valid = false;
    }
    presence_remove(c, line);
  }
  Bank& llc = llc_[slice_of(pa)];
  if (Way* w = find(llc, static_cast<uint32_t>((pa >> 6) & (llc.sets - 1)), line)) {
    dirty |= w->dirty;
    w->valid = false;
  }
  if (dirty) ++writebacks_;
  if (DirWay* d = dir_find(pa)) d->valid = false;
}

void CacheHierarchy::stream_store(uint32_t core, PhysAddr pa) {
  flush(pa);        // cached copies are invalidated
  ++writebacks_;    // memory is updated directly
}

void CacheHierarchy::prefetch_fill(uint32_t core, PhysAddr pa) {
  uint64_t line = line_of(pa);
  Bank& l2 = l2_[core];
  uint32_t s2 = static_cast<uint32_t>((pa >> 6) & (l2.sets - 1));
  if (Way* w = find(l2, s2, line)) {
    touch(*w);
    return;
  }
  Bank& llc = llc_[slice_of(pa)];
  if (Way* w = find(llc, static_cast<uint32_t>((pa >> 6) & (llc.sets - 1)), line))
    touch(*w);
  l2_insert(core, pa, Coherence::E, false);
  dir_fill_update(core, pa);
}

LineState CacheHierarchy::locate(PhysAddr pa) const {
  LineState st;
  uint64_t line = line_of(pa);
  for (uint32_t c = 0; c < geom_.cores; ++c) {
    const Bank& d1 = l1d_[c];
    if (const Way* w = find(d1, static_cast<uint32_t>((pa >> 6) & (d1.sets - 1)), line)) {
      st.l1d_mask |= bit(c);
      st.coherence = w->coh;
    }
    const Bank& i1 = l1i_[c];
    if (find(i1, static_cast<uint32_t>((pa >> 6) & (i1.sets - 1)), line))
      st.l1i_mask |= bit(c);
    const Bank& l2 = l2_[c];
    if (const Way* w = find(l2, static_cast<uint32_t>((pa >> 6) & (l2.sets - 1)), line)) {
      st.l2_mask |= bit(c);
      st.coherence = w->coh;
    }
  }
  uint32_t slice = slice_of(pa);
  const Bank& llc = llc_[slice];
  uint32_t set = static_cast<uint32_t>((pa >> 6) & (llc.sets - 1));
  if (const Way* w = find(llc, set, line)) {
    st.in_llc = true;
    if (!st.in_private()) st.coherence = w->coh;
    int newer = 0;
    const Way* row = &llc.ways[size_t(set) * llc.assoc];
    for (uint32_t i = 0; i < llc.assoc; ++i)
      if (row[i].valid && row[i].lru > w->lru) ++newer;
    st.llc_rank = newer;
  }
  uint32_t dset = static_cast<uint32_t>((pa >> 6) & (geom_.dir.sets - 1));
  const DirWay* row = &dir_[slice][size_t(dset) * geom_.dir.ways];
  for (uint32_t i = 0; i < geom_.dir.ways; ++i) {
    if (row[i].valid && row[i].line == line) {
      st.dir_present = true;
      st.dir_private = row[i].owners != 0;
      st.dir_owners = row[i].owners;
      break;
    }
  }
  return st;
}

void CacheHierarchy::reset() {
  for (auto* group : {&l1d_, &l1i_, &l2_, &llc_})
    for (auto& bank : *group)
      for (auto& w : bank.ways) w.valid = false;
  for (auto& slice : dir_)
    for (auto& w : slice) w.valid = false;
  l2_presence_.clear();
  tick_ = 0;
  writebacks_ = 0;
}

}  // namespace dsim
