#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace dsim::taxonomy {

// Five exploitability characteristics of an ISA extension.
struct ExtensionProfile {
  std::string name;
  bool unprivileged = false;        // U
  bool inter_cache = false;         // I
  bool memory_cache = false;        // M
  bool detect_transition = false;   // D
  bool fault_suppression = false;   // S
};

enum class AttackType : uint8_t { CacheAttack, NoiseFree, FaultlessKaslr, FastEvset };
constexpr std::array<AttackType, 4> kAttackTypes{
    AttackType::CacheAttack, AttackType::NoiseFree, AttackType::FaultlessKaslr,
    AttackType::FastEvset};

enum class Feasibility : uint8_t { No, Yes, FeasibleUnproposed, NeedsExtraInstructions };

struct FeasibilityRow {
  Feasibility cache_attack, noise_free, faultless_kaslr, fast_evset;
};

// Boolean predicate core:
//   cache_attack    = U && (I || M)
//   noise_free      = U && D
//   faultless_kaslr = U && (I || M) && S
//   fast_evset      = U && I
bool predicate(const ExtensionProfile& p, AttackType a);

// Annotation overlay per table cell: half-circle marks feasible-but-
// unproposed, dagger marks attacks needing additional instructions.
struct CellMark {
  bool filled = false;
  bool half = false;
  bool dagger = false;
};

struct KbRow {
  ExtensionProfile profile;
  std::array<CellMark, 4> marks;  // cache, noise-free, kaslr, evset
};

FeasibilityRow feasibility(const KbRow& row);

// The seven-instruction knowledge base.
const std::vector<KbRow>& default_kb();

struct RowCheck {
  std::string name;
  bool pass;
  std::string detail;
};

// Re-derives every predicate and checks consistency against the embedded
// marks, treating dagger/half-circle as overlays on the boolean core.
std::vector<RowCheck> verify_table(const std::vector<KbRow>& kb = default_kb());

const char* feasibility_name(Feasibility f);
const char* attack_name(AttackType a);

}  // namespace dsim::taxonomy
