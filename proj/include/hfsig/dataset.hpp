#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfsig/augment.hpp"
#include "hfsig/modem.hpp"
#include "hfsig/modes.hpp"
#include "hfsig/parallel.hpp"
#include "hfsig/shard.hpp"
#include "hfsig/watterson.hpp"

namespace hfsig {

// Stream ids per record: global index g owns streams [g*4, g*4+4).
constexpr uint64_t kStreamsPerRecord = 4;
constexpr uint64_t kPlanStream = 0;
constexpr uint64_t kModemStream = 1;
constexpr uint64_t kChannelStream = 2;  // reserved; channel rng comes from the plan
constexpr uint64_t kSymbolStream = 3;

// Holdout records live in a different seed space entirely, so (seed,
// stream) pairs can never collide with train/val even for equal masters.
constexpr uint64_t kHoldoutSeedXor = 0x484F4C444F555421ull;  // "HOLDOUT!"

constexpr double kRecordDurationS = 1.75;

inline std::vector<int> holdout_preset_indices(
    const std::vector<WattersonPreset>& table) {
    static const char* names[] = {"itu_midlat_quiet", "itu_midlat_moderate",
                                  "itu_midlat_disturbed", "deep_two_tap"};
    std::vector<int> out;
    for (const char* n : names)
        for (size_t i = 0; i < table.size(); ++i)
            if (table[i].name == n) out.push_back(static_cast<int>(i));
    if (out.empty())
        throw std::invalid_argument("preset table has no reserved holdout entries");
    return out;
}

inline std::vector<int> training_preset_indices(
    const std::vector<WattersonPreset>& table) {
    const auto held = holdout_preset_indices(table);
    std::vector<int> out;
    for (size_t i = 0; i < table.size(); ++i) {
        bool reserved = false;
        for (int h : held) reserved |= (h == static_cast<int>(i));
        if (!reserved) out.push_back(static_cast<int>(i));
    }
    return out;
}

struct SplitCounts {
    size_t train = 0, val = 0, holdout = 0;
};

inline SplitCounts split_counts(size_t per_mode, const std::array<double, 3>& fracs) {
    const double sum = fracs[0] + fracs[1] + fracs[2];
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1");
    for (double f : fracs)
        if (f < 0.0) throw std::invalid_argument("split fractions must be >= 0");
    SplitCounts c;
    const auto n01 = static_cast<size_t>(std::llround(fracs[0] * static_cast<double>(per_mode)));
    const auto n012 = static_cast<size_t>(
        std::llround((fracs[0] + fracs[1]) * static_cast<double>(per_mode)));
    c.train = n01;
    c.val = n012 - n01;
    c.holdout = per_mode - n012;
    return c;
}

inline SymbolSource::Kind symbol_kind_for(ModemKind k) {
    switch (k) {
        case ModemKind::ook: return SymbolSource::Kind::random_text;
        case ModemKind::psk8_serial:
        case ModemKind::gfsk: return SymbolSource::Kind::preamble_payload;
        default: return SymbolSource::Kind::random_bits;
    }
}

inline AugmentationPlan plan_for_record(uint64_t seed_space, uint64_t global_index,
                                        const std::vector<WattersonPreset>& presets,
                                        const PlanDrawOptions& opt) {
    SeededRng rng(seed_space, global_index * kStreamsPerRecord + kPlanStream);
    return draw_plan(rng, presets, opt);
}

inline DatasetRecord generate_record(const ModeSpec& mode, uint64_t seed_space,
                                     uint64_t global_index,
                                     const std::vector<WattersonPreset>& presets,
                                     const PlanDrawOptions& opt,
                                     double duration_s = kRecordDurationS) {
    const AugmentationPlan plan =
        plan_for_record(seed_space, global_index, presets, opt);
    SeededRng modem_rng(seed_space, global_index * kStreamsPerRecord + kModemStream);
    SeededRng sym_rng(seed_space, global_index * kStreamsPerRecord + kSymbolStream);
    SymbolSource src{symbol_kind_for(mode.kind), &sym_rng, 0};
    const ModemOutput mo = synthesize(mode, duration_s, src, modem_rng);
    const IqSignal rec = apply_plan(mo, plan, presets);
    return DatasetRecord::from_signal(rec, mode.label_id);
}

struct GenOptions {
    double duration_s = kRecordDurationS;
    unsigned threads = 0;                    // 0 = HFSIG_THREADS / hardware
    std::optional<double> snr_override_db;   // debug: pin the SNR draw
    std::optional<std::string> preset_override;  // debug: pin the preset
};

struct DatasetSplit {
    std::vector<DatasetRecord> records;
    Manifest manifest;
};

struct BuildResult {
    DatasetSplit train, val, holdout;
};

namespace detail {

inline std::string preset_list_string(const std::vector<WattersonPreset>& table,
                                      const std::vector<int>& indices) {
    std::string s;
    for (size_t i = 0; i < indices.size(); ++i) {
        if (i) s += ",";
        s += table[static_cast<size_t>(indices[i])].name;
    }
    return s;
}

inline Manifest make_manifest(const std::string& split_name, uint64_t master_seed,
                              uint64_t seed_space, size_t per_mode,
                              size_t split_offset, size_t split_count,
                              const ModeRegistry& reg,
                              const std::vector<WattersonPreset>& table,
                              const std::vector<int>& preset_indices,
                              const PlanDrawOptions& opt, double duration_s) {
    Manifest m;
    m.set("format", "hfds-manifest-1");
    m.set("split", split_name);
    m.set_u64("master_seed", master_seed);
    m.set_u64("seed_space", seed_space);
    m.set_u64("per_mode", per_mode);
    m.set_u64("split_offset", split_offset);
    m.set_u64("split_count", split_count);
    m.set_u64("class_count", reg.size());
    m.set_u64("samples_per_record", kRecordLength);
    m.set_double("duration_s", duration_s);
    m.set_double("snr_min_db", opt.snr_min_db);
    m.set_double("snr_max_db", opt.snr_max_db);
    char hex[24];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(preset_table_hash(table)));
    m.set("preset_table_hash", hex);
    m.set("presets", preset_list_string(table, preset_indices));
    for (const ModeSpec& mode : reg)
        m.set("label_" + std::to_string(mode.label_id), mode.name);
    return m;
}

}  // namespace detail

// Generate per_mode records for every registered mode and split them by
// record index: [0, train) | [train, train+val) | [train+val, per_mode).
// Holdout records use the reserved presets and the xored seed space.
inline BuildResult build_dataset(const ModeRegistry& reg,
                                 const std::vector<WattersonPreset>& presets,
                                 size_t per_mode,
                                 const std::array<double, 3>& split_fracs,
                                 uint64_t master_seed, const GenOptions& gen = {}) {
    validate_registry(reg);
    if (per_mode < 10) throw std::invalid_argument("per_mode_count must be >= 10");
    const SplitCounts counts = split_counts(per_mode, split_fracs);

    std::vector<int> train_presets = training_preset_indices(presets);
    std::vector<int> hold_presets = holdout_preset_indices(presets);
    if (gen.preset_override) {
        const int idx = preset_index(presets, *gen.preset_override);
        train_presets = {idx};
        hold_presets = {idx};
    }
    PlanDrawOptions train_opt, hold_opt;
    train_opt.preset_indices = train_presets;
    hold_opt.preset_indices = hold_presets;
    if (gen.snr_override_db) {
        train_opt.snr_min_db = train_opt.snr_max_db = *gen.snr_override_db;
        hold_opt.snr_min_db = hold_opt.snr_max_db = *gen.snr_override_db;
    }
    const uint64_t hold_space = master_seed ^ kHoldoutSeedXor;

    BuildResult out;
    out.train.records.resize(reg.size() * counts.train);
    out.val.records.resize(reg.size() * counts.val);
    out.holdout.records.resize(reg.size() * counts.holdout);

    struct Task {
        std::vector<DatasetRecord>* dest;
        size_t slot;
        const ModeSpec* mode;
        uint64_t seed_space;
        uint64_t global_index;
        const PlanDrawOptions* opt;
    };
    std::vector<Task> tasks;
    tasks.reserve(reg.size() * per_mode);
    for (const ModeSpec& mode : reg) {
        for (size_t j = 0; j < per_mode; ++j) {
            Task t;
            t.mode = &mode;
            const uint64_t g = uint64_t{mode.label_id} * per_mode + j;
            t.global_index = g;
            if (j < counts.train) {
                t.dest = &out.train.records;
                t.slot = size_t{mode.label_id} * counts.train + j;
                t.seed_space = master_seed;
                t.opt = &train_opt;
            } else if (j < counts.train + counts.val) {
                t.dest = &out.val.records;
                t.slot = size_t{mode.label_id} * counts.val + (j - counts.train);
                t.seed_space = master_seed;
                t.opt = &train_opt;
            } else {
                t.dest = &out.holdout.records;
                t.slot = size_t{mode.label_id} * counts.holdout +
                         (j - counts.train - counts.val);
                t.seed_space = hold_space;
                t.opt = &hold_opt;
            }
            tasks.push_back(t);
        }
    }
    parallel_for(tasks.size(), gen.threads, [&](size_t i) {
        const Task& t = tasks[i];
        (*t.dest)[t.slot] = generate_record(*t.mode, t.seed_space, t.global_index,
                                            presets, *t.opt, gen.duration_s);
    });

    out.train.manifest = detail::make_manifest(
        "train", master_seed, master_seed, per_mode, 0, counts.train, reg,
        presets, train_presets, train_opt, gen.duration_s);
    out.val.manifest = detail::make_manifest(
        "val", master_seed, master_seed, per_mode, counts.train, counts.val, reg,
        presets, train_presets, train_opt, gen.duration_s);
    out.holdout.manifest = detail::make_manifest(
        "holdout", master_seed, hold_space, per_mode, counts.train + counts.val,
        counts.holdout, reg, presets, hold_presets, hold_opt, gen.duration_s);
    return out;
}

inline void write_split(const DatasetSplit& split, size_t class_count,
                        const std::string& shard_path) {
    write_shard(shard_path, split.records, static_cast<uint32_t>(class_count));
    split.manifest.save(manifest_path_for(shard_path));
}

// Re-derive every record's augmentation plan for a shard written by
// build_dataset, in shard record order (mode-major, index-minor).
inline std::vector<AugmentationPlan> plans_from_manifest(
    const Manifest& m, const std::vector<WattersonPreset>& table) {
    char hex[24];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(preset_table_hash(table)));
    if (m.require("preset_table_hash") != hex)
        throw std::runtime_error(
            "preset table hash mismatch: shard was generated from a different table");
    const uint64_t seed_space = m.require_u64("seed_space");
    const size_t per_mode = m.require_u64("per_mode");
    const size_t offset = m.require_u64("split_offset");
    const size_t count = m.require_u64("split_count");
    const size_t classes = m.require_u64("class_count");
    PlanDrawOptions opt;
    opt.snr_min_db = m.require_double("snr_min_db");
    opt.snr_max_db = m.require_double("snr_max_db");
    std::string names = m.require("presets");
    size_t pos = 0;
    while (pos <= names.size() && !names.empty()) {
        const auto comma = names.find(',', pos);
        const std::string name = names.substr(
            pos, comma == std::string::npos ? std::string::npos : comma - pos);
        opt.preset_indices.push_back(preset_index(table, name));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    std::vector<AugmentationPlan> plans;
    plans.reserve(classes * count);
    for (size_t mode = 0; mode < classes; ++mode)
        for (size_t j = 0; j < count; ++j) {
            const uint64_t g = mode * per_mode + offset + j;
            plans.push_back(plan_for_record(seed_space, g, table, opt));
        }
    return plans;
}

inline std::vector<double> snrs_from_manifest(
    const Manifest& m, const std::vector<WattersonPreset>& table) {
    const auto plans = plans_from_manifest(m, table);
    std::vector<double> snrs(plans.size());
    for (size_t i = 0; i < plans.size(); ++i) snrs[i] = plans[i].snr_db;
    return snrs;
}

}  // namespace hfsig
