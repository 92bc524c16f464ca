// hfsig: synthesize HF mode datasets, train the CNN classifier, evaluate,
// classify raw IQ captures and render spectrograms.
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hfsig/hfsig.hpp"

namespace fs = std::filesystem;
using namespace hfsig;

namespace {

std::vector<float> read_raw_iq(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open iq file: " + path);
    f.seekg(0, std::ios::end);
    const auto bytes = static_cast<uint64_t>(f.tellg());
    f.seekg(0);
    if (bytes % 8 != 0)
        throw std::runtime_error(
            "iq file size must be a multiple of 8 bytes (interleaved float32 I,Q)");
    std::vector<float> v(bytes / 4);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw std::runtime_error("failed reading iq file: " + path);
    return v;
}

std::vector<std::string> label_names_for(size_t classes, const Manifest* man,
                                         const ModeRegistry& reg) {
    std::vector<std::string> names(classes);
    for (size_t i = 0; i < classes; ++i) {
        const std::string key = "label_" + std::to_string(i);
        if (man) {
            if (auto v = man->get(key)) {
                names[i] = *v;
                continue;
            }
        }
        names[i] = (i < reg.size() && classes == reg.size()) ? reg[i].name
                                                             : "class_" + std::to_string(i);
    }
    return names;
}

void print_ranking(const EvalRecordResult& r, const std::vector<std::string>& names,
                   size_t window, size_t top) {
    std::printf("window %zu:", window);
    char buf[32];
    for (size_t j = 0; j < std::min(top, r.ranking.size()); ++j) {
        std::snprintf(buf, sizeof buf, "%.9f", r.ranking[j].second);
        std::printf("%s %s %s", j ? "," : "", names[r.ranking[j].first].c_str(), buf);
    }
    std::printf("\n");
}

ModeRegistry registry_from(const std::string& path) {
    return path.empty() ? default_registry() : load_registry_file(path);
}

std::vector<WattersonPreset> presets_from(const std::string& path) {
    return path.empty() ? default_watterson_presets() : load_presets_file(path);
}

int cmd_modes(const std::string& registry_path) {
    const ModeRegistry reg = registry_from(registry_path);
    for (const ModeSpec& m : reg) {
        std::printf("%2u  %-24s %-12s %6.0f  ", m.label_id, m.name.c_str(),
                    kind_name(m.kind), m.nominal_bandwidth_hz);
        bool first = true;
        for (const auto& [k, v] : m.params) {
            std::printf("%s%s=%g", first ? "" : " ", k.c_str(), v);
            first = false;
        }
        std::printf("\n");
    }
    return 0;
}

int cmd_generate(const std::string& out_dir, size_t per_mode, uint64_t seed,
                 const std::vector<double>& splits, double duration,
                 std::optional<double> snr, const std::string& preset,
                 const std::string& registry_path, const std::string& presets_path,
                 unsigned threads) {
    if (splits.size() != 3)
        throw std::runtime_error("--splits needs exactly 3 comma-separated fractions");
    std::printf("seed: %" PRIu64 "\n", seed);
    const ModeRegistry reg = registry_from(registry_path);
    const auto table = presets_from(presets_path);
    GenOptions gen;
    gen.duration_s = duration;
    gen.threads = threads;
    gen.snr_override_db = snr;
    if (!preset.empty()) gen.preset_override = preset;
    const BuildResult r = build_dataset(reg, table, per_mode,
                                        {splits[0], splits[1], splits[2]}, seed, gen);
    fs::create_directories(out_dir);
    const auto emit = [&](const DatasetSplit& s, const char* name) {
        if (s.records.empty()) return;
        const std::string path = out_dir + "/" + name + ".hfds";
        write_split(s, reg.size(), path);
        std::printf("%s: %zu records -> %s\n", name, s.records.size(), path.c_str());
    };
    emit(r.train, "train");
    emit(r.val, "val");
    emit(r.holdout, "holdout");
    return 0;
}

int cmd_train(const std::string& train_path, const std::string& val_path,
              const std::string& out_path, std::string log_path, TrainConfig cfg) {
    std::printf("seed: %" PRIu64 "\n", cfg.seed);
    ShardHeader th{}, vh{};
    const auto train_recs = load_shard(train_path, &th);
    const auto val_recs = load_shard(val_path, &vh);
    if (th.class_count != vh.class_count)
        throw std::runtime_error("train and val shards disagree on class count");
    if (th.samples_per_record != kRecordLength)
        throw std::runtime_error("unsupported record length in shard");
    Model model = build_model(desk_architecture(th.class_count), 2, kRecordLength);
    SeededRng init_rng(cfg.seed, 0x494e4954ull);  // "INIT"
    he_init(model, init_rng);
    std::printf("model: %zu parameters, %u classes\n", model.param_count(),
                th.class_count);
    if (log_path.empty()) log_path = out_path + ".log.csv";
    std::ofstream log(log_path, std::ios::binary);
    if (!log) throw std::runtime_error("cannot open log file: " + log_path);
    const TrainResult res = train_model(model, train_recs, val_recs, cfg, &log, &std::cout);
    save_checkpoint(model, out_path);
    std::printf("best epoch %d val_acc %.9f -> %s\n", res.best_epoch,
                res.best_val_acc, out_path.c_str());
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& shard_path,
             const std::string& out_dir, double bin_width,
             const std::string& presets_path, unsigned threads) {
    Model model = load_checkpoint(checkpoint);
    ShardHeader h{};
    const auto records = load_shard(shard_path, &h);
    if (h.class_count != model.class_count)
        throw std::runtime_error("shard class count does not match checkpoint");
    const Manifest man = Manifest::load(manifest_path_for(shard_path));
    const auto table = presets_from(presets_path);
    const auto snrs = snrs_from_manifest(man, table);
    if (snrs.size() != records.size())
        throw std::runtime_error("manifest record count does not match shard");
    const auto results = evaluate(model, records, snrs, threads);
    fs::create_directories(out_dir);
    const auto names = label_names_for(model.class_count, &man, default_registry());
    write_reports(results, names, out_dir, bin_width);
    std::printf("records: %zu\n", results.size());
    std::printf("top1: %.9f\n", top_k_accuracy(results, 1));
    std::printf("top3: %.9f\n", top_k_accuracy(results, std::min<size_t>(3, model.class_count)));
    std::printf("reports -> %s\n", out_dir.c_str());
    return 0;
}

int cmd_classify(const std::string& checkpoint, const std::string& iq_path,
                 size_t top, unsigned threads) {
    Model model = load_checkpoint(checkpoint);
    const std::vector<float> raw = read_raw_iq(iq_path);
    const size_t n = raw.size() / 2;
    if (n < kRecordLength)
        throw std::runtime_error("iq file holds " + std::to_string(n) +
                                 " complex samples, need at least " +
                                 std::to_string(kRecordLength));
    const size_t windows = n / kRecordLength;
    std::vector<DatasetRecord> recs(windows);
    for (size_t w = 0; w < windows; ++w) {
        recs[w].label_id = 0;
        recs[w].iq.assign(raw.begin() + static_cast<ptrdiff_t>(w * kRecordLength * 2),
                          raw.begin() + static_cast<ptrdiff_t>((w + 1) * kRecordLength * 2));
        // Records straight out of a shard are already unit power; leave the
        // bytes untouched then so the probabilities match `eval` exactly.
        double p = 0.0;
        for (size_t i = 0; i < recs[w].iq.size(); i += 2)
            p += double{recs[w].iq[i]} * recs[w].iq[i] +
                 double{recs[w].iq[i + 1]} * recs[w].iq[i + 1];
        p /= static_cast<double>(kRecordLength);
        if (p <= 0.0) throw std::runtime_error("silent window in iq file");
        if (std::abs(p - 1.0) > 1e-3) {
            const double s = 1.0 / std::sqrt(p);
            for (float& x : recs[w].iq) x = static_cast<float>(x * s);
        }
    }
    const auto results = evaluate(model, recs, {}, threads);
    const auto names = label_names_for(model.class_count, nullptr, default_registry());
    for (size_t w = 0; w < windows; ++w) print_ranking(results[w], names, w, top);
    return 0;
}

int cmd_inspect(const std::string& mode_name, const std::string& iq_path,
                const std::string& out_path, uint64_t seed, const std::string& preset,
                double snr, const std::string& registry_path,
                const std::string& presets_path) {
    IqSignal sig;
    if (!mode_name.empty()) {
        std::printf("seed: %" PRIu64 "\n", seed);
        const ModeRegistry reg = registry_from(registry_path);
        const auto table = presets_from(presets_path);
        const ModeSpec& mode = find_mode(reg, mode_name);
        PlanDrawOptions opt;
        opt.snr_min_db = opt.snr_max_db = snr;
        opt.preset_indices = {preset_index(table, preset)};
        const DatasetRecord rec = generate_record(mode, seed, 0, table, opt);
        sig = rec.to_signal(kSystemRateHz);
    } else {
        const std::vector<float> raw = read_raw_iq(iq_path);
        sig.sample_rate_hz = kSystemRateHz;
        sig.samples.resize(raw.size() / 2);
        for (size_t i = 0; i < sig.samples.size(); ++i)
            sig.samples[i] = cplx(raw[2 * i], raw[2 * i + 1]);
    }
    const Spectrogram sg = spectrogram(sig, 256, 0.75, 60.0);
    write_pgm(sg, out_path);
    std::printf("wrote %s (%zu x %zu)\n", out_path.c_str(), sg.rows, sg.cols);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HF signal classification pipeline"};
    app.require_subcommand(1);

    std::string registry_path, presets_path;

    auto* c_modes = app.add_subcommand("modes", "list the mode registry");
    c_modes->add_option("--registry", registry_path, "mode registry config file");

    auto* c_gen = app.add_subcommand("generate", "synthesize dataset shards");
    std::string gen_out;
    size_t per_mode = 500;
    uint64_t gen_seed = 1;
    std::vector<double> splits{0.9, 0.1, 0.0};
    double duration = kRecordDurationS;
    double gen_snr = 0.0;
    std::string gen_preset;
    unsigned threads = 0;
    c_gen->add_option("--out", gen_out, "output directory")->required();
    c_gen->add_option("--per-mode", per_mode, "records per mode (>= 10)");
    c_gen->add_option("--seed", gen_seed, "master seed");
    c_gen->add_option("--splits", splits, "train,val,holdout fractions")->delimiter(',');
    c_gen->add_option("--duration", duration, "synthesis duration in seconds");
    auto* snr_opt = c_gen->add_option("--snr", gen_snr, "pin every record's SNR (debug)");
    c_gen->add_option("--preset", gen_preset, "pin every record's channel preset (debug)");
    c_gen->add_option("--registry", registry_path, "mode registry config file");
    c_gen->add_option("--presets", presets_path, "channel preset config file");
    c_gen->add_option("--threads", threads, "worker threads (0 = auto)");

    auto* c_train = app.add_subcommand("train", "train the classifier");
    std::string train_path, val_path, ckpt_out, log_path;
    TrainConfig cfg;
    c_train->add_option("--train", train_path, "training shard")->required();
    c_train->add_option("--val", val_path, "validation shard")->required();
    c_train->add_option("--out", ckpt_out, "output checkpoint")->required();
    c_train->add_option("--log", log_path, "per-epoch CSV log (default <out>.log.csv)");
    c_train->add_option("--epochs", cfg.epochs, "training epochs");
    c_train->add_option("--batch", cfg.batch_size, "batch size");
    c_train->add_option("--lr", cfg.lr0, "initial learning rate");
    c_train->add_option("--decay", cfg.decay, "learning-rate decay factor");
    c_train->add_option("--step", cfg.step_epochs, "epochs per decay step");
    c_train->add_option("--seed", cfg.seed, "training seed");
    c_train->add_option("--threads", cfg.threads, "worker threads (0 = auto)");

    auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on a shard");
    std::string eval_ckpt, eval_shard, eval_out;
    double bin_width = 5.0;
    c_eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    c_eval->add_option("--shard", eval_shard, "dataset shard")->required();
    c_eval->add_option("--out", eval_out, "report directory")->required();
    c_eval->add_option("--bin-width", bin_width, "SNR bin width in dB");
    c_eval->add_option("--presets", presets_path, "channel preset config file");
    c_eval->add_option("--threads", threads, "worker threads (0 = auto)");

    auto* c_cls = app.add_subcommand("classify", "classify a raw IQ capture");
    std::string cls_ckpt, cls_iq;
    size_t top = 3;
    c_cls->add_option("--checkpoint", cls_ckpt, "model checkpoint")->required();
    c_cls->add_option("--iq", cls_iq, "raw interleaved float32 LE IQ at 4 kHz")->required();
    c_cls->add_option("--top", top, "ranks to print per window");
    c_cls->add_option("--threads", threads, "worker threads (0 = auto)");

    auto* c_ins = app.add_subcommand("inspect", "render a spectrogram PGM");
    std::string ins_mode, ins_iq, ins_out, ins_preset = "identity";
    uint64_t ins_seed = 1;
    double ins_snr = 25.0;
    auto* mode_opt = c_ins->add_option("--mode", ins_mode, "synthesize this mode");
    auto* iq_opt = c_ins->add_option("--iq", ins_iq, "raw IQ file to inspect");
    c_ins->add_option("--out", ins_out, "output PGM path")->required();
    c_ins->add_option("--seed", ins_seed, "record seed");
    c_ins->add_option("--preset", ins_preset, "channel preset");
    c_ins->add_option("--snr", ins_snr, "record SNR in dB");
    c_ins->add_option("--registry", registry_path, "mode registry config file");
    c_ins->add_option("--presets", presets_path, "channel preset config file");
    mode_opt->excludes(iq_opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (c_modes->parsed()) return cmd_modes(registry_path);
        if (c_gen->parsed())
            return cmd_generate(gen_out, per_mode, gen_seed, splits, duration,
                                snr_opt->count() ? std::optional<double>(gen_snr)
                                                 : std::nullopt,
                                gen_preset, registry_path, presets_path, threads);
        if (c_train->parsed())
            return cmd_train(train_path, val_path, ckpt_out, log_path, cfg);
        if (c_eval->parsed())
            return cmd_eval(eval_ckpt, eval_shard, eval_out, bin_width, presets_path,
                            threads);
        if (c_cls->parsed()) return cmd_classify(cls_ckpt, cls_iq, top, threads);
        if (c_ins->parsed()) {
            if (ins_mode.empty() && ins_iq.empty())
                throw std::runtime_error("inspect needs --mode or --iq");
            return cmd_inspect(ins_mode, ins_iq, ins_out, ins_seed, ins_preset,
                               ins_snr, registry_path, presets_path);
        }
    } catch (const std::exception& e) {
        std::fflush(stdout);
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
