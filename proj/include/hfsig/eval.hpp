#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfsig/nn.hpp"
#include "hfsig/shard.hpp"
#include "hfsig/tensor.hpp"
#include "hfsig/train.hpp"

namespace hfsig {

struct EvalRecordResult {
    uint16_t true_label = 0;
    // (label, probability), sorted by probability descending; equal
    // probabilities rank the lower label id first.
    std::vector<std::pair<uint16_t, double>> ranking;
    double snr_db = std::nan("");
};

// Forward the whole shard through the model in eval mode.  snrs may be
// empty when planned SNRs are unknown (bins are then unavailable).
inline std::vector<EvalRecordResult> evaluate(Model& model,
                                              const std::vector<DatasetRecord>& records,
                                              const std::vector<double>& snrs = {},
                                              unsigned threads = 0,
                                              size_t batch_size = 64) {
    if (records.empty()) throw std::invalid_argument("empty evaluation shard");
    if (!snrs.empty() && snrs.size() != records.size())
        throw std::invalid_argument("snr list size does not match record count");
    for (const auto& r : records)
        if (r.label_id >= model.class_count)
            throw std::invalid_argument("shard class ids exceed model class count");
    model.training = false;
    Workspace ws;
    Tensor3 x;
    std::vector<uint16_t> labels;
    std::vector<size_t> order(records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<EvalRecordResult> out(records.size());
    for (size_t begin = 0; begin < records.size(); begin += batch_size) {
        const size_t count = std::min(batch_size, records.size() - begin);
        train_detail::fill_batch(records, order, begin, count, x, labels);
        const Tensor3& probs = forward(model, x, ws, nullptr, threads);
        for (size_t bi = 0; bi < count; ++bi) {
            EvalRecordResult& r = out[begin + bi];
            r.true_label = labels[bi];
            r.snr_db = snrs.empty() ? std::nan("") : snrs[begin + bi];
            r.ranking.resize(model.class_count);
            const double* pr = probs.batch(bi);
            for (size_t j = 0; j < model.class_count; ++j)
                r.ranking[j] = {static_cast<uint16_t>(j), pr[j]};
            std::sort(r.ranking.begin(), r.ranking.end(),
                      [](const auto& a, const auto& b) {
                          if (a.second != b.second) return a.second > b.second;
                          return a.first < b.first;
                      });
        }
    }
    return out;
}

inline double top_k_accuracy(const std::vector<EvalRecordResult>& results, size_t k) {
    if (results.empty()) throw std::invalid_argument("no evaluation results");
    const size_t classes = results.front().ranking.size();
    if (k < 1 || k > classes)
        throw std::invalid_argument("k outside [1, class_count]");
    size_t hits = 0;
    for (const auto& r : results)
        for (size_t j = 0; j < k; ++j)
            if (r.ranking[j].first == r.true_label) {
                ++hits;
                break;
            }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

struct SnrBin {
    double center_db = 0.0;
    size_t count = 0;
    double top1 = 0.0, top3 = 0.0;  // valid only when count > 0
};

// Bins covering [-10, +25] dB; the upper edge belongs to the last bin.
inline std::vector<SnrBin> snr_binned_accuracy(
    const std::vector<EvalRecordResult>& results, double bin_width_db,
    double lo_db = -10.0, double hi_db = 25.0) {
    if (!(bin_width_db > 0.0))
        throw std::invalid_argument("bin width must be positive");
    const auto nbins = static_cast<size_t>(std::ceil((hi_db - lo_db) / bin_width_db));
    std::vector<SnrBin> bins(nbins);
    std::vector<size_t> top1(nbins, 0), top3(nbins, 0);
    for (size_t i = 0; i < nbins; ++i)
        bins[i].center_db = lo_db + (static_cast<double>(i) + 0.5) * bin_width_db;
    for (const auto& r : results) {
        if (!std::isfinite(r.snr_db)) continue;
        if (r.snr_db < lo_db || r.snr_db > hi_db) continue;
        auto idx = static_cast<size_t>((r.snr_db - lo_db) / bin_width_db);
        idx = std::min(idx, nbins - 1);
        ++bins[idx].count;
        const size_t kmax = std::min<size_t>(3, r.ranking.size());
        for (size_t j = 0; j < kmax; ++j)
            if (r.ranking[j].first == r.true_label) {
                ++top3[idx];
                if (j == 0) ++top1[idx];
                break;
            }
    }
    for (size_t i = 0; i < nbins; ++i) {
        if (bins[i].count) {
            bins[i].top1 = static_cast<double>(top1[i]) / static_cast<double>(bins[i].count);
            bins[i].top3 = static_cast<double>(top3[i]) / static_cast<double>(bins[i].count);
        }
    }
    return bins;
}

struct ConfusionMatrix {
    size_t classes = 0;
    std::vector<uint64_t> counts;  // row = true, col = predicted

    uint64_t& at(size_t t, size_t p) { return counts[t * classes + p]; }
    uint64_t at(size_t t, size_t p) const { return counts[t * classes + p]; }
    uint64_t trace() const {
        uint64_t s = 0;
        for (size_t i = 0; i < classes; ++i) s += at(i, i);
        return s;
    }
    uint64_t total() const {
        uint64_t s = 0;
        for (uint64_t c : counts) s += c;
        return s;
    }
    uint64_t row_sum(size_t t) const {
        uint64_t s = 0;
        for (size_t p = 0; p < classes; ++p) s += at(t, p);
        return s;
    }
};

inline ConfusionMatrix confusion_matrix(const std::vector<EvalRecordResult>& results,
                                        size_t classes) {
    ConfusionMatrix cm;
    cm.classes = classes;
    cm.counts.assign(classes * classes, 0);
    for (const auto& r : results)
        cm.at(r.true_label, r.ranking.front().first) += 1;
    return cm;
}

namespace eval_detail {

inline std::string fmt_acc(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

}  // namespace eval_detail

// Emits confusion.csv, snr_curve.csv and summary.csv into out_dir.
inline void write_reports(const std::vector<EvalRecordResult>& results,
                          const std::vector<std::string>& label_names,
                          const std::string& out_dir, double bin_width_db = 5.0) {
    const size_t classes = label_names.size();
    const ConfusionMatrix cm = confusion_matrix(results, classes);

    {
        std::ofstream f(out_dir + "/confusion.csv", std::ios::binary);
        if (!f) throw std::runtime_error("cannot open output file: " + out_dir +
                                         "/confusion.csv");
        f << "true_id,true_name";
        for (const auto& n : label_names) f << ",pred_" << n;
        f << "\n";
        for (size_t t = 0; t < classes; ++t) {
            f << t << "," << label_names[t];
            for (size_t p = 0; p < classes; ++p) f << "," << cm.at(t, p);
            f << "\n";
        }
        if (!f) throw std::runtime_error("failed writing confusion.csv");
    }
    {
        std::ofstream f(out_dir + "/snr_curve.csv", std::ios::binary);
        if (!f) throw std::runtime_error("cannot open output file: " + out_dir +
                                         "/snr_curve.csv");
        f << "bin_center_db,count,top1_accuracy,top3_accuracy\n";
        char buf[32];
        for (const SnrBin& b : snr_binned_accuracy(results, bin_width_db)) {
            std::snprintf(buf, sizeof buf, "%.6g", b.center_db);
            f << buf << "," << b.count << ",";
            if (b.count)
                f << eval_detail::fmt_acc(b.top1) << "," << eval_detail::fmt_acc(b.top3);
            else
                f << ",";
            f << "\n";
        }
        if (!f) throw std::runtime_error("failed writing snr_curve.csv");
    }
    {
        std::ofstream f(out_dir + "/summary.csv", std::ios::binary);
        if (!f) throw std::runtime_error("cannot open output file: " + out_dir +
                                         "/summary.csv");
        f << "scope,label_id,name,count,top1,top3\n";
        const double t1 = top_k_accuracy(results, 1);
        const double t3 = top_k_accuracy(results, std::min<size_t>(3, classes));
        f << "overall_records,,," << results.size() << ","
          << eval_detail::fmt_acc(t1) << "," << eval_detail::fmt_acc(t3) << "\n";
        // Class-weighted average: mean over classes that have records.
        std::vector<size_t> n(classes, 0), c1(classes, 0), c3(classes, 0);
        for (const auto& r : results) {
            ++n[r.true_label];
            const size_t kmax = std::min<size_t>(3, r.ranking.size());
            for (size_t j = 0; j < kmax; ++j)
                if (r.ranking[j].first == r.true_label) {
                    ++c3[r.true_label];
                    if (j == 0) ++c1[r.true_label];
                    break;
                }
        }
        double m1 = 0.0, m3 = 0.0;
        size_t populated = 0;
        for (size_t t = 0; t < classes; ++t) {
            if (!n[t]) continue;
            ++populated;
            m1 += static_cast<double>(c1[t]) / static_cast<double>(n[t]);
            m3 += static_cast<double>(c3[t]) / static_cast<double>(n[t]);
        }
        if (populated) {
            m1 /= static_cast<double>(populated);
            m3 /= static_cast<double>(populated);
        }
        f << "overall_classes,,," << results.size() << ","
          << eval_detail::fmt_acc(m1) << "," << eval_detail::fmt_acc(m3) << "\n";
        for (size_t t = 0; t < classes; ++t) {
            f << "class," << t << "," << label_names[t] << "," << n[t] << ",";
            if (n[t])
                f << eval_detail::fmt_acc(static_cast<double>(c1[t]) /
                                          static_cast<double>(n[t]))
                  << ","
                  << eval_detail::fmt_acc(static_cast<double>(c3[t]) /
                                          static_cast<double>(n[t]));
            else
                f << ",";
            f << "\n";
        }
        if (!f) throw std::runtime_error("failed writing summary.csv");
    }
}

}  // namespace hfsig
