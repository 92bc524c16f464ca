#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfsig/nn.hpp"
#include "hfsig/rng.hpp"
#include "hfsig/shard.hpp"
#include "hfsig/tensor.hpp"

namespace hfsig {

struct TrainConfig {
    int epochs = 50;
    size_t batch_size = 64;
    double lr0 = 1e-3;
    double decay = 0.5;       // multiplied in every step_epochs epochs
    int step_epochs = 10;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    uint64_t seed = 1;
    unsigned threads = 0;
};

inline double scheduled_lr(const TrainConfig& cfg, int epoch) {
    return cfg.lr0 * std::pow(cfg.decay, epoch / cfg.step_epochs);
}

struct EpochStat {
    int epoch = 0;
    double train_loss = 0.0, val_loss = 0.0, val_acc = 0.0, lr = 0.0;
};

struct TrainResult {
    std::vector<EpochStat> history;
    int best_epoch = -1;
    double best_val_acc = -1.0;
};

namespace train_detail {

struct Adam {
    double beta1, beta2, eps;
    uint64_t t = 0;

    void step(Model& m, double lr) {
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for_each_param(m, [&](std::vector<double>& w, std::vector<double>& g,
                              std::vector<double>& mm, std::vector<double>& vv) {
            for (size_t i = 0; i < w.size(); ++i) {
                mm[i] = beta1 * mm[i] + (1.0 - beta1) * g[i];
                vv[i] = beta2 * vv[i] + (1.0 - beta2) * g[i] * g[i];
                w[i] -= lr * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + eps);
            }
        });
    }
};

inline void fill_batch(const std::vector<DatasetRecord>& records,
                       const std::vector<size_t>& order, size_t begin, size_t count,
                       Tensor3& x, std::vector<uint16_t>& labels) {
    const size_t n = records.front().iq.size() / 2;
    x.resize(count, 2, n);
    labels.resize(count);
    for (size_t bi = 0; bi < count; ++bi) {
        const DatasetRecord& r = records[order[begin + bi]];
        labels[bi] = r.label_id;
        double* xi = x.row(bi, 0);
        double* xq = x.row(bi, 1);
        for (size_t j = 0; j < n; ++j) {
            xi[j] = static_cast<double>(r.iq[2 * j]);
            xq[j] = static_cast<double>(r.iq[2 * j + 1]);
        }
    }
}

struct EvalStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

inline EvalStats eval_pass(Model& m, const std::vector<DatasetRecord>& records,
                           size_t batch_size, Workspace& ws, unsigned threads) {
    m.training = false;
    EvalStats st;
    size_t correct = 0;
    std::vector<size_t> order(records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Tensor3 x;
    std::vector<uint16_t> labels;
    for (size_t begin = 0; begin < records.size(); begin += batch_size) {
        const size_t count = std::min(batch_size, records.size() - begin);
        fill_batch(records, order, begin, count, x, labels);
        const Tensor3& probs = forward(m, x, ws, nullptr, threads);
        for (size_t bi = 0; bi < count; ++bi) {
            const double* pr = probs.batch(bi);
            size_t arg = 0;
            double best = pr[0];
            for (size_t j = 1; j < m.class_count; ++j)
                if (pr[j] > best) {
                    best = pr[j];
                    arg = j;
                }
            if (arg == labels[bi]) ++correct;
            st.loss += -std::log(std::max(pr[labels[bi]], 1e-300));
        }
    }
    st.loss /= static_cast<double>(records.size());
    st.accuracy = static_cast<double>(correct) / static_cast<double>(records.size());
    return st;
}

inline std::vector<double> snapshot_params(Model& m) {
    std::vector<double> flat;
    flat.reserve(m.param_count());
    for_each_param(m, [&flat](std::vector<double>& w, std::vector<double>&,
                              std::vector<double>&, std::vector<double>&) {
        flat.insert(flat.end(), w.begin(), w.end());
    });
    return flat;
}

inline void restore_params(Model& m, const std::vector<double>& flat) {
    size_t off = 0;
    for_each_param(m, [&](std::vector<double>& w, std::vector<double>&,
                          std::vector<double>&, std::vector<double>&) {
        std::copy(flat.begin() + static_cast<ptrdiff_t>(off),
                  flat.begin() + static_cast<ptrdiff_t>(off + w.size()), w.begin());
        off += w.size();
    });
}

}  // namespace train_detail

// Seeded run: shuffling, dropout and init all derive from cfg.seed, so a
// repeated run on the same build reproduces the log bit for bit.  The
// model ends up holding the best-validation-accuracy parameters.
inline TrainResult train_model(Model& model,
                               const std::vector<DatasetRecord>& train_records,
                               const std::vector<DatasetRecord>& val_records,
                               const TrainConfig& cfg, std::ostream* csv_log,
                               std::ostream* progress = nullptr) {
    if (train_records.empty() || val_records.empty())
        throw std::invalid_argument("training and validation shards must be nonempty");
    if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (cfg.decay <= 0.0 || cfg.decay > 1.0)
        throw std::invalid_argument("decay must be in (0, 1]");
    for (const auto& r : train_records)
        if (r.label_id >= model.class_count)
            throw std::invalid_argument("training label outside model class count");

    SeededRng shuffle_rng(cfg.seed, 0x5348554646ull);  // "SHUFF"
    SeededRng dropout_rng(cfg.seed, 0x44524f50ull);    // "DROP"
    train_detail::Adam adam{cfg.beta1, cfg.beta2, cfg.eps};
    Workspace ws;
    TrainResult result;
    std::vector<size_t> order(train_records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> best_params;

    if (csv_log) (*csv_log) << "epoch,train_loss,val_loss,val_acc,lr\n";
    char line[256];
    Tensor3 x;
    std::vector<uint16_t> labels;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = scheduled_lr(cfg, epoch);
        model.training = true;
        // Fisher-Yates with the run's shuffle stream
        for (size_t i = order.size(); i > 1; --i) {
            const size_t j = shuffle_rng.below(i);
            std::swap(order[i - 1], order[j]);
        }
        double loss_sum = 0.0;
        size_t seen = 0;
        int batch_index = 0;
        for (size_t begin = 0; begin < train_records.size();
             begin += cfg.batch_size, ++batch_index) {
            const size_t count = std::min(cfg.batch_size, train_records.size() - begin);
            train_detail::fill_batch(train_records, order, begin, count, x, labels);
            zero_grads(model);
            model.training = true;
            const double loss =
                loss_and_backward(model, x, labels, ws, &dropout_rng, cfg.threads);
            if (!std::isfinite(loss))
                throw std::runtime_error("diverged at epoch " + std::to_string(epoch) +
                                         " batch " + std::to_string(batch_index));
            loss_sum += loss * static_cast<double>(count);
            seen += count;
            adam.step(model, lr);
        }
        const auto val = train_detail::eval_pass(model, val_records, cfg.batch_size,
                                                 ws, cfg.threads);
        EpochStat st;
        st.epoch = epoch;
        st.train_loss = loss_sum / static_cast<double>(seen);
        st.val_loss = val.loss;
        st.val_acc = val.accuracy;
        st.lr = lr;
        result.history.push_back(st);
        if (st.val_acc > result.best_val_acc) {
            result.best_val_acc = st.val_acc;
            result.best_epoch = epoch;
            best_params = train_detail::snapshot_params(model);
        }
        if (csv_log) {
            std::snprintf(line, sizeof line, "%d,%.9e,%.9e,%.9f,%.9e\n", st.epoch,
                          st.train_loss, st.val_loss, st.val_acc, st.lr);
            (*csv_log) << line;
            csv_log->flush();
        }
        if (progress) {
            std::snprintf(line, sizeof line,
                          "epoch %3d/%d  train_loss %.4f  val_loss %.4f  val_acc %.4f  lr %.2e\n",
                          epoch + 1, cfg.epochs, st.train_loss, st.val_loss,
                          st.val_acc, lr);
            (*progress) << line;
            progress->flush();
        }
    }
    if (!best_params.empty()) train_detail::restore_params(model, best_params);
    model.training = false;
    return result;
}

}  // namespace hfsig
