#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <vector>

#include "hfsig/eval.hpp"
#include "hfsig/rng.hpp"
#include "test_util.hpp"

using namespace hfsig;

namespace {

// A result whose true label sits at the given 1-based rank among `classes`.
EvalRecordResult at_rank(size_t rank, size_t classes, uint16_t true_label,
                         double snr = std::nan("")) {
    EvalRecordResult r;
    r.true_label = true_label;
    r.snr_db = snr;
    double p = 0.9;
    for (size_t i = 1; i <= classes; ++i) {
        uint16_t label;
        if (i == rank) {
            label = true_label;
        } else {
            label = static_cast<uint16_t>((true_label + i) % classes);
            if (label == true_label) label = static_cast<uint16_t>((label + 1) % classes);
        }
        r.ranking.emplace_back(label, p);
        p *= 0.5;
    }
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("top-k accuracy over hand-built rankings") {
    std::vector<EvalRecordResult> res = {at_rank(1, 6, 0), at_rank(2, 6, 1),
                                         at_rank(5, 6, 2)};
    REQUIRE(top_k_accuracy(res, 1) == Catch::Approx(1.0 / 3.0));
    REQUIRE(top_k_accuracy(res, 2) == Catch::Approx(2.0 / 3.0));
    REQUIRE(top_k_accuracy(res, 3) == Catch::Approx(2.0 / 3.0));
    REQUIRE(top_k_accuracy(res, 4) == Catch::Approx(2.0 / 3.0));
    REQUIRE(top_k_accuracy(res, 5) == Catch::Approx(1.0));
    REQUIRE(top_k_accuracy(res, 6) == Catch::Approx(1.0));
    // monotone in k
    for (size_t k = 2; k <= 6; ++k)
        REQUIRE(top_k_accuracy(res, k) >= top_k_accuracy(res, k - 1));
    REQUIRE_THROWS_AS(top_k_accuracy(res, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(top_k_accuracy(res, 7), std::invalid_argument);
    REQUIRE_THROWS_AS(top_k_accuracy({}, 1), std::invalid_argument);
}

TEST_CASE("evaluate: a zero model yields uniform probabilities, ties break low") {
    Model m = build_model({{ArchStep::Kind::dense, 3, 0, 0.0}}, 2, 4096);
    SeededRng rng(5, 0);
    std::vector<DatasetRecord> recs(5);
    for (size_t i = 0; i < recs.size(); ++i) {
        recs[i].label_id = static_cast<uint16_t>(i % 3);
        recs[i].iq.resize(2 * 4096);
        for (auto& v : recs[i].iq) v = static_cast<float>(rng.normal());
    }
    const auto res = evaluate(m, recs, {}, 1, 2);
    REQUIRE(res.size() == 5);
    for (size_t i = 0; i < res.size(); ++i) {
        REQUIRE(res[i].true_label == recs[i].label_id);
        REQUIRE(res[i].ranking.size() == 3);
        double sum = 0.0;
        for (size_t j = 0; j < 3; ++j) {
            REQUIRE(res[i].ranking[j].first == j);  // equal probs: label order
            REQUIRE(res[i].ranking[j].second == Catch::Approx(1.0 / 3.0));
            sum += res[i].ranking[j].second;
        }
        REQUIRE(sum == Catch::Approx(1.0));
        REQUIRE(std::isnan(res[i].snr_db));
    }
    // label 0 is always the "prediction" under ties
    REQUIRE(top_k_accuracy(res, 1) == Catch::Approx(2.0 / 5.0));
}

TEST_CASE("evaluate validates inputs") {
    Model m = build_model({{ArchStep::Kind::dense, 3, 0, 0.0}}, 2, 4096);
    std::vector<DatasetRecord> recs(1);
    recs[0].label_id = 3;  // out of range for 3 classes
    recs[0].iq.assign(2 * 4096, 0.1f);
    REQUIRE_THROWS(evaluate(m, recs));
    recs[0].label_id = 0;
    std::vector<double> snrs(2, 10.0);
    REQUIRE_THROWS(evaluate(m, recs, snrs));  // snr count mismatch
}

TEST_CASE("snr bins: edges, clamping, skipping") {
    std::vector<EvalRecordResult> res;
    res.push_back(at_rank(1, 4, 0, -10.0));  // first bin lower edge
    res.push_back(at_rank(2, 4, 1, -7.6));   // still first bin
    res.push_back(at_rank(1, 4, 2, 0.0));    // third bin [-5,0) is not it: 0 -> [0,5)
    res.push_back(at_rank(4, 4, 3, 24.9));   // last bin
    res.push_back(at_rank(1, 4, 0, 25.0));   // upper edge joins last bin
    res.push_back(at_rank(1, 4, 1));         // nan snr: skipped

    const auto bins = snr_binned_accuracy(res, 5.0);
    REQUIRE(bins.size() == 7);
    for (size_t b = 0; b < bins.size(); ++b)
        REQUIRE(bins[b].center_db == Catch::Approx(-10.0 + 5.0 * b + 2.5));

    REQUIRE(bins[0].count == 2);
    REQUIRE(bins[0].top1 == Catch::Approx(0.5));
    REQUIRE(bins[0].top3 == Catch::Approx(1.0));
    REQUIRE(bins[1].count == 0);
    REQUIRE(bins[2].count == 1);
    REQUIRE(bins[2].top1 == Catch::Approx(1.0));
    REQUIRE(bins[6].count == 2);
    REQUIRE(bins[6].top1 == Catch::Approx(0.5));
    REQUIRE(bins[6].top3 == Catch::Approx(0.5));

    size_t total = 0;
    for (const auto& b : bins) total += b.count;
    REQUIRE(total == 5);

    REQUIRE_THROWS(snr_binned_accuracy(res, 0.0));
}

TEST_CASE("confusion matrix agrees with top-1") {
    std::vector<EvalRecordResult> res;
    SeededRng rng(77, 3);
    for (int i = 0; i < 200; ++i) {
        const auto label = static_cast<uint16_t>(rng.below(5));
        const size_t rank = 1 + rng.below(5);
        res.push_back(at_rank(rank, 5, label));
    }
    const ConfusionMatrix cm = confusion_matrix(res, 5);
    REQUIRE(cm.total() == 200);
    REQUIRE(static_cast<double>(cm.trace()) / cm.total() ==
            Catch::Approx(top_k_accuracy(res, 1)));
    for (size_t t = 0; t < 5; ++t) {
        uint64_t row = 0;
        for (size_t p = 0; p < 5; ++p) row += cm.at(t, p);
        REQUIRE(row == cm.row_sum(t));
    }
}

TEST_CASE("report files") {
    const std::string dir = tu::scratch_dir("reports");
    std::vector<EvalRecordResult> res;
    res.push_back(at_rank(1, 3, 0, -8.0));
    res.push_back(at_rank(2, 3, 0, -8.0));
    res.push_back(at_rank(1, 3, 1, 12.0));
    res.push_back(at_rank(3, 3, 2, 24.0));
    write_reports(res, {"alpha", "beta", "gamma"}, dir, 5.0);

    const std::string conf = slurp(dir + "/confusion.csv");
    REQUIRE(conf.find("true_id,true_name,pred_alpha,pred_beta,pred_gamma\n") == 0);
    REQUIRE(conf.find("\n0,alpha,1,") != std::string::npos);

    const std::string curve = slurp(dir + "/snr_curve.csv");
    REQUIRE(curve.find("bin_center_db,count,top1_accuracy,top3_accuracy\n") == 0);
    // empty bin rows keep the accuracy cells blank
    REQUIRE(curve.find("\n-2.5,0,,\n") != std::string::npos);
    REQUIRE(curve.find("\n-7.5,2,0.500000000,1.000000000\n") != std::string::npos);
    REQUIRE(curve.find("\n22.5,1,0.000000000,1.000000000\n") != std::string::npos);

    const std::string summary = slurp(dir + "/summary.csv");
    REQUIRE(summary.find("scope,label_id,name,count,top1,top3\n") == 0);
    REQUIRE(summary.find("overall_records,,,4,0.500000000,1.000000000\n") !=
            std::string::npos);
    REQUIRE(summary.find("class,0,alpha,2,0.500000000,1.000000000\n") !=
            std::string::npos);
    REQUIRE(summary.find("class,2,gamma,1,0.000000000,1.000000000\n") !=
            std::string::npos);
    // overall_classes: mean of per-class top1 = (0.5 + 1 + 0) / 3
    REQUIRE(summary.find("overall_classes,,,4,0.500000000,1.000000000\n") !=
            std::string::npos);
}
