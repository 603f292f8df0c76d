#include <gtest/gtest.h>

#include <cmath>

#include "gala/pseudo_label.hpp"

using namespace gala;

namespace {

Eigen::VectorXd probs2(double a, double b) {
    Eigen::VectorXd p(2);
    p << a, b;
    return p;
}

std::vector<ConfidenceRecord> three_records() {
    return {make_record(0, probs2(0.7, 0.3)), make_record(1, probs2(0.6, 0.4)),
            make_record(2, probs2(0.2, 0.8))};
}

Graph toy_graph(int label_or_neg) {
    Eigen::MatrixXd attrs = Eigen::MatrixXd::Ones(3, 2);
    return make_graph(3, {{0, 1}, {1, 2}}, attrs,
                      label_or_neg < 0 ? std::optional<int>{} : std::optional<int>{label_or_neg});
}

}  // namespace

TEST(ConfidenceRecord, ArgmaxAndTieBreaking) {
    const ConfidenceRecord r = make_record(4, probs2(0.2, 0.8));
    EXPECT_EQ(r.graph_index, 4);
    EXPECT_EQ(r.predicted_class, 1);
    EXPECT_DOUBLE_EQ(r.confidence, 0.8);
    // exact tie goes to the lowest class index
    const ConfidenceRecord tie = make_record(0, probs2(0.5, 0.5));
    EXPECT_EQ(tie.predicted_class, 0);
}

TEST(ClassMax, PerClassMaximaAndAbsentClasses) {
    const auto maxima = class_max(three_records(), 3);
    ASSERT_EQ(maxima.size(), 3u);
    EXPECT_DOUBLE_EQ(*maxima[0], 0.7);
    EXPECT_DOUBLE_EQ(*maxima[1], 0.8);
    EXPECT_FALSE(maxima[2].has_value());
    EXPECT_THROW(class_max({}, 2), ArgumentError);
    EXPECT_THROW(class_max(three_records(), 1), ContractError);  // class 1 out of range
}

TEST(CurriculumSchedule, LinearRampClampsAtBothEnds) {
    CurriculumSchedule s{0.95, 0.99, 5};
    EXPECT_DOUBLE_EQ(s.alpha(0), 0.95);
    EXPECT_DOUBLE_EQ(s.alpha(4), 0.99);
    EXPECT_DOUBLE_EQ(s.alpha(2), 0.97);
    EXPECT_DOUBLE_EQ(s.alpha(-3), 0.95);
    EXPECT_DOUBLE_EQ(s.alpha(100), 0.99);
    for (int e = 1; e < 5; ++e) EXPECT_GE(s.alpha(e), s.alpha(e - 1));
    // default schedule has a single epoch: always at alpha_start
    CurriculumSchedule one{0.7, 0.99, 1};
    EXPECT_DOUBLE_EQ(one.alpha(0), 0.7);
}

TEST(Thresholds, ScalesMaximaAndFallsBackForAbsent) {
    const auto maxima = class_max(three_records(), 3);
    CurriculumSchedule s{0.95, 0.99, 1};
    const std::vector<double> tau = thresholds(maxima, 0, s);
    ASSERT_EQ(tau.size(), 3u);
    EXPECT_DOUBLE_EQ(tau[0], 0.7 * 0.95);
    EXPECT_DOUBLE_EQ(tau[1], 0.8 * 0.95);
    EXPECT_DOUBLE_EQ(tau[2], 0.95);  // absent class: plain alpha
}

TEST(SelectConfident, StrictInequalityAtTheBoundary) {
    // record sitting exactly on its threshold must be excluded
    std::vector<ConfidenceRecord> records = {make_record(0, probs2(0.855, 0.145))};
    const std::vector<double> tau = {0.855, 0.9};
    EXPECT_TRUE(select_confident(records, tau).empty());
    records[0] = make_record(0, probs2(0.8550000001, 0.1449999999));
    const auto picked = select_confident(records, tau);
    ASSERT_EQ(picked.size(), 1u);
    EXPECT_EQ(picked[0].graph_index, 0);
    EXPECT_EQ(picked[0].label, 0);
    EXPECT_THROW(select_confident({make_record(0, probs2(0.1, 0.9))}, {0.9}), ContractError);
}

TEST(SelectConfident, ClassMaximumAlwaysSelectedWhileAlphaBelowOne) {
    // tau_c = M_c * alpha < M_c whenever alpha < 1, so the per-class argmax
    // record always clears its own threshold: every predicted class is covered
    const auto records = three_records();
    const auto maxima = class_max(records, 2);
    CurriculumSchedule s{0.95, 0.99, 10};
    for (int epoch = 0; epoch < 10; ++epoch) {
        const auto picked = select_confident(records, thresholds(maxima, epoch, s));
        bool has0 = false, has1 = false;
        for (const PseudoLabel& p : picked) (p.label == 0 ? has0 : has1) = true;
        EXPECT_TRUE(has0) << "epoch " << epoch;
        EXPECT_TRUE(has1) << "epoch " << epoch;
    }
}

TEST(SelectConfident, FrozenRecordsGiveNonGrowingSetOverEpochs) {
    RngStream rng(17);
    std::vector<ConfidenceRecord> records;
    for (int i = 0; i < 60; ++i) {
        const double p = 0.5 + 0.5 * rng.uniform();
        records.push_back(make_record(i, rng.uniform() < 0.5 ? probs2(p, 1 - p) : probs2(1 - p, p)));
    }
    const auto maxima = class_max(records, 2);
    CurriculumSchedule s{0.9, 0.99, 8};
    size_t prev = records.size() + 1;
    for (int epoch = 0; epoch < 8; ++epoch) {
        const size_t count = select_confident(records, thresholds(maxima, epoch, s)).size();
        EXPECT_LE(count, prev) << "epoch " << epoch;
        prev = count;
    }
}

TEST(SelectConfident, InvariantUnderRecordPermutation) {
    auto records = three_records();
    const auto maxima = class_max(records, 2);
    const auto tau = thresholds(maxima, 0, CurriculumSchedule{0.9, 0.99, 1});
    auto sorted_pairs = [](std::vector<PseudoLabel> v) {
        std::vector<std::pair<int, int>> out;
        for (const PseudoLabel& p : v) out.emplace_back(p.graph_index, p.label);
        std::sort(out.begin(), out.end());
        return out;
    };
    const auto base = sorted_pairs(select_confident(records, tau));
    std::reverse(records.begin(), records.end());
    EXPECT_EQ(sorted_pairs(select_confident(records, tau)), base);
}

TEST(PseudoLabelLoss, UniformModelGivesLogC) {
    // zero-weight classifier leaves logits at zero: every class has prob 1/C
    Dataset d;
    d.num_classes = 2;
    d.attribute_dim = 2;
    d.graphs.push_back(toy_graph(-1));
    d.graphs.push_back(toy_graph(-1));
    ClassifierModel m = make_classifier(2, 2, 1, 3, 8);
    for (Param* p : m.params()) p->value.setZero();

    const std::vector<PseudoLabel> labels = {{0, 0}, {1, 1}};
    zero_grads(m.params());
    const double loss = pseudo_label_loss(labels, d, m);
    EXPECT_NEAR(loss, std::log(2.0), 1e-12);
    EXPECT_NEAR(pseudo_label_loss({}, d, m), 0.0, 0.0);
}

TEST(PseudoLabelLoss, MeansOverSelectionAndAccumulatesGradients) {
    Dataset d;
    d.num_classes = 2;
    d.attribute_dim = 2;
    d.graphs.push_back(toy_graph(-1));
    ClassifierModel m = make_classifier(2, 2, 7, 3, 8);
    RngStream nudge(3);
    for (Param* p : m.params())
        p->value += 0.05 * nudge.gaussian_matrix(p->value.rows(), p->value.cols());

    zero_grads(m.params());
    const double single = pseudo_label_loss({{0, 0}}, d, m);
    double gnorm_single = 0.0;
    for (Param* p : m.params()) gnorm_single += p->grad.squaredNorm();

    // duplicating the same pseudo-label keeps the mean loss and gradient equal
    zero_grads(m.params());
    const double doubled = pseudo_label_loss({{0, 0}, {0, 0}}, d, m);
    double gnorm_double = 0.0;
    for (Param* p : m.params()) gnorm_double += p->grad.squaredNorm();
    EXPECT_NEAR(doubled, single, 1e-12);
    EXPECT_NEAR(gnorm_double, gnorm_single, 1e-9);
    EXPECT_GT(gnorm_single, 0.0);
}

TEST(ThresholdDiagnostics, CountsAndShares) {
    const auto records = three_records();
    const auto maxima = class_max(records, 2);
    const auto tau = thresholds(maxima, 0, CurriculumSchedule{0.9, 0.99, 1});
    const auto confident = select_confident(records, tau);
    const auto rows = threshold_diagnostics(3, maxima, tau, confident);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].epoch, 3);
    EXPECT_EQ(rows[0].cls, 0);
    EXPECT_DOUBLE_EQ(*rows[0].class_maximum, 0.7);
    EXPECT_DOUBLE_EQ(rows[0].tau, 0.7 * 0.9);
    int total = 0;
    double share = 0.0;
    for (const auto& r : rows) {
        total += r.confident_count;
        share += r.class_share;
    }
    EXPECT_EQ(total, static_cast<int>(confident.size()));
    EXPECT_NEAR(share, confident.empty() ? 0.0 : 1.0, 1e-12);
    // empty confident set keeps shares at zero
    const auto empty_rows = threshold_diagnostics(0, maxima, tau, {});
    EXPECT_DOUBLE_EQ(empty_rows[0].class_share, 0.0);
    EXPECT_EQ(empty_rows[0].confident_count, 0);
}

TEST(ComputeRecords, MatchesDirectClassify) {
    Dataset d;
    d.num_classes = 2;
    d.attribute_dim = 2;
    d.graphs.push_back(toy_graph(-1));
    d.graphs.push_back(make_graph(4, {{0, 1}, {2, 3}}, Eigen::MatrixXd::Random(4, 2), std::nullopt));
    ClassifierModel m = make_classifier(2, 2, 11, 3, 8);
    const auto records = compute_records(d, m);
    ASSERT_EQ(records.size(), 2u);
    for (size_t i = 0; i < records.size(); ++i) {
        EXPECT_EQ(records[i].graph_index, static_cast<int>(i));
        EXPECT_TRUE(records[i].probs.isApprox(classify(d.graphs[i], m).probs));
        EXPECT_DOUBLE_EQ(records[i].confidence, records[i].probs.maxCoeff());
    }
}

TEST(SelectConfident, ScaleFreeUnderCommonConfidenceShift) {
    // multiplying every confidence and every maximum by the same factor keeps
    // the selected set identical: the rule is scale-free by construction
    std::vector<ConfidenceRecord> records;
    for (int i = 0; i < 10; ++i) {
        const double p = 0.55 + 0.04 * i;
        records.push_back(make_record(i, probs2(p, 1 - p)));
    }
    const auto maxima = class_max(records, 2);
    const auto tau = thresholds(maxima, 0, CurriculumSchedule{0.9, 0.99, 1});

    const double k = 0.5;
    std::vector<ConfidenceRecord> scaled = records;
    std::vector<std::optional<double>> scaled_maxima = maxima;
    for (auto& r : scaled) r.confidence *= k;
    for (auto& m : scaled_maxima)
        if (m) *m *= k;
    std::vector<double> scaled_tau = thresholds(scaled_maxima, 0, CurriculumSchedule{0.9, 0.99, 1});
    // absent-class fallback tau is not scaled; restrict to present classes
    const auto base = select_confident(records, tau);
    const auto after = select_confident(scaled, scaled_tau);
    ASSERT_EQ(base.size(), after.size());
    for (size_t i = 0; i < base.size(); ++i) {
        EXPECT_EQ(base[i].graph_index, after[i].graph_index);
        EXPECT_EQ(base[i].label, after[i].label);
    }
}
