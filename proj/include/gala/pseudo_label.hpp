#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "gala/classifier.hpp"
#include "gala/graph.hpp"

namespace gala {

struct ConfidenceRecord {
    int graph_index = 0;
    Eigen::VectorXd probs;
    double confidence = 0.0;  // max_c probs[c]
    int predicted_class = 0;  // argmax, lowest index wins ties
};

inline ConfidenceRecord make_record(int graph_index, const Eigen::VectorXd& probs) {
    ConfidenceRecord r;
    r.graph_index = graph_index;
    r.probs = probs;
    r.confidence = probs.maxCoeff();
    r.predicted_class = 0;
    for (Eigen::Index c = 1; c < probs.size(); ++c)
        if (probs(c) > probs(r.predicted_class)) r.predicted_class = static_cast<int>(c);
    return r;
}

inline std::vector<ConfidenceRecord> compute_records(const Dataset& d, const ClassifierModel& m) {
    std::vector<ConfidenceRecord> records;
    records.reserve(d.graphs.size());
    for (size_t i = 0; i < d.graphs.size(); ++i)
        records.push_back(make_record(static_cast<int>(i), classify(d.graphs[i], m).probs));
    return records;
}

// Linear confidence curriculum from alpha_start at epoch 0 to alpha_end at the
// final epoch, clamped outside that range.
struct CurriculumSchedule {
    double alpha_start = 0.95;
    double alpha_end = 0.99;
    int total_epochs = 1;

    double alpha(int epoch) const {
        const double denom = std::max(1, total_epochs - 1);
        const double a = alpha_start + (alpha_end - alpha_start) * epoch / denom;
        return std::clamp(a, alpha_start, alpha_end);
    }
};

// Per-class maximum confidence; classes never predicted stay empty ("absent").
inline std::vector<std::optional<double>> class_max(const std::vector<ConfidenceRecord>& records,
                                                    int num_classes) {
    if (records.empty()) throw ArgumentError("class_max needs at least one record");
    std::vector<std::optional<double>> m(num_classes);
    for (const ConfidenceRecord& r : records) {
        if (r.predicted_class < 0 || r.predicted_class >= num_classes)
            throw ContractError("record predicts a class outside [0, C)");
        auto& slot = m[r.predicted_class];
        if (!slot || r.confidence > *slot) slot = r.confidence;
    }
    return m;
}

// tau_c = M_c * alpha(e); absent classes fall back to tau_c = alpha(e).
inline std::vector<double> thresholds(const std::vector<std::optional<double>>& class_maxima,
                                      int epoch, const CurriculumSchedule& sched) {
    const double a = sched.alpha(epoch);
    std::vector<double> tau(class_maxima.size());
    for (size_t c = 0; c < class_maxima.size(); ++c)
        tau[c] = class_maxima[c] ? *class_maxima[c] * a : a;
    return tau;
}

struct PseudoLabel {
    int graph_index = 0;
    int label = 0;
};

// Keep records whose confidence strictly exceeds their class threshold.
inline std::vector<PseudoLabel> select_confident(const std::vector<ConfidenceRecord>& records,
                                                 const std::vector<double>& tau) {
    std::vector<PseudoLabel> confident;
    for (const ConfidenceRecord& r : records) {
        if (r.predicted_class >= static_cast<int>(tau.size()))
            throw ContractError("threshold vector shorter than predicted class range");
        if (r.confidence > tau[r.predicted_class])
            confident.push_back({r.graph_index, r.predicted_class});
    }
    return confident;
}

// Mean negative log-probability of the pseudo-labels; gradients accumulate
// into the model. Empty set contributes zero loss and no gradients.
inline double pseudo_label_loss(const std::vector<PseudoLabel>& confident, const Dataset& d,
                                ClassifierModel& m) {
    if (confident.empty()) return 0.0;
    const double inv = 1.0 / static_cast<double>(confident.size());
    double loss = 0.0;
    for (const PseudoLabel& p : confident) {
        const ClassifierTrace t = classifier_forward(d.graphs[p.graph_index], m);
        loss += cross_entropy(t.logits, p.label) * inv;
        classifier_backward(t, Eigen::VectorXd(cross_entropy_dlogits(t.probs, p.label) * inv), m);
    }
    return loss;
}

// One row per (epoch, class) for the selection diagnostics CSV.
struct ThresholdDiagnostic {
    int epoch = 0;
    int cls = 0;
    std::optional<double> class_maximum;
    double tau = 0.0;
    int confident_count = 0;
    double class_share = 0.0;  // fraction of the confident set carrying this class
};

inline std::vector<ThresholdDiagnostic> threshold_diagnostics(
    int epoch, const std::vector<std::optional<double>>& class_maxima,
    const std::vector<double>& tau, const std::vector<PseudoLabel>& confident) {
    std::vector<int> counts(class_maxima.size(), 0);
    for (const PseudoLabel& p : confident) ++counts[p.label];
    std::vector<ThresholdDiagnostic> rows;
    for (size_t c = 0; c < class_maxima.size(); ++c) {
        ThresholdDiagnostic row;
        row.epoch = epoch;
        row.cls = static_cast<int>(c);
        row.class_maximum = class_maxima[c];
        row.tau = tau[c];
        row.confident_count = counts[c];
        row.class_share = confident.empty() ? 0.0 : static_cast<double>(counts[c]) / confident.size();
        rows.push_back(row);
    }
    return rows;
}

}  // namespace gala
