#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "obfugraph/cfg.hpp"

namespace obfugraph {

// Mean over classes present in truth of per-class recall. Classes with no
// support are excluded from the mean.
double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& truth);

// None -> 0, any obfuscation -> 1.
std::vector<int> to_binary_task(const std::vector<ObfuscationKind>& labels);

struct EvalReport {
    std::string task;     // "binary" | "multiclass"
    std::string mode;     // "all" | "obfuscated_only" (multiclass only)
    std::string dataset_id;
    std::string model_id;
    std::string feature_scheme;
    std::vector<std::string> class_names;
    size_t n_classes = 0;
    size_t sample_count = 0;
    double balanced_acc = 0.0;
    std::vector<double> per_class_recall;  // NaN-free; -1 for zero-support classes
    std::vector<size_t> confusion;         // row-major n_classes x n_classes, rows = truth

    size_t confusion_at(size_t truth_class, size_t predicted) const {
        return confusion[truth_class * n_classes + predicted];
    }
};

// Builds the confusion matrix, per-class recalls, and balanced accuracy
// from aligned label vectors (values index class_names).
EvalReport make_eval_report(const std::string& task, const std::string& mode,
                            const std::vector<std::string>& class_names,
                            const std::vector<int>& predictions,
                            const std::vector<int>& truth);

void write_report_json(std::ostream& out, const EvalReport& report);
void write_report_csv(std::ostream& out, const EvalReport& report);

}  // namespace obfugraph
