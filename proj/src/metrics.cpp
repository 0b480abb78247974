#include "obfugraph/metrics.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace obfugraph {

double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& truth) {
    if (predictions.size() != truth.size())
        throw std::invalid_argument("balanced_accuracy: length mismatch");
    if (truth.empty()) throw std::invalid_argument("balanced_accuracy: empty input");

    int max_class = 0;
    for (int t : truth) max_class = std::max(max_class, t);
    for (int p : predictions) max_class = std::max(max_class, p);
    std::vector<size_t> support(static_cast<size_t>(max_class) + 1, 0);
    std::vector<size_t> hits(static_cast<size_t>(max_class) + 1, 0);
    for (size_t i = 0; i < truth.size(); ++i) {
        ++support[static_cast<size_t>(truth[i])];
        if (predictions[i] == truth[i]) ++hits[static_cast<size_t>(truth[i])];
    }
    double total = 0.0;
    size_t present = 0;
    for (size_t c = 0; c < support.size(); ++c) {
        if (support[c] == 0) continue;
        total += static_cast<double>(hits[c]) / static_cast<double>(support[c]);
        ++present;
    }
    return total / static_cast<double>(present);
}

std::vector<int> to_binary_task(const std::vector<ObfuscationKind>& labels) {
    std::vector<int> out;
    out.reserve(labels.size());
    for (auto kind : labels) out.push_back(kind == ObfuscationKind::None ? 0 : 1);
    return out;
}

EvalReport make_eval_report(const std::string& task, const std::string& mode,
                            const std::vector<std::string>& class_names,
                            const std::vector<int>& predictions,
                            const std::vector<int>& truth) {
    if (predictions.size() != truth.size())
        throw std::invalid_argument("make_eval_report: length mismatch");
    if (truth.empty()) throw std::invalid_argument("make_eval_report: empty sample set");

    EvalReport report;
    report.task = task;
    report.mode = mode;
    report.class_names = class_names;
    report.n_classes = class_names.size();
    report.sample_count = truth.size();
    report.confusion.assign(report.n_classes * report.n_classes, 0);
    for (size_t i = 0; i < truth.size(); ++i) {
        auto t = static_cast<size_t>(truth[i]);
        auto p = static_cast<size_t>(predictions[i]);
        if (t >= report.n_classes || p >= report.n_classes)
            throw std::invalid_argument("make_eval_report: label outside class list");
        ++report.confusion[t * report.n_classes + p];
    }

    report.per_class_recall.assign(report.n_classes, -1.0);
    double total = 0.0;
    size_t present = 0;
    for (size_t c = 0; c < report.n_classes; ++c) {
        size_t support = 0;
        for (size_t p = 0; p < report.n_classes; ++p) support += report.confusion_at(c, p);
        if (support == 0) continue;
        double recall = static_cast<double>(report.confusion_at(c, c)) /
                        static_cast<double>(support);
        report.per_class_recall[c] = recall;
        total += recall;
        ++present;
    }
    report.balanced_acc = total / static_cast<double>(present);
    return report;
}

void write_report_json(std::ostream& out, const EvalReport& report) {
    nlohmann::ordered_json j;
    j["task"] = report.task;
    j["mode"] = report.mode;
    j["dataset_id"] = report.dataset_id;
    j["model_id"] = report.model_id;
    j["feature_scheme"] = report.feature_scheme;
    j["class_names"] = report.class_names;
    j["sample_count"] = report.sample_count;
    j["balanced_accuracy"] = report.balanced_acc;
    j["per_class_recall"] = report.per_class_recall;
    nlohmann::ordered_json confusion = nlohmann::ordered_json::array();
    for (size_t t = 0; t < report.n_classes; ++t) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (size_t p = 0; p < report.n_classes; ++p) row.push_back(report.confusion_at(t, p));
        confusion.push_back(std::move(row));
    }
    j["confusion_matrix"] = std::move(confusion);
    out << j.dump(2) << '\n';
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
    out << "task,mode,dataset,model,feature_scheme,class,recall,support\n";
    for (size_t c = 0; c < report.n_classes; ++c) {
        size_t support = 0;
        for (size_t p = 0; p < report.n_classes; ++p) support += report.confusion_at(c, p);
        out << report.task << ',' << report.mode << ',' << report.dataset_id << ','
            << report.model_id << ',' << report.feature_scheme << ',' << report.class_names[c]
            << ',' << report.per_class_recall[c] << ',' << support << '\n';
    }
    out << report.task << ',' << report.mode << ',' << report.dataset_id << ','
        << report.model_id << ',' << report.feature_scheme << ",__balanced_accuracy__,"
        << report.balanced_acc << ',' << report.sample_count << '\n';
}

}  // namespace obfugraph
