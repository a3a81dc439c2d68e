#ifndef LUPIHCRF_EVAL_HPP
#define LUPIHCRF_EVAL_HPP

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lupihcrf/seqdata.hpp"

namespace lupihcrf {

struct EvalReport {
    double accuracy = 0.0;
    Eigen::MatrixXi confusion;        // rows = true label, cols = predicted
    std::vector<double> per_class_accuracy;
    std::vector<std::string> label_vocab;
};

/// Score (id -> predicted label index) assignments against the dataset's
/// ground truth. Every prediction id must exist in the dataset.
inline EvalReport evaluate(const std::vector<std::pair<std::string, int>>& predictions,
                           const Dataset& data) {
    std::map<std::string, int> truth;
    for (const auto& s : data.samples) truth[s.id] = s.label;

    const int L = data.n_labels();
    EvalReport rep;
    rep.label_vocab = data.label_vocab;
    rep.confusion = Eigen::MatrixXi::Zero(L, L);
    for (const auto& [id, predicted] : predictions) {
        auto it = truth.find(id);
        if (it == truth.end())
            throw std::invalid_argument("prediction id not found in dataset: " + id);
        if (predicted < 0 || predicted >= L)
            throw std::invalid_argument("predicted label out of range for id: " + id);
        rep.confusion(it->second, predicted) += 1;
    }
    const int total = rep.confusion.sum();
    if (total == 0) throw std::invalid_argument("no predictions to evaluate");
    rep.accuracy = static_cast<double>(rep.confusion.trace()) / total;
    for (int y = 0; y < L; ++y) {
        const int row_total = rep.confusion.row(y).sum();
        rep.per_class_accuracy.push_back(
            row_total > 0 ? static_cast<double>(rep.confusion(y, y)) / row_total : 0.0);
    }
    return rep;
}

inline std::string confusion_csv(const EvalReport& rep) {
    std::string out = "true\\predicted";
    for (const auto& name : rep.label_vocab) out += "," + name;
    out += "\n";
    for (Eigen::Index r = 0; r < rep.confusion.rows(); ++r) {
        out += rep.label_vocab[r];
        for (Eigen::Index c = 0; c < rep.confusion.cols(); ++c)
            out += "," + std::to_string(rep.confusion(r, c));
        out += "\n";
    }
    return out;
}

}  // namespace lupihcrf

#endif  // LUPIHCRF_EVAL_HPP
