#ifndef LUPIHCRF_SEQDATA_HPP
#define LUPIHCRF_SEQDATA_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace lupihcrf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One labeled sequence: rows of `frames` are per-frame regular feature
/// vectors; `privileged` carries the training-only channel when present.
struct SequenceSample {
    std::string id;
    int label = -1;  // index into Dataset::label_vocab
    Matrix frames;
    std::optional<Matrix> privileged;

    int length() const { return static_cast<int>(frames.rows()); }
};

struct Dataset {
    std::vector<SequenceSample> samples;
    std::vector<std::string> label_vocab;
    int dim_regular = 0;
    int dim_privileged = 0;  // 0 when no privileged channel

    bool has_privileged() const { return dim_privileged > 0; }
    int n_labels() const { return static_cast<int>(label_vocab.size()); }
    int size() const { return static_cast<int>(samples.size()); }
};

struct SynthSpec {
    int n_classes = 2;
    int n_states_true = 3;
    int seq_len_min = 8;
    int seq_len_max = 16;
    int dim_regular = 3;
    int dim_privileged = 2;
    double regular_noise_sigma = 1.0;
    double privileged_noise_sigma = 0.1;
    double outlier_rate = 0.0;
    double outlier_scale = 1.0;
    int n_sequences_per_class = 20;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
        if (n_states_true < 1) throw std::invalid_argument("n_states_true must be >= 1");
        if (dim_regular < 1 || dim_privileged < 1)
            throw std::invalid_argument("feature dimensions must be >= 1");
        if (seq_len_min < 1 || seq_len_min > seq_len_max)
            throw std::invalid_argument("require 1 <= seq_len_min <= seq_len_max");
        if (outlier_rate < 0.0 || outlier_rate > 1.0)
            throw std::invalid_argument("outlier_rate must be in [0,1]");
        if (n_sequences_per_class < 1)
            throw std::invalid_argument("n_sequences_per_class must be >= 1");
    }
};

/// Per-dimension affine normalization, regular and privileged channels kept
/// separate. Zero-variance dimensions get std 1 so they pass through shifted.
struct Scaler {
    Vector mean_regular, std_regular;
    Vector mean_privileged, std_privileged;  // empty when no privileged channel

    Matrix apply_regular(const Matrix& frames) const {
        return transform(frames, mean_regular, std_regular);
    }
    Matrix apply_privileged(const Matrix& frames) const {
        return transform(frames, mean_privileged, std_privileged);
    }
    Matrix invert_regular(const Matrix& frames) const {
        Matrix out = frames;
        for (Eigen::Index c = 0; c < out.cols(); ++c)
            out.col(c) = out.col(c).array() * std_regular(c) + mean_regular(c);
        return out;
    }

  private:
    static Matrix transform(const Matrix& frames, const Vector& mean, const Vector& std) {
        if (frames.cols() != mean.size())
            throw std::invalid_argument("scaler dimension mismatch");
        Matrix out = frames;
        for (Eigen::Index c = 0; c < out.cols(); ++c)
            out.col(c) = (out.col(c).array() - mean(c)) / std(c);
        return out;
    }
};

namespace detail {

inline void check_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite())
        throw std::invalid_argument(what + " contains non-finite entries");
}

inline Matrix parse_matrix(const nlohmann::json& rows, const std::string& what,
                           int line_no) {
    if (!rows.is_array() || rows.empty())
        throw std::runtime_error("line " + std::to_string(line_no) + ": " + what +
                                 " must be a non-empty array of rows");
    const auto& first = rows.front();
    if (!first.is_array() || first.empty())
        throw std::runtime_error("line " + std::to_string(line_no) + ": " + what +
                                 " rows must be non-empty arrays");
    Matrix m(rows.size(), first.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (!row.is_array() || row.size() != first.size())
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": inconsistent row width in " + what);
        for (std::size_t c = 0; c < row.size(); ++c)
            m(r, c) = row[c].get<double>();
    }
    check_finite(m, what);
    return m;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detail

inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    struct Raw {
        std::string id, label;
        Matrix frames;
        std::optional<Matrix> privileged;
    };
    std::vector<Raw> raws;
    std::set<std::string> labels;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": JSON parse error: " + e.what());
        }
        Raw raw;
        raw.id = rec.at("id").get<std::string>();
        raw.label = rec.at("label").get<std::string>();
        raw.frames = detail::parse_matrix(rec.at("frames"), "frames", line_no);
        if (rec.contains("privileged")) {
            raw.privileged = detail::parse_matrix(rec.at("privileged"), "privileged", line_no);
            if (raw.privileged->rows() != raw.frames.rows())
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": privileged frame count differs from frames");
        }
        labels.insert(raw.label);
        raws.push_back(std::move(raw));
    }
    if (raws.empty()) throw std::runtime_error("dataset file has no samples: " + path);
    if (labels.size() < 2) throw std::runtime_error("dataset needs at least 2 distinct labels");

    Dataset ds;
    ds.label_vocab.assign(labels.begin(), labels.end());  // sorted by std::set
    ds.dim_regular = static_cast<int>(raws.front().frames.cols());
    const bool priv = raws.front().privileged.has_value();
    ds.dim_privileged = priv ? static_cast<int>(raws.front().privileged->cols()) : 0;

    std::map<std::string, int> label_index;
    for (std::size_t i = 0; i < ds.label_vocab.size(); ++i)
        label_index[ds.label_vocab[i]] = static_cast<int>(i);

    for (auto& raw : raws) {
        if (raw.frames.cols() != ds.dim_regular)
            throw std::runtime_error("sample '" + raw.id + "': inconsistent frame width");
        if (raw.privileged.has_value() != priv)
            throw std::runtime_error("mixed privileged presence: sample '" + raw.id +
                                     "' differs from the rest of the dataset");
        if (priv && raw.privileged->cols() != ds.dim_privileged)
            throw std::runtime_error("sample '" + raw.id + "': inconsistent privileged width");
        SequenceSample s;
        s.id = std::move(raw.id);
        s.label = label_index[raw.label];
        s.frames = std::move(raw.frames);
        s.privileged = std::move(raw.privileged);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
    if (ds.samples.empty()) throw std::runtime_error("dataset has no samples");
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write dataset file: " + tmp);
        for (const auto& s : ds.samples) {
            nlohmann::json rec;
            rec["id"] = s.id;
            rec["label"] = ds.label_vocab.at(s.label);
            rec["frames"] = detail::matrix_to_json(s.frames);
            if (s.privileged) rec["privileged"] = detail::matrix_to_json(*s.privileged);
            out << rec.dump() << '\n';
        }
        if (!out) throw std::runtime_error("I/O failure writing " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

/// Seeded synthetic benchmark: per class a left-to-right Markov chain over
/// latent states, each (class, state) pair with its own regular and
/// privileged emission mean. The privileged channel is clean and
/// discriminative; the regular channel carries the heavy noise. A fraction
/// of privileged frames can be replaced by wide-noise outliers.
inline Dataset generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const int C = spec.n_classes, S = spec.n_states_true;
    // Emission means, drawn once per (class, state).
    std::vector<std::vector<Vector>> mean_reg(C), mean_priv(C);
    for (int c = 0; c < C; ++c) {
        mean_reg[c].resize(S);
        mean_priv[c].resize(S);
        for (int s = 0; s < S; ++s) {
            mean_reg[c][s] = Vector::NullaryExpr(spec.dim_regular,
                                                 [&](Eigen::Index) { return gauss(rng); });
            // Wider spread keeps the privileged channel class-discriminative.
            mean_priv[c][s] = Vector::NullaryExpr(spec.dim_privileged,
                                                  [&](Eigen::Index) { return 2.0 * gauss(rng); });
        }
    }

    constexpr double kAdvanceProb = 0.4;  // left-to-right, absorbing last state

    Dataset ds;
    ds.dim_regular = spec.dim_regular;
    ds.dim_privileged = spec.dim_privileged;
    for (int c = 0; c < C; ++c) ds.label_vocab.push_back("class" + std::to_string(c));

    std::uniform_int_distribution<int> len_dist(spec.seq_len_min, spec.seq_len_max);
    for (int c = 0; c < C; ++c) {
        for (int n = 0; n < spec.n_sequences_per_class; ++n) {
            const int T = len_dist(rng);
            SequenceSample s;
            s.id = "c" + std::to_string(c) + "_s" + std::to_string(n);
            s.label = c;
            s.frames.resize(T, spec.dim_regular);
            Matrix priv(T, spec.dim_privileged);
            int state = 0;
            for (int j = 0; j < T; ++j) {
                if (j > 0 && state + 1 < S && unif(rng) < kAdvanceProb) ++state;
                for (int d = 0; d < spec.dim_regular; ++d)
                    s.frames(j, d) = mean_reg[c][state](d) + spec.regular_noise_sigma * gauss(rng);
                const bool outlier = unif(rng) < spec.outlier_rate;
                const double sigma = outlier
                                         ? spec.outlier_scale * spec.privileged_noise_sigma
                                         : spec.privileged_noise_sigma;
                for (int d = 0; d < spec.dim_privileged; ++d)
                    priv(j, d) = mean_priv[c][state](d) + sigma * gauss(rng);
            }
            s.privileged = std::move(priv);
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

/// Stratified k-fold split. Returns (train indices, test indices) per fold;
/// test folds partition the index set.
inline std::vector<std::pair<std::vector<int>, std::vector<int>>> split_folds(
    const Dataset& ds, int k, std::uint64_t seed) {
    const int n = ds.size();
    if (k < 2) throw std::invalid_argument("need k >= 2 folds");
    if (k > n) throw std::invalid_argument("k exceeds number of samples");

    std::mt19937_64 rng(seed);
    std::vector<std::vector<int>> by_label(ds.label_vocab.size());
    for (int i = 0; i < n; ++i) by_label[ds.samples[i].label].push_back(i);

    std::vector<std::vector<int>> test_folds(k);
    int next_fold = 0;
    for (auto& group : by_label) {
        std::shuffle(group.begin(), group.end(), rng);
        for (int idx : group) {
            test_folds[next_fold].push_back(idx);
            next_fold = (next_fold + 1) % k;
        }
    }

    std::vector<std::pair<std::vector<int>, std::vector<int>>> folds;
    for (int f = 0; f < k; ++f) {
        std::vector<int> train;
        for (int g = 0; g < k; ++g)
            if (g != f) train.insert(train.end(), test_folds[g].begin(), test_folds[g].end());
        std::sort(train.begin(), train.end());
        std::sort(test_folds[f].begin(), test_folds[f].end());
        folds.emplace_back(std::move(train), test_folds[f]);
    }
    return folds;
}

namespace detail {

// Population mean/std per column over all frames of all samples.
inline void pooled_moments(const std::vector<const Matrix*>& mats, Vector& mean, Vector& std) {
    const Eigen::Index d = mats.front()->cols();
    mean = Vector::Zero(d);
    std = Vector::Zero(d);
    long total = 0;
    for (const Matrix* m : mats) {
        mean += m->colwise().sum().transpose();
        total += m->rows();
    }
    mean /= static_cast<double>(total);
    for (const Matrix* m : mats)
        std += (m->rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
    std = (std / static_cast<double>(total)).array().sqrt();
    for (Eigen::Index c = 0; c < d; ++c)
        if (std(c) <= 0.0) std(c) = 1.0;
}

}  // namespace detail

inline std::pair<Dataset, Scaler> standardize(const Dataset& ds) {
    if (ds.samples.empty()) throw std::invalid_argument("cannot standardize an empty dataset");
    Scaler sc;
    std::vector<const Matrix*> reg;
    for (const auto& s : ds.samples) reg.push_back(&s.frames);
    detail::pooled_moments(reg, sc.mean_regular, sc.std_regular);
    if (ds.has_privileged()) {
        std::vector<const Matrix*> priv;
        for (const auto& s : ds.samples) priv.push_back(&*s.privileged);
        detail::pooled_moments(priv, sc.mean_privileged, sc.std_privileged);
    }
    Dataset out = ds;
    for (auto& s : out.samples) {
        s.frames = sc.apply_regular(s.frames);
        if (s.privileged) s.privileged = sc.apply_privileged(*s.privileged);
    }
    return {std::move(out), std::move(sc)};
}

}  // namespace lupihcrf

#endif  // LUPIHCRF_SEQDATA_HPP
