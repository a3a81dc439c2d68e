#ifndef LUPIHCRF_TRAIN_HPP
#define LUPIHCRF_TRAIN_HPP

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lupihcrf/chain.hpp"
#include "lupihcrf/fusion.hpp"
#include "lupihcrf/lbfgs.hpp"
#include "lupihcrf/model.hpp"
#include "lupihcrf/objective.hpp"
#include "lupihcrf/seqdata.hpp"
#include "lupihcrf/student_t.hpp"

namespace lupihcrf {

struct TrainConfig {
    double sigma = 1.0;      // Gaussian prior scale
    int n_states = 4;
    int max_iters = 400;
    double grad_tol = 1e-5;
    int memory = 10;
    std::uint64_t seed = 0;  // parameter initialization
    double init_scale = 0.01;

    void validate() const {
        if (sigma <= 0.0) throw std::invalid_argument("sigma must be > 0");
        if (n_states < 1) throw std::invalid_argument("n_states must be >= 1");
        if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
        if (memory < 1) throw std::invalid_argument("memory must be >= 1");
    }
};

struct TrainOptions {
    bool standardize = true;
    bool fit_t = true;          // joint Student's t over pooled (x*, x) frames
    double fixed_nu = 0.0;      // > 0 pins nu during the t fit
    bool fit_fusion = true;     // ridge map x -> x*
    std::vector<double> eta_grid = default_eta_grid();
    int fusion_folds = 5;
    std::uint64_t fusion_seed = 0;
};

struct TrainedModel {
    HCRFConfig config;
    ModelParams params;
    std::optional<Scaler> scaler;
    std::optional<StudentTJoint> t_joint;
    std::optional<FusionMap> fusion;
    std::vector<std::string> label_vocab;
    std::vector<LbfgsIterate> train_log;
};

enum class Strategy { MeanSubstitution, MonteCarlo, Regression, DropPrivileged };

struct PredictOptions {
    Strategy strategy = Strategy::MeanSubstitution;
    int mc_samples = 100;
    std::uint64_t mc_seed = 0;
};

inline Strategy parse_strategy(const std::string& name) {
    if (name == "mean") return Strategy::MeanSubstitution;
    if (name == "mc") return Strategy::MonteCarlo;
    if (name == "regression") return Strategy::Regression;
    if (name == "drop") return Strategy::DropPrivileged;
    throw std::invalid_argument("unknown strategy: " + name +
                                " (expected mean|mc|regression|drop)");
}

/// Fit the chain model, then the joint t and the fusion map, on a dataset
/// that carries privileged features. Deterministic given the seeds.
inline TrainedModel train(const Dataset& dataset, const TrainConfig& tcfg,
                          const TrainOptions& opts = {}) {
    tcfg.validate();
    if (!dataset.has_privileged())
        throw std::invalid_argument("privileged features required for training");

    TrainedModel model;
    Dataset data = dataset;
    if (opts.standardize) {
        auto [scaled, scaler] = standardize(dataset);
        data = std::move(scaled);
        model.scaler = std::move(scaler);
    }

    HCRFConfig cfg;
    cfg.n_labels = data.n_labels();
    cfg.n_states = tcfg.n_states;
    cfg.dim_regular = data.dim_regular;
    cfg.dim_privileged = data.dim_privileged;
    cfg.validate();
    model.config = cfg;
    model.label_vocab = data.label_vocab;

    // Seeded noise init; zero is a saddle because hidden states are
    // exchangeable there.
    const ModelParams init = ModelParams::random(cfg, tcfg.init_scale, tcfg.seed);
    Objective obj = [&](const Vector& v, Vector& grad) {
        auto [value, g] = nll_and_grad(ModelParams::unpack(v, cfg), cfg, data, tcfg.sigma);
        grad = std::move(g);
        return value;
    };
    LbfgsOptions lopts;
    lopts.max_iters = tcfg.max_iters;
    lopts.grad_tol = tcfg.grad_tol;
    lopts.memory = tcfg.memory;
    auto [w, log] = lbfgs_minimize(obj, init.pack(), lopts);
    model.params = ModelParams::unpack(w, cfg);
    model.train_log = std::move(log);

    // Pooled per-frame (x*, x) vectors, privileged components first.
    std::vector<Vector> pooled;
    Eigen::Index n_frames = 0;
    for (const auto& s : data.samples) n_frames += s.frames.rows();
    pooled.reserve(n_frames);
    Matrix x_pool(n_frames, cfg.dim_regular);
    Matrix a_pool(n_frames, cfg.dim_privileged);
    Eigen::Index at = 0;
    for (const auto& s : data.samples) {
        for (Eigen::Index j = 0; j < s.frames.rows(); ++j) {
            Vector v(cfg.dim_privileged + cfg.dim_regular);
            v << s.privileged->row(j).transpose(), s.frames.row(j).transpose();
            pooled.push_back(std::move(v));
            x_pool.row(at) = s.frames.row(j);
            a_pool.row(at) = s.privileged->row(j);
            ++at;
        }
    }

    if (opts.fit_t) {
        TFitOptions topts;
        topts.fixed_nu = opts.fixed_nu;
        model.t_joint = fit_em(pooled, cfg.dim_privileged, topts);
    }
    if (opts.fit_fusion) {
        auto [eta, table] = select_eta(x_pool, a_pool, opts.eta_grid, opts.fusion_folds,
                                       opts.fusion_seed);
        (void)table;
        model.fusion = fit_cls(x_pool, a_pool, eta);
    }
    return model;
}

/// Class posterior for a raw (unscaled) test sequence without privileged
/// features, marginalizing the missing channel per the chosen strategy.
/// Returns (argmax label, posterior probabilities); label ties break low.
inline std::pair<int, Vector> predict(const TrainedModel& model, const Matrix& raw_frames,
                                      const PredictOptions& opts = {}) {
    if (raw_frames.cols() != model.config.dim_regular)
        throw std::invalid_argument("frame width does not match trained model");
    const Matrix frames =
        model.scaler ? model.scaler->apply_regular(raw_frames) : raw_frames;
    const Eigen::Index T = frames.rows();

    Vector log_post;
    switch (opts.strategy) {
        case Strategy::DropPrivileged:
            log_post = class_posterior(model.params, model.config, frames, nullptr);
            break;
        case Strategy::Regression: {
            if (!model.fusion)
                throw std::invalid_argument("regression strategy requires a fusion map");
            const Matrix priv = predict_privileged(*model.fusion, frames);
            log_post = class_posterior(model.params, model.config, frames, &priv);
            break;
        }
        case Strategy::MeanSubstitution: {
            if (!model.t_joint)
                throw std::invalid_argument("mean-substitution requires a fitted t model");
            Matrix priv(T, model.config.dim_privileged);
            for (Eigen::Index j = 0; j < T; ++j) {
                const ConditionalT cond =
                    condition(*model.t_joint, frames.row(j).transpose());
                priv.row(j) = conditional_mean(cond).transpose();
            }
            log_post = class_posterior(model.params, model.config, frames, &priv);
            break;
        }
        case Strategy::MonteCarlo: {
            if (!model.t_joint)
                throw std::invalid_argument("monte-carlo requires a fitted t model");
            if (opts.mc_samples < 1)
                throw std::invalid_argument("mc_samples must be >= 1");
            std::vector<ConditionalT> conds;
            conds.reserve(T);
            for (Eigen::Index j = 0; j < T; ++j)
                conds.push_back(condition(*model.t_joint, frames.row(j).transpose()));
            Vector probs = Vector::Zero(model.config.n_labels);
            std::mt19937_64 rng(opts.mc_seed);
            Matrix priv(T, model.config.dim_privileged);
            for (int s = 0; s < opts.mc_samples; ++s) {
                for (Eigen::Index j = 0; j < T; ++j)
                    priv.row(j) = sample(conds[j], 1, rng()).row(0);
                probs += class_posterior(model.params, model.config, frames, &priv)
                             .array()
                             .exp()
                             .matrix();
            }
            probs /= opts.mc_samples;
            log_post = probs.array().log();
            break;
        }
    }

    Vector probs = log_post.array().exp();
    int best = 0;
    for (int y = 1; y < model.config.n_labels; ++y)
        if (probs(y) > probs(best)) best = y;
    return {best, probs};
}

struct CvRow {
    int n_states;
    double sigma;
    int fold;
    double accuracy;
};

struct CvResult {
    int best_n_states = 0;
    double best_sigma = 0.0;
    double best_mean_accuracy = 0.0;
    double overall_mean_accuracy = 0.0;  // mean over every examined configuration
    std::vector<CvRow> rows;
    std::vector<std::tuple<int, double, double>> config_means;  // (states, sigma, mean acc)
};

/// Grid search over (hidden states, prior scale) with stratified k-fold CV.
/// Held-out sequences are scored without their privileged channel, using
/// the given strategy. Ties prefer fewer states, then smaller sigma.
inline CvResult cross_validate(const Dataset& dataset, const std::vector<int>& state_grid,
                               const std::vector<double>& sigma_grid, int k,
                               std::uint64_t seed, const TrainConfig& base,
                               const TrainOptions& opts = {},
                               const PredictOptions& popts = {}) {
    if (state_grid.empty() || sigma_grid.empty())
        throw std::invalid_argument("cross_validate: empty grid");
    const auto folds = split_folds(dataset, k, seed);

    // Ascending sweep makes the first strict maximum the tie-break winner
    // (fewer states, then smaller sigma).
    std::vector<int> states_sorted = state_grid;
    std::vector<double> sigmas_sorted = sigma_grid;
    std::sort(states_sorted.begin(), states_sorted.end());
    std::sort(sigmas_sorted.begin(), sigmas_sorted.end());

    CvResult result;
    double sum_config_means = 0.0;
    for (int n_states : states_sorted) {
        for (double sigma : sigmas_sorted) {
            TrainConfig tcfg = base;
            tcfg.n_states = n_states;
            tcfg.sigma = sigma;
            double sum_acc = 0.0;
            for (std::size_t f = 0; f < folds.size(); ++f) {
                Dataset train_set;
                train_set.label_vocab = dataset.label_vocab;
                train_set.dim_regular = dataset.dim_regular;
                train_set.dim_privileged = dataset.dim_privileged;
                for (int i : folds[f].first) train_set.samples.push_back(dataset.samples[i]);
                const TrainedModel model = train(train_set, tcfg, opts);
                int correct = 0;
                for (int i : folds[f].second) {
                    const auto [label, probs] = predict(model, dataset.samples[i].frames, popts);
                    (void)probs;
                    if (label == dataset.samples[i].label) ++correct;
                }
                const double acc =
                    static_cast<double>(correct) / folds[f].second.size();
                result.rows.push_back({n_states, sigma, static_cast<int>(f), acc});
                sum_acc += acc;
            }
            const double mean_acc = sum_acc / folds.size();
            result.config_means.emplace_back(n_states, sigma, mean_acc);
            sum_config_means += mean_acc;
            if (mean_acc > result.best_mean_accuracy + 1e-12 ||
                result.best_n_states == 0) {
                result.best_mean_accuracy = mean_acc;
                result.best_n_states = n_states;
                result.best_sigma = sigma;
            }
        }
    }
    result.overall_mean_accuracy = sum_config_means / result.config_means.size();
    return result;
}

}  // namespace lupihcrf

#endif  // LUPIHCRF_TRAIN_HPP
