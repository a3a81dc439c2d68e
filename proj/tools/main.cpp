// lupihcrf command line: synthesize benchmark data, train the privileged
// chain model, predict, evaluate, sweep hyperparameters.
//
// Exit codes: 0 success, 1 numerical failure, 2 usage/validation error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lupihcrf/eval.hpp"
#include "lupihcrf/model_io.hpp"
#include "lupihcrf/train.hpp"

namespace {

using namespace lupihcrf;

void write_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write file: " + tmp);
        out << content;
        if (!out) throw std::runtime_error("I/O failure writing " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

std::vector<double> parse_double_list(const std::string& csv, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw CLI::ValidationError(flag, "cannot parse '" + item + "' as a number");
        }
    }
    if (out.empty()) throw CLI::ValidationError(flag, "empty list");
    return out;
}

std::vector<int> parse_int_list(const std::string& csv, const std::string& flag) {
    std::vector<int> out;
    for (double v : parse_double_list(csv, flag)) out.push_back(static_cast<int>(v));
    return out;
}

int run_synth(const SynthSpec& spec, const std::string& out_path) {
    Dataset ds = generate_synthetic(spec);
    save_dataset(ds, out_path);
    std::cout << "wrote " << ds.size() << " sequences (" << spec.n_classes
              << " classes) to " << out_path << "\n";
    return 0;
}

struct TrainFlags {
    std::string data_path, out_path;
    TrainConfig tcfg;
    TrainOptions opts;
    bool no_standardize = false;
    std::string eta_grid_csv;
};

int run_train(TrainFlags& f) {
    Dataset ds = load_dataset(f.data_path);
    f.opts.standardize = !f.no_standardize;
    if (!f.eta_grid_csv.empty())
        f.opts.eta_grid = parse_double_list(f.eta_grid_csv, "--eta-grid");
    TrainedModel model = train(ds, f.tcfg, f.opts);

    TrainMeta meta;
    meta.seed = f.tcfg.seed;
    meta.sigma = f.tcfg.sigma;
    meta.n_states = f.tcfg.n_states;
    meta.max_iters = f.tcfg.max_iters;
    meta.final_nll = model.train_log.back().value;
    meta.iterations = model.train_log.back().iter;
    save_model(model, meta, f.out_path);
    std::cout << "final NLL " << meta.final_nll << " after " << meta.iterations
              << " iterations; model written to " << f.out_path << "\n";
    return 0;
}

int run_predict(const std::string& model_path, const std::string& data_path,
                const std::string& strategy, int mc_samples, std::uint64_t mc_seed,
                const std::string& out_path) {
    TrainedModel model = load_model(model_path);
    Dataset ds = load_dataset(data_path);
    PredictOptions popts;
    popts.strategy = parse_strategy(strategy);
    popts.mc_samples = mc_samples;
    popts.mc_seed = mc_seed;

    std::string out;
    for (const auto& s : ds.samples) {
        // The privileged field of test records is deliberately never read.
        const auto [label, probs] = predict(model, s.frames, popts);
        nlohmann::json rec;
        rec["id"] = s.id;
        rec["predicted_label"] = model.label_vocab.at(label);
        nlohmann::json posterior;
        for (std::size_t y = 0; y < model.label_vocab.size(); ++y)
            posterior[model.label_vocab[y]] = probs(static_cast<Eigen::Index>(y));
        rec["posterior"] = posterior;
        out += rec.dump() + "\n";
    }
    write_atomic(out_path, out);
    std::cout << "wrote " << ds.size() << " predictions to " << out_path << "\n";
    return 0;
}

int run_eval(const std::string& pred_path, const std::string& data_path,
             const std::string& confusion_path) {
    Dataset ds = load_dataset(data_path);
    std::map<std::string, int> label_index;
    for (std::size_t i = 0; i < ds.label_vocab.size(); ++i)
        label_index[ds.label_vocab[i]] = static_cast<int>(i);

    std::ifstream in(pred_path);
    if (!in) throw std::runtime_error("cannot open predictions file: " + pred_path);
    std::vector<std::pair<std::string, int>> predictions;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto rec = nlohmann::json::parse(line);
        const std::string label = rec.at("predicted_label").get<std::string>();
        auto it = label_index.find(label);
        if (it == label_index.end())
            throw std::runtime_error("predicted label not in dataset vocabulary: " + label);
        predictions.emplace_back(rec.at("id").get<std::string>(), it->second);
    }

    const EvalReport rep = evaluate(predictions, ds);
    std::cout << "accuracy " << rep.accuracy << " over " << predictions.size()
              << " sequences\n";
    for (std::size_t y = 0; y < rep.label_vocab.size(); ++y)
        std::cout << "  " << rep.label_vocab[y] << ": " << rep.per_class_accuracy[y] << "\n";
    if (!confusion_path.empty()) {
        write_atomic(confusion_path, confusion_csv(rep));
        std::cout << "confusion matrix written to " << confusion_path << "\n";
    }
    return 0;
}

int run_cv(const std::string& data_path, const std::string& states_csv,
           const std::string& sigmas_csv, int folds, std::uint64_t seed, int max_iters,
           const std::string& table_path, const std::string& best_path) {
    Dataset ds = load_dataset(data_path);
    const auto states = parse_int_list(states_csv, "--states");
    const auto sigmas = parse_double_list(sigmas_csv, "--sigma");
    TrainConfig base;
    base.max_iters = max_iters;
    base.seed = seed;
    const CvResult res = cross_validate(ds, states, sigmas, folds, seed, base);

    std::string csv = "n_states,sigma,fold,accuracy\n";
    char buf[128];
    for (const auto& row : res.rows) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%d,%.17g\n", row.n_states, row.sigma,
                      row.fold, row.accuracy);
        csv += buf;
    }
    for (const auto& [n_states, sigma, acc] : res.config_means) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,mean,%.17g\n", n_states, sigma, acc);
        csv += buf;
    }
    std::snprintf(buf, sizeof buf, "all,all,mean,%.17g\n", res.overall_mean_accuracy);
    csv += buf;
    write_atomic(table_path, csv);

    nlohmann::json best = {{"n_states", res.best_n_states},
                           {"sigma", res.best_sigma},
                           {"mean_cv_accuracy", res.best_mean_accuracy},
                           {"overall_mean_accuracy", res.overall_mean_accuracy}};
    write_atomic(best_path, best.dump(2) + "\n");
    std::cout << "best: " << res.best_n_states << " states, sigma " << res.best_sigma
              << ", mean CV accuracy " << res.best_mean_accuracy << "\n";
    return 0;
}

int run_fit_fusion(const std::string& data_path, const std::string& eta_grid_csv,
                   int folds, std::uint64_t seed, const std::string& out_path) {
    Dataset ds = load_dataset(data_path);
    if (!ds.has_privileged())
        throw std::invalid_argument("privileged features required to fit the fusion map");
    Eigen::Index n_frames = 0;
    for (const auto& s : ds.samples) n_frames += s.frames.rows();
    Matrix x(n_frames, ds.dim_regular), a(n_frames, ds.dim_privileged);
    Eigen::Index at = 0;
    for (const auto& s : ds.samples)
        for (Eigen::Index j = 0; j < s.frames.rows(); ++j, ++at) {
            x.row(at) = s.frames.row(j);
            a.row(at) = s.privileged->row(j);
        }
    const auto grid = eta_grid_csv.empty() ? default_eta_grid()
                                           : parse_double_list(eta_grid_csv, "--eta-grid");
    const auto [eta, table] = select_eta(x, a, grid, folds, seed);
    const FusionMap map = fit_cls(x, a, eta);

    nlohmann::json j;
    j["eta"] = map.eta;
    nlohmann::json gamma = nlohmann::json::array();
    for (Eigen::Index r = 0; r < map.gamma.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < map.gamma.cols(); ++c) row.push_back(map.gamma(r, c));
        gamma.push_back(row);
    }
    j["gamma"] = gamma;
    nlohmann::json cv = nlohmann::json::array();
    for (const auto& [e, err] : table) cv.push_back({{"eta", e}, {"mse", err}});
    j["cv_table"] = cv;
    write_atomic(out_path, j.dump(2) + "\n");
    std::cout << "selected eta " << map.eta << "; fusion map written to " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chain-model sequence classification with privileged features"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic benchmark dataset");
    SynthSpec spec;
    std::string synth_out;
    synth->add_option("--classes", spec.n_classes, "number of classes");
    synth->add_option("--true-states", spec.n_states_true, "latent states per class");
    synth->add_option("--len-min", spec.seq_len_min, "minimum sequence length");
    synth->add_option("--len-max", spec.seq_len_max, "maximum sequence length");
    synth->add_option("--dim", spec.dim_regular, "regular feature width");
    synth->add_option("--dim-priv", spec.dim_privileged, "privileged feature width");
    synth->add_option("--noise", spec.regular_noise_sigma, "regular channel noise sigma");
    synth->add_option("--noise-priv", spec.privileged_noise_sigma,
                      "privileged channel noise sigma");
    synth->add_option("--outlier-rate", spec.outlier_rate,
                      "fraction of privileged frames replaced by outliers")
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--outlier-scale", spec.outlier_scale, "outlier noise multiplier");
    synth->add_option("--seqs", spec.n_sequences_per_class, "sequences per class");
    synth->add_option("--seed", spec.seed, "RNG seed");
    synth->add_option("--out", synth_out, "output dataset path")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train on a privileged dataset");
    TrainFlags tf;
    train_cmd->add_option("--data", tf.data_path, "training dataset (JSONL)")->required();
    train_cmd->add_option("--out", tf.out_path, "output model path")->required();
    train_cmd->add_option("--states", tf.tcfg.n_states, "hidden state count");
    train_cmd->add_option("--sigma", tf.tcfg.sigma, "Gaussian prior scale");
    train_cmd->add_option("--max-iters", tf.tcfg.max_iters, "optimizer iteration cap");
    train_cmd->add_option("--seed", tf.tcfg.seed, "initialization seed");
    train_cmd->add_flag("--no-standardize", tf.no_standardize,
                        "skip feature standardization");
    train_cmd->add_option("--fixed-nu", tf.opts.fixed_nu,
                          "pin the t degrees of freedom (0 = estimate)");
    train_cmd->add_option("--eta-grid", tf.eta_grid_csv, "fusion eta grid (csv)");
    train_cmd->add_option("--folds", tf.opts.fusion_folds, "fusion CV folds");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "Predict labels for sequences");
    std::string p_model, p_data, p_out, p_strategy = "mean";
    int p_mc_samples = 100;
    std::uint64_t p_mc_seed = 0;
    predict_cmd->add_option("--model", p_model, "model file")->required();
    predict_cmd->add_option("--data", p_data, "dataset to predict (JSONL)")->required();
    predict_cmd->add_option("--out", p_out, "output predictions path")->required();
    predict_cmd->add_option("--strategy", p_strategy, "mean|mc|regression|drop");
    predict_cmd->add_option("--mc-samples", p_mc_samples, "Monte Carlo sample count");
    predict_cmd->add_option("--mc-seed", p_mc_seed, "Monte Carlo seed");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
    std::string e_pred, e_data, e_confusion;
    eval_cmd->add_option("--predictions", e_pred, "predictions file")->required();
    eval_cmd->add_option("--data", e_data, "dataset with ground truth")->required();
    eval_cmd->add_option("--confusion", e_confusion, "confusion matrix CSV output path");

    // cv
    auto* cv_cmd = app.add_subcommand("cv", "Cross-validated hyperparameter sweep");
    std::string c_data, c_states = "4,8,12,16,20", c_sigmas = "0.001,0.01,0.1,1,10,100,1000";
    std::string c_table = "cv_results.csv", c_best = "cv_best.json";
    int c_folds = 5, c_max_iters = 400;
    std::uint64_t c_seed = 0;
    cv_cmd->add_option("--data", c_data, "dataset (JSONL)")->required();
    cv_cmd->add_option("--states", c_states, "hidden-state grid (csv)");
    cv_cmd->add_option("--sigma", c_sigmas, "prior scale grid (csv)");
    cv_cmd->add_option("--folds", c_folds, "CV fold count");
    cv_cmd->add_option("--seed", c_seed, "fold/init seed");
    cv_cmd->add_option("--max-iters", c_max_iters, "optimizer iteration cap");
    cv_cmd->add_option("--table", c_table, "results table CSV path");
    cv_cmd->add_option("--best", c_best, "best-config JSON path");

    // fit-fusion
    auto* fusion_cmd = app.add_subcommand("fit-fusion", "Fit the ridge fusion map alone");
    std::string f_data, f_out, f_grid;
    int f_folds = 5;
    std::uint64_t f_seed = 0;
    fusion_cmd->add_option("--data", f_data, "privileged dataset (JSONL)")->required();
    fusion_cmd->add_option("--out", f_out, "output fusion JSON path")->required();
    fusion_cmd->add_option("--eta-grid", f_grid, "eta grid (csv)");
    fusion_cmd->add_option("--folds", f_folds, "CV fold count");
    fusion_cmd->add_option("--seed", f_seed, "CV shuffle seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth) return run_synth(spec, synth_out);
        if (*train_cmd) return run_train(tf);
        if (*predict_cmd)
            return run_predict(p_model, p_data, p_strategy, p_mc_samples, p_mc_seed, p_out);
        if (*eval_cmd) return run_eval(e_pred, e_data, e_confusion);
        if (*cv_cmd)
            return run_cv(c_data, c_states, c_sigmas, c_folds, c_seed, c_max_iters,
                          c_table, c_best);
        if (*fusion_cmd) return run_fit_fusion(f_data, f_grid, f_folds, f_seed, f_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
