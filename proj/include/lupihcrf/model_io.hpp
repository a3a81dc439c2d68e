#ifndef LUPIHCRF_MODEL_IO_HPP
#define LUPIHCRF_MODEL_IO_HPP

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "lupihcrf/train.hpp"

namespace lupihcrf {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json vector_to_json(const Vector& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline Vector vector_from_json(const nlohmann::json& arr) {
    Vector v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
    return v;
}

}  // namespace detail

struct TrainMeta {
    std::uint64_t seed = 0;
    double sigma = 0.0;
    int n_states = 0;
    int max_iters = 0;
    double final_nll = 0.0;
    int iterations = 0;
};

inline nlohmann::json model_to_json(const TrainedModel& model, const TrainMeta& meta) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["label_vocab"] = model.label_vocab;
    j["config"] = {{"n_labels", model.config.n_labels},
                   {"n_states", model.config.n_states},
                   {"dim_regular", model.config.dim_regular},
                   {"dim_privileged", model.config.dim_privileged}};
    j["params"] = detail::vector_to_json(model.params.pack());
    if (model.scaler) {
        j["scaler"] = {
            {"mean_regular", detail::vector_to_json(model.scaler->mean_regular)},
            {"std_regular", detail::vector_to_json(model.scaler->std_regular)},
            {"mean_privileged", detail::vector_to_json(model.scaler->mean_privileged)},
            {"std_privileged", detail::vector_to_json(model.scaler->std_privileged)}};
    }
    if (model.t_joint) {
        Vector sigma_flat(model.t_joint->sigma.size());
        Eigen::Index at = 0;
        for (Eigen::Index r = 0; r < model.t_joint->sigma.rows(); ++r)
            for (Eigen::Index c = 0; c < model.t_joint->sigma.cols(); ++c)
                sigma_flat(at++) = model.t_joint->sigma(r, c);
        j["t_joint"] = {{"mu", detail::vector_to_json(model.t_joint->mu)},
                        {"sigma", detail::vector_to_json(sigma_flat)},
                        {"nu", model.t_joint->nu},
                        {"dim_privileged", model.t_joint->dim_privileged}};
    }
    if (model.fusion) {
        Vector gamma_flat(model.fusion->gamma.size());
        Eigen::Index at = 0;
        for (Eigen::Index r = 0; r < model.fusion->gamma.rows(); ++r)
            for (Eigen::Index c = 0; c < model.fusion->gamma.cols(); ++c)
                gamma_flat(at++) = model.fusion->gamma(r, c);
        j["fusion"] = {{"gamma", detail::vector_to_json(gamma_flat)},
                       {"rows", model.fusion->gamma.rows()},
                       {"cols", model.fusion->gamma.cols()},
                       {"eta", model.fusion->eta}};
    }
    j["meta"] = {{"seed", meta.seed},         {"sigma", meta.sigma},
                 {"n_states", meta.n_states}, {"max_iters", meta.max_iters},
                 {"final_nll", meta.final_nll}, {"iterations", meta.iterations}};
    return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j, TrainMeta* meta = nullptr) {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
        throw std::runtime_error("unsupported model format version " +
                                 std::to_string(version));
    TrainedModel model;
    model.label_vocab = j.at("label_vocab").get<std::vector<std::string>>();
    const auto& cfg = j.at("config");
    model.config.n_labels = cfg.at("n_labels").get<int>();
    model.config.n_states = cfg.at("n_states").get<int>();
    model.config.dim_regular = cfg.at("dim_regular").get<int>();
    model.config.dim_privileged = cfg.at("dim_privileged").get<int>();
    model.config.validate();
    model.params = ModelParams::unpack(detail::vector_from_json(j.at("params")), model.config);

    if (j.contains("scaler")) {
        Scaler sc;
        sc.mean_regular = detail::vector_from_json(j["scaler"].at("mean_regular"));
        sc.std_regular = detail::vector_from_json(j["scaler"].at("std_regular"));
        sc.mean_privileged = detail::vector_from_json(j["scaler"].at("mean_privileged"));
        sc.std_privileged = detail::vector_from_json(j["scaler"].at("std_privileged"));
        model.scaler = std::move(sc);
    }
    if (j.contains("t_joint")) {
        StudentTJoint t;
        t.mu = detail::vector_from_json(j["t_joint"].at("mu"));
        t.nu = j["t_joint"].at("nu").get<double>();
        t.dim_privileged = j["t_joint"].at("dim_privileged").get<int>();
        const Vector flat = detail::vector_from_json(j["t_joint"].at("sigma"));
        const Eigen::Index m = t.mu.size();
        if (flat.size() != m * m) throw std::runtime_error("t_joint sigma size mismatch");
        t.sigma.resize(m, m);
        Eigen::Index at = 0;
        for (Eigen::Index r = 0; r < m; ++r)
            for (Eigen::Index c = 0; c < m; ++c) t.sigma(r, c) = flat(at++);
        model.t_joint = std::move(t);
    }
    if (j.contains("fusion")) {
        FusionMap f;
        f.eta = j["fusion"].at("eta").get<double>();
        const Eigen::Index rows = j["fusion"].at("rows").get<Eigen::Index>();
        const Eigen::Index cols = j["fusion"].at("cols").get<Eigen::Index>();
        const Vector flat = detail::vector_from_json(j["fusion"].at("gamma"));
        if (flat.size() != rows * cols) throw std::runtime_error("fusion gamma size mismatch");
        f.gamma.resize(rows, cols);
        Eigen::Index at = 0;
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) f.gamma(r, c) = flat(at++);
        model.fusion = std::move(f);
    }
    if (meta && j.contains("meta")) {
        meta->seed = j["meta"].value("seed", std::uint64_t{0});
        meta->sigma = j["meta"].value("sigma", 0.0);
        meta->n_states = j["meta"].value("n_states", 0);
        meta->max_iters = j["meta"].value("max_iters", 0);
        meta->final_nll = j["meta"].value("final_nll", 0.0);
        meta->iterations = j["meta"].value("iterations", 0);
    }
    return model;
}

inline void save_model(const TrainedModel& model, const TrainMeta& meta,
                       const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write model file: " + tmp);
        out << model_to_json(model, meta).dump(2) << '\n';
        if (!out) throw std::runtime_error("I/O failure writing " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

inline TrainedModel load_model(const std::string& path, TrainMeta* meta = nullptr) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    nlohmann::json j;
    in >> j;
    return model_from_json(j, meta);
}

}  // namespace lupihcrf

#endif  // LUPIHCRF_MODEL_IO_HPP
