#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ramanml/errors.hpp"
#include "ramanml/matrix.hpp"
#include "ramanml/models/forest.hpp"
#include "ramanml/models/knn.hpp"
#include "ramanml/models/svc.hpp"
#include "ramanml/nn.hpp"

namespace ramanml {

enum class ModelKind { Knn, Forest, Svc, Cnn };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Knn: return "knn";
        case ModelKind::Forest: return "rfc";
        case ModelKind::Svc: return "svc";
        case ModelKind::Cnn: return "cnn";
    }
    return "rfc";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "knn") return ModelKind::Knn;
    if (s == "rfc" || s == "forest") return ModelKind::Forest;
    if (s == "svc" || s == "svm") return ModelKind::Svc;
    if (s == "cnn") return ModelKind::Cnn;
    throw ConfigError("unknown model kind: " + s);
}

// A fitted classifier of any supported kind.
struct TrainedModel {
    std::variant<KnnModel, ForestModel, SvcModel, CnnNetwork> impl;

    ModelKind kind() const { return static_cast<ModelKind>(impl.index()); }

    int n_classes() const {
        return std::visit(
            [](const auto& m) -> int {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, CnnNetwork>)
                    return static_cast<int>(m.n_classes);
                else
                    return m.n_classes;
            },
            impl);
    }

    std::vector<int> predict(const Matrix& queries, unsigned threads = 1) const {
        if (const auto* knn = std::get_if<KnnModel>(&impl)) return knn_predict(*knn, queries, threads);
        if (const auto* rf = std::get_if<ForestModel>(&impl)) return forest_predict(*rf, queries, threads);
        if (const auto* svc = std::get_if<SvcModel>(&impl)) return svc_predict(*svc, queries, threads);
        const auto& net = std::get<CnnNetwork>(impl);
        return argmax_rows(cnn_forward(net, queries, false));
    }

    // impurity importances exist for forests only
    std::optional<std::vector<double>> importances() const {
        if (const auto* rf = std::get_if<ForestModel>(&impl)) return rf->importances;
        return std::nullopt;
    }
};

// ---------------------------------------------------------------------------
// Versioned JSON serialization

namespace detail {

inline nlohmann::json knn_to_json(const KnnModel& m) {
    nlohmann::json j;
    j["config"] = {{"n_neighbors", m.config.n_neighbors},
                   {"metric", to_string(m.config.metric)},
                   {"minkowski_p", m.config.minkowski_p},
                   {"weights", m.config.weights == KnnWeights::Uniform ? "uniform" : "distance"}};
    j["n_classes"] = m.n_classes;
    j["train_labels"] = m.train_labels;
    j["train_features"] = {{"rows", m.train_features.rows()},
                           {"cols", m.train_features.cols()},
                           {"data", m.train_features.data()}};
    return j;
}

inline KnnModel knn_from_json(const nlohmann::json& j) {
    KnnModel m;
    const auto& c = j.at("config");
    m.config.n_neighbors = c.at("n_neighbors").get<int>();
    const auto metric = c.at("metric").get<std::string>();
    m.config.metric = metric == "euclidean"   ? KnnMetric::Euclidean
                      : metric == "manhattan" ? KnnMetric::Manhattan
                                              : KnnMetric::Minkowski;
    m.config.minkowski_p = c.at("minkowski_p").get<double>();
    m.config.weights = c.at("weights").get<std::string>() == "uniform" ? KnnWeights::Uniform
                                                                       : KnnWeights::Distance;
    m.n_classes = j.at("n_classes").get<int>();
    m.train_labels = j.at("train_labels").get<std::vector<int>>();
    const auto& f = j.at("train_features");
    m.train_features = Matrix(f.at("rows").get<std::size_t>(), f.at("cols").get<std::size_t>());
    m.train_features.data() = f.at("data").get<std::vector<double>>();
    return m;
}

inline nlohmann::json forest_to_json(const ForestModel& m) {
    nlohmann::json j;
    j["config"] = {{"n_estimators", m.config.n_estimators},
                   {"max_features", m.config.max_features},
                   {"criterion", to_string(m.config.criterion)},
                   {"seed", m.config.seed}};
    j["n_classes"] = m.n_classes;
    j["degenerate"] = m.degenerate;
    j["importances"] = m.importances;
    j["trees"] = nlohmann::json::array();
    for (const auto& t : m.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes)
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
        j["trees"].push_back(std::move(nodes));
    }
    return j;
}

inline ForestModel forest_from_json(const nlohmann::json& j) {
    ForestModel m;
    const auto& c = j.at("config");
    m.config.n_estimators = c.at("n_estimators").get<int>();
    m.config.max_features = c.at("max_features").get<int>();
    m.config.criterion =
        c.at("criterion").get<std::string>() == "gini" ? SplitCriterion::Gini : SplitCriterion::Entropy;
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.n_classes = j.at("n_classes").get<int>();
    m.degenerate = j.at("degenerate").get<bool>();
    m.importances = j.at("importances").get<std::vector<double>>();
    for (const auto& tj : j.at("trees")) {
        DecisionTree t;
        for (const auto& nj : tj) {
            TreeNode n;
            n.feature = nj.at(0).get<int>();
            n.threshold = nj.at(1).get<double>();
            n.left = nj.at(2).get<int>();
            n.right = nj.at(3).get<int>();
            n.label = nj.at(4).get<int>();
            t.nodes.push_back(n);
        }
        m.trees.push_back(std::move(t));
    }
    return m;
}

inline nlohmann::json svc_to_json(const SvcModel& m) {
    nlohmann::json j;
    j["config"] = {{"c", m.config.c},
                   {"kernel", to_string(m.config.kernel)},
                   {"degree", m.config.degree},
                   {"rbf_gamma", m.config.rbf_gamma},
                   {"tolerance", m.config.tolerance},
                   {"max_passes", m.config.max_passes},
                   {"seed", m.config.seed}};
    j["gamma"] = m.gamma;
    j["n_classes"] = m.n_classes;
    j["converged"] = m.converged;
    j["support_vectors"] = {{"rows", m.support_vectors.rows()},
                            {"cols", m.support_vectors.cols()},
                            {"data", m.support_vectors.data()}};
    j["machines"] = nlohmann::json::array();
    for (const auto& machine : m.machines)
        j["machines"].push_back({{"positive_class", machine.positive_class},
                                 {"negative_class", machine.negative_class},
                                 {"bias", machine.bias},
                                 {"dual_objective", machine.dual_objective},
                                 {"support_rows", machine.support_rows},
                                 {"alpha_y", machine.alpha_y}});
    return j;
}

inline SvcModel svc_from_json(const nlohmann::json& j) {
    SvcModel m;
    const auto& c = j.at("config");
    m.config.c = c.at("c").get<double>();
    const auto kernel = c.at("kernel").get<std::string>();
    m.config.kernel = kernel == "linear" ? SvcKernel::Linear
                      : kernel == "rbf"  ? SvcKernel::Rbf
                                         : SvcKernel::Polynomial;
    m.config.degree = c.at("degree").get<int>();
    m.config.rbf_gamma = c.at("rbf_gamma").get<double>();
    m.config.tolerance = c.at("tolerance").get<double>();
    m.config.max_passes = c.at("max_passes").get<int>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.gamma = j.at("gamma").get<double>();
    m.n_classes = j.at("n_classes").get<int>();
    m.converged = j.at("converged").get<bool>();
    const auto& f = j.at("support_vectors");
    m.support_vectors = Matrix(f.at("rows").get<std::size_t>(), f.at("cols").get<std::size_t>());
    m.support_vectors.data() = f.at("data").get<std::vector<double>>();
    for (const auto& mj : j.at("machines")) {
        detail::BinarySvm machine;
        machine.positive_class = mj.at("positive_class").get<int>();
        machine.negative_class = mj.at("negative_class").get<int>();
        machine.bias = mj.at("bias").get<double>();
        machine.dual_objective = mj.at("dual_objective").get<double>();
        machine.support_rows = mj.at("support_rows").get<std::vector<std::size_t>>();
        machine.alpha_y = mj.at("alpha_y").get<std::vector<double>>();
        m.machines.push_back(std::move(machine));
    }
    return m;
}

inline nlohmann::json cnn_to_json(const CnnNetwork& net) {
    nlohmann::json j;
    j["config"] = {{"conv_filters", net.config.conv_filters},
                   {"kernel_width", net.config.kernel_width},
                   {"dropout_rate", net.config.dropout_rate},
                   {"pool_width", net.config.pool_width},
                   {"hidden_units", net.config.hidden_units},
                   {"learning_rate", net.config.learning_rate},
                   {"beta1", net.config.beta1},
                   {"beta2", net.config.beta2},
                   {"epsilon", net.config.epsilon},
                   {"batch_size", net.config.batch_size},
                   {"epochs", net.config.epochs},
                   {"seed", net.config.seed}};
    j["input_length"] = net.input_length;
    j["n_classes"] = net.n_classes;
    j["weights"] = {{"conv1_w", net.conv1_w}, {"conv1_b", net.conv1_b}, {"conv2_w", net.conv2_w},
                    {"conv2_b", net.conv2_b}, {"dense_w", net.dense_w}, {"dense_b", net.dense_b},
                    {"out_w", net.out_w},     {"out_b", net.out_b}};
    return j;
}

inline CnnNetwork cnn_from_json(const nlohmann::json& j) {
    CnnConfig cfg;
    const auto& c = j.at("config");
    cfg.conv_filters = c.at("conv_filters").get<int>();
    cfg.kernel_width = c.at("kernel_width").get<int>();
    cfg.dropout_rate = c.at("dropout_rate").get<double>();
    cfg.pool_width = c.at("pool_width").get<int>();
    cfg.hidden_units = c.at("hidden_units").get<int>();
    cfg.learning_rate = c.at("learning_rate").get<double>();
    cfg.beta1 = c.at("beta1").get<double>();
    cfg.beta2 = c.at("beta2").get<double>();
    cfg.epsilon = c.at("epsilon").get<double>();
    cfg.batch_size = c.at("batch_size").get<int>();
    cfg.epochs = c.at("epochs").get<int>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    CnnNetwork net = make_cnn(cfg, j.at("input_length").get<std::size_t>(),
                              j.at("n_classes").get<std::size_t>());
    const auto& w = j.at("weights");
    net.conv1_w = w.at("conv1_w").get<std::vector<double>>();
    net.conv1_b = w.at("conv1_b").get<std::vector<double>>();
    net.conv2_w = w.at("conv2_w").get<std::vector<double>>();
    net.conv2_b = w.at("conv2_b").get<std::vector<double>>();
    net.dense_w = w.at("dense_w").get<std::vector<double>>();
    net.dense_b = w.at("dense_b").get<std::vector<double>>();
    net.out_w = w.at("out_w").get<std::vector<double>>();
    net.out_b = w.at("out_b").get<std::vector<double>>();
    return net;
}

}  // namespace detail

inline nlohmann::json model_to_json(const TrainedModel& model) {
    nlohmann::json j;
    j["format"] = "ramanml-model";
    j["version"] = 1;
    j["kind"] = to_string(model.kind());
    if (const auto* knn = std::get_if<KnnModel>(&model.impl))
        j["model"] = detail::knn_to_json(*knn);
    else if (const auto* rf = std::get_if<ForestModel>(&model.impl))
        j["model"] = detail::forest_to_json(*rf);
    else if (const auto* svc = std::get_if<SvcModel>(&model.impl))
        j["model"] = detail::svc_to_json(*svc);
    else
        j["model"] = detail::cnn_to_json(std::get<CnnNetwork>(model.impl));
    return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != "ramanml-model")
        throw FileError("model file: unrecognized format");
    if (j.value("version", 0) != 1) throw FileError("model file: unsupported version");
    const auto kind = model_kind_from_string(j.at("kind").get<std::string>());
    TrainedModel m;
    switch (kind) {
        case ModelKind::Knn: m.impl = detail::knn_from_json(j.at("model")); break;
        case ModelKind::Forest: m.impl = detail::forest_from_json(j.at("model")); break;
        case ModelKind::Svc: m.impl = detail::svc_from_json(j.at("model")); break;
        case ModelKind::Cnn: m.impl = detail::cnn_from_json(j.at("model")); break;
    }
    return m;
}

inline void save_model(const TrainedModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FileError("cannot write " + path);
    out << model_to_json(model).dump(2) << "\n";
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open model " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FileError("model " + path + ": " + e.what());
    }
    return model_from_json(j);
}

}  // namespace ramanml
