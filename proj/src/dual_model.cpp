#include "mmdk/dual_model.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <unordered_map>

#include "mmdk/error.hpp"

namespace mmdk {

using nlohmann::json;

std::string to_string(Task task) {
    switch (task) {
        case Task::svr: return "svr";
        case Task::svc: return "svc";
        case Task::survival: return "survival";
    }
    return "unknown";
}

Task parse_task(const std::string& text) {
    if (text == "svr") return Task::svr;
    if (text == "svc") return Task::svc;
    if (text == "surv" || text == "survival") return Task::survival;
    throw ValidationError("unknown task '" + text + "' (expected svr, svc or surv)");
}

void validate_model(const DualModel& model) {
    if (static_cast<std::size_t>(model.coefficients.size()) != model.train_ids.size())
        throw ValidationError("model: " + std::to_string(model.coefficients.size()) + " coefficients for " +
                              std::to_string(model.train_ids.size()) + " training items");
    if (!model.coefficients.allFinite()) throw ValidationError("model: non-finite coefficient");
    if (model.task == Task::survival) {
        if (model.bias) throw ValidationError("model: survival models carry no bias");
        return;
    }
    if (!model.bias) throw ValidationError("model: missing bias");
    if (model.hyperparams.C) {
        const double C = *model.hyperparams.C;
        if (model.coefficients.cwiseAbs().maxCoeff() > C + 1e-8)
            throw ValidationError("model: coefficient outside the box [-C, C]");
    }
    if (std::abs(model.coefficients.sum()) > 1e-8 * std::max(1.0, model.coefficients.cwiseAbs().sum()))
        throw ValidationError("model: coefficients do not sum to zero");
}

Eigen::VectorXd predict(const DualModel& model, const Eigen::MatrixXd& k_cross) {
    if (static_cast<std::size_t>(k_cross.rows()) != model.train_ids.size())
        throw DimensionMismatch("predict: cross kernel has " + std::to_string(k_cross.rows()) + " rows, model has " +
                                std::to_string(model.train_ids.size()) + " training items");
    Eigen::VectorXd scores = k_cross.transpose() * model.coefficients;
    if (model.bias) scores.array() += *model.bias;
    return scores;
}

namespace {

std::string describe(const KernelMeta& meta) {
    json j = {{"sigma", meta.sigma ? json(*meta.sigma) : json(nullptr)},
              {"gamma", meta.gamma ? json(*meta.gamma) : json(nullptr)},
              {"estimator", meta.estimator ? json(*meta.estimator) : json(nullptr)},
              {"provenance", meta.provenance}};
    return j.dump();
}

json meta_json(const KernelMeta& meta) { return json::parse(describe(meta)); }

KernelMeta meta_from_json(const json& j) {
    KernelMeta meta;
    if (j.contains("sigma") && !j.at("sigma").is_null()) meta.sigma = j.at("sigma").get<double>();
    if (j.contains("gamma") && !j.at("gamma").is_null()) meta.gamma = j.at("gamma").get<double>();
    if (j.contains("estimator") && !j.at("estimator").is_null())
        meta.estimator = j.at("estimator").get<std::string>();
    meta.provenance = j.value("provenance", std::string());
    return meta;
}

}  // namespace

void require_meta(const DualModel& model, const KernelMeta& meta) {
    if (!(model.kernel_meta == meta))
        throw MetaMismatch("kernel meta " + describe(meta) + " does not match the model's training kernel " +
                           describe(model.kernel_meta));
}

Eigen::MatrixXd cross_block(const DualModel& model, const KernelMatrix& kernel,
                            const std::vector<std::string>& query_ids) {
    require_meta(model, kernel.meta);
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < kernel.ids.size(); ++i) position.emplace(kernel.ids[i], i);
    auto locate = [&](const std::string& id) {
        const auto it = position.find(id);
        if (it == position.end()) throw ValidationError("id '" + id + "' not present in kernel");
        return it->second;
    };
    std::vector<std::size_t> rows;
    std::vector<std::size_t> cols;
    for (const auto& id : model.train_ids) rows.push_back(locate(id));
    for (const auto& id : query_ids) cols.push_back(locate(id));
    return submatrix(kernel.values, rows, cols);
}

void write_model(const DualModel& model, const std::string& path) {
    validate_model(model);
    json hp = json::object();
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) hp[key] = *v;
    };
    put("C", model.hyperparams.C);
    put("epsilon", model.hyperparams.epsilon);
    put("alpha", model.hyperparams.alpha);
    put("gamma", model.hyperparams.gamma);
    put("sigma", model.hyperparams.sigma);
    std::vector<double> coefs(model.coefficients.data(), model.coefficients.data() + model.coefficients.size());
    json j = {{"task", to_string(model.task)},
              {"train_ids", model.train_ids},
              {"coefficients", coefs},
              {"bias", model.bias ? json(*model.bias) : json(nullptr)},
              {"hyperparams", hp},
              {"kernel", meta_json(model.kernel_meta)}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << '\n';
}

DualModel read_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("model " + path + ": cannot open");
    DualModel model;
    try {
        const json j = json::parse(in);
        model.task = parse_task(j.at("task").get<std::string>());
        model.train_ids = j.at("train_ids").get<std::vector<std::string>>();
        const auto coefs = j.at("coefficients").get<std::vector<double>>();
        model.coefficients = Eigen::Map<const Eigen::VectorXd>(coefs.data(), static_cast<Eigen::Index>(coefs.size()));
        if (!j.at("bias").is_null()) model.bias = j.at("bias").get<double>();
        const auto& hp = j.at("hyperparams");
        auto get = [&](const char* key) -> std::optional<double> {
            if (!hp.contains(key)) return std::nullopt;
            return hp.at(key).get<double>();
        };
        model.hyperparams = {get("C"), get("epsilon"), get("alpha"), get("gamma"), get("sigma")};
        model.kernel_meta = meta_from_json(j.at("kernel"));
    } catch (const json::exception& e) {
        throw FormatError("model " + path + ": " + e.what());
    }
    validate_model(model);
    return model;
}

}  // namespace mmdk
