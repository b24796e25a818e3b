#include "mmdk/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "mmdk/bags.hpp"
#include "mmdk/csv.hpp"
#include "mmdk/error.hpp"
#include "mmdk/explain.hpp"
#include "mmdk/fusion.hpp"
#include "mmdk/mmd.hpp"
#include "mmdk/retrieval.hpp"
#include "mmdk/stats.hpp"
#include "mmdk/survival_stats.hpp"
#include "mmdk/validation.hpp"
#include "mmdk/ward.hpp"

namespace mmdk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Kind { number, integer, text, list, boolean, number_or_word };

struct Key {
    const char* name;
    Kind kind;
    const char* help;
    const char* word = nullptr;  // accepted keyword for number_or_word
};

// Every config key; each is also the long flag --<name>.
const std::vector<Key>& keys() {
    static const std::vector<Key> k = {
        {"manifest", Kind::text, "dataset manifest CSV (id, path, patient, label columns)"},
        {"dist", Kind::text, "distance matrix file (SMM1)"},
        {"kernel", Kind::list, "kernel matrix file (SMM1); repeat for fuse"},
        {"topics", Kind::text, "topic profile CSV (patient_id, then 0/1 columns)"},
        {"model", Kind::text, "trained model JSON"},
        {"predictions", Kind::text, "CSV with id and score columns"},
        {"paired", Kind::text, "CSV with a and b columns for the signed-rank test"},
        {"query", Kind::list, "query ids (default: all)"},
        {"out", Kind::text, "output directory"},
        {"label", Kind::text, "manifest label / target column"},
        {"time", Kind::text, "manifest survival time column (years)"},
        {"event", Kind::text, "manifest event indicator column (0/1)"},
        {"site", Kind::text, "manifest column restricting retrieval pools"},
        {"task", Kind::text, "svr | svc | surv"},
        {"sigma", Kind::number, "element kernel bandwidth"},
        {"gamma", Kind::number_or_word, "distance-to-kernel decay: 'median' or a number", "median"},
        {"alpha", Kind::number_or_word, "survival regularization: a number or 'search'", "search"},
        {"C", Kind::number, "SVM box constraint (default: tuned)"},
        {"epsilon", Kind::number, "SVR tube width (default: tuned)"},
        {"folds", Kind::integer, "cross-validation folds; 0 fits one model on everything"},
        {"val-frac", Kind::number, "validation fraction of each training fold"},
        {"k", Kind::integer, "retrieved neighbors"},
        {"medoids", Kind::integer, "representative patches"},
        {"extreme", Kind::text, "highest | lowest sensitivity per patient"},
        {"censor", Kind::number, "follow-up horizon in years"},
        {"topic-sigma", Kind::number, "topic kernel bandwidth"},
        {"mode", Kind::text, "fusion mode: sum | product"},
        {"rescale", Kind::boolean, "divide sum fusion by the kernel count"},
        {"clusters", Kind::integer, "flat clusters cut from the dendrogram"},
        {"auc-moderate", Kind::number, "AUC lower bound of the moderate bin"},
        {"auc-strong", Kind::number, "AUC lower bound of the strong bin"},
        {"seed", Kind::integer, "seed for fold shuffles and draw-breaking"},
        {"threads", Kind::integer, "worker threads"},
    };
    return k;
}

const Key* find_key(const std::string& name) {
    for (const auto& k : keys())
        if (name == k.name) return &k;
    return nullptr;
}

json from_text(const Key& key, const std::vector<std::string>& values) {
    const std::string name = std::string("--") + key.name;
    if (key.kind == Kind::list) return json(values);
    if (values.size() != 1) throw UsageError(name + " given more than once");
    const std::string& v = values.front();
    switch (key.kind) {
        case Kind::text: return v;
        case Kind::boolean:
            if (v == "true" || v == "1") return true;
            if (v == "false" || v == "0") return false;
            throw UsageError(name + ": expected true or false, got '" + v + "'");
        case Kind::integer:
            if (v.empty() || !std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); }))
                throw UsageError(name + ": expected a nonnegative integer, got '" + v + "'");
            return std::stoull(v);
        case Kind::number_or_word:
            if (v == key.word) return v;
            [[fallthrough]];
        case Kind::number:
            try {
                return csv::parse_double(v);
            } catch (const Error&) {
                throw UsageError(name + ": expected a number" +
                                 (key.word ? std::string(" or '") + key.word + "'" : std::string()) + ", got '" + v +
                                 "'");
            }
        case Kind::list: break;
    }
    return v;
}

// Typed readers for RunConfig::from_json.
std::string want_text(const json& v, const std::string& key) {
    if (!v.is_string()) throw UsageError("config key '" + key + "' must be a string");
    return v.get<std::string>();
}

double want_number(const json& v, const std::string& key) {
    if (!v.is_number()) throw UsageError("config key '" + key + "' must be a number");
    return v.get<double>();
}

std::uint64_t want_integer(const json& v, const std::string& key) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw UsageError("config key '" + key + "' must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

std::vector<std::string> want_list(const json& v, const std::string& key) {
    if (v.is_string()) return {v.get<std::string>()};
    if (!v.is_array()) throw UsageError("config key '" + key + "' must be a list of strings");
    std::vector<std::string> out;
    for (const auto& e : v) out.push_back(want_text(e, key));
    return out;
}

std::optional<double> want_number_or_word(const json& v, const std::string& key, const char* word) {
    if (v.is_string() && v.get<std::string>() == word) return std::nullopt;
    if (!v.is_number()) throw UsageError("config key '" + key + "' must be a number or '" + word + "'");
    return v.get<double>();
}

json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }
json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void require_positive(double v, const std::string& key) {
    if (!(v > 0.0) || !std::isfinite(v)) throw UsageError("--" + key + " must be a positive number");
}

}  // namespace

const std::vector<std::string>& commands() {
    static const std::vector<std::string> c = {"kernel", "transform", "retrieve", "eval-retrieval", "fit",
                                               "predict", "explain", "medoids", "topics", "fuse",
                                               "cluster", "export", "stats"};
    return c;
}

json RunConfig::to_json() const {
    return json{
        {"command", command},
        {"manifest", opt(manifest)},
        {"dist", opt(dist)},
        {"kernel", kernel},
        {"topics", opt(topics)},
        {"model", opt(model)},
        {"predictions", opt(predictions)},
        {"paired", opt(paired)},
        {"query", query},
        {"out", opt(out)},
        {"label", label},
        {"time", time},
        {"event", event},
        {"site", opt(site)},
        {"task", opt(task)},
        {"sigma", sigma},
        {"gamma", gamma ? json(*gamma) : json("median")},
        {"alpha", alpha ? json(*alpha) : json("search")},
        {"C", opt(C)},
        {"epsilon", opt(epsilon)},
        {"folds", folds ? json(*folds) : json(nullptr)},
        {"val-frac", val_frac},
        {"k", k},
        {"medoids", medoids},
        {"extreme", extreme},
        {"censor", censor},
        {"topic-sigma", topic_sigma},
        {"mode", opt(mode)},
        {"rescale", rescale},
        {"clusters", clusters},
        {"auc-moderate", auc_moderate},
        {"auc-strong", auc_strong},
        {"seed", seed},
        {"threads", threads},
    };
}

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    RunConfig c;
    for (const auto& [key, v] : j.items()) {
        if (key != "command" && !find_key(key)) throw UsageError("unknown config key '" + key + "'");
        if (v.is_null()) continue;  // unset
        if (key == "command") c.command = want_text(v, key);
        else if (key == "manifest") c.manifest = want_text(v, key);
        else if (key == "dist") c.dist = want_text(v, key);
        else if (key == "kernel") c.kernel = want_list(v, key);
        else if (key == "topics") c.topics = want_text(v, key);
        else if (key == "model") c.model = want_text(v, key);
        else if (key == "predictions") c.predictions = want_text(v, key);
        else if (key == "paired") c.paired = want_text(v, key);
        else if (key == "query") c.query = want_list(v, key);
        else if (key == "out") c.out = want_text(v, key);
        else if (key == "label") c.label = want_text(v, key);
        else if (key == "time") c.time = want_text(v, key);
        else if (key == "event") c.event = want_text(v, key);
        else if (key == "site") c.site = want_text(v, key);
        else if (key == "task") c.task = want_text(v, key);
        else if (key == "sigma") c.sigma = want_number(v, key);
        else if (key == "gamma") c.gamma = want_number_or_word(v, key, "median");
        else if (key == "alpha") c.alpha = want_number_or_word(v, key, "search");
        else if (key == "C") c.C = want_number(v, key);
        else if (key == "epsilon") c.epsilon = want_number(v, key);
        else if (key == "folds") c.folds = want_integer(v, key);
        else if (key == "val-frac") c.val_frac = want_number(v, key);
        else if (key == "k") c.k = want_integer(v, key);
        else if (key == "medoids") c.medoids = want_integer(v, key);
        else if (key == "extreme") c.extreme = want_text(v, key);
        else if (key == "censor") c.censor = want_number(v, key);
        else if (key == "topic-sigma") c.topic_sigma = want_number(v, key);
        else if (key == "mode") c.mode = want_text(v, key);
        else if (key == "rescale") {
            if (!v.is_boolean()) throw UsageError("config key 'rescale' must be true or false");
            c.rescale = v.get<bool>();
        } else if (key == "clusters") c.clusters = want_integer(v, key);
        else if (key == "auc-moderate") c.auc_moderate = want_number(v, key);
        else if (key == "auc-strong") c.auc_strong = want_number(v, key);
        else if (key == "seed") c.seed = want_integer(v, key);
        else if (key == "threads") c.threads = static_cast<unsigned>(want_integer(v, key));
    }

    if (!c.command.empty() && std::find(commands().begin(), commands().end(), c.command) == commands().end())
        throw UsageError("unknown command '" + c.command + "'");
    require_positive(c.sigma, "sigma");
    require_positive(c.topic_sigma, "topic-sigma");
    require_positive(c.censor, "censor");
    if (c.gamma && (!(*c.gamma >= 0.0) || !std::isfinite(*c.gamma)))
        throw UsageError("--gamma must be 'median' or a nonnegative number");
    if (c.alpha) require_positive(*c.alpha, "alpha");
    if (c.C) require_positive(*c.C, "C");
    if (c.epsilon && (!(*c.epsilon >= 0.0) || !std::isfinite(*c.epsilon)))
        throw UsageError("--epsilon must be nonnegative");
    if (c.folds && *c.folds == 1) throw UsageError("--folds must be 0 or at least 2");
    if (!(c.val_frac > 0.0 && c.val_frac < 1.0)) throw UsageError("--val-frac must lie in (0, 1)");
    if (c.k == 0) throw UsageError("--k must be at least 1");
    if (c.medoids == 0) throw UsageError("--medoids must be at least 1");
    if (c.clusters == 0) throw UsageError("--clusters must be at least 1");
    if (c.threads == 0) throw UsageError("--threads must be at least 1");
    if (c.extreme != "highest" && c.extreme != "lowest") throw UsageError("--extreme must be highest or lowest");
    if (c.mode && *c.mode != "sum" && *c.mode != "product") throw UsageError("--mode must be sum or product");
    if (c.task) {
        try {
            parse_task(*c.task);
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
    }
    if (!(0.0 < c.auc_moderate && c.auc_moderate < c.auc_strong && c.auc_strong <= 1.0))
        throw UsageError("AUC bin bounds must satisfy 0 < auc-moderate < auc-strong <= 1");
    return c;
}

std::size_t RunConfig::fold_count() const {
    if (folds) return *folds;
    return task && parse_task(*task) == Task::svc ? 4 : 5;
}

RunConfig default_config() { return RunConfig{}; }

RunConfig parse_args(int argc, const char* const* argv) {
    CLI::App app{"Set-similarity kernels between embedding bags and the kernel machines built on them", "mmdk"};
    app.set_help_all_flag("--help-all");
    std::string command;
    app.add_option("command", command, "subcommand")->check(CLI::IsMember(commands()));
    std::string config_path;
    app.add_option("--config", config_path, "JSON run config (keys = long flag names)");
    std::map<std::string, std::vector<std::string>> raw;
    for (const auto& key : keys()) {
        auto* option = app.add_option(std::string("--") + key.name, raw[key.name], key.help);
        if (key.kind == Kind::list)
            option->allow_extra_args(false)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
        else
            option->multi_option_policy(CLI::MultiOptionPolicy::Throw);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        throw;
    } catch (const CLI::CallForAllHelp&) {
        throw;
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    json merged = default_config().to_json();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw UsageError("cannot read config " + config_path);
        json file;
        try {
            file = json::parse(in);
        } catch (const json::exception& e) {
            throw UsageError("config " + config_path + ": " + e.what());
        }
        if (!file.is_object()) throw UsageError("config " + config_path + " must hold a JSON object");
        for (const auto& [key, v] : file.items()) {
            if (key != "command" && !find_key(key)) throw UsageError("unknown config key '" + key + "'");
            merged[key] = v;
        }
    }
    for (const auto& key : keys())
        if (app.count(std::string("--") + key.name) > 0) merged[key.name] = from_text(key, raw.at(key.name));
    if (!command.empty()) merged["command"] = command;

    RunConfig config = RunConfig::from_json(merged);
    if (config.command.empty()) throw UsageError("no command given; expected one of: kernel, transform, ...");
    return config;
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
    std::array<char, 1 << 16> buffer;
    while (in) {
        in.read(buffer.data(), buffer.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
    std::ostringstream hex;
    for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

namespace {

// Tracks files written into the output directory.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    std::string file(const std::string& name) {
        names_.push_back(name);
        return (dir_ / name).string();
    }
    std::string matrix(const std::string& name) {
        names_.push_back(name);
        names_.push_back(name + ".meta.json");
        return (dir_ / name).string();
    }

    void finish(const RunConfig& config) const {
        json files = json::array();
        for (const auto& name : names_) files.push_back({{"path", name}, {"sha256", sha256_file((dir_ / name).string())}});
        const json manifest{{"command", config.command}, {"config", config.to_json()}, {"files", files}};
        std::ofstream out(dir_ / "manifest.json", std::ios::trunc);
        if (!out) throw Error("cannot write " + (dir_ / "manifest.json").string());
        out << manifest.dump(2) << '\n';
    }

private:
    fs::path dir_;
    std::vector<std::string> names_;
};

std::ofstream open_csv(const std::string& path, const std::vector<std::string>& header) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    csv::write_row(out, header);
    return out;
}

std::string num(double v) { return csv::format_double(v); }

const std::string& single_kernel(const RunConfig& c) {
    if (c.kernel.size() != 1) throw UsageError("--kernel must be given exactly once for " + c.command);
    return c.kernel.front();
}

// Usage checks that need no file access, run before anything is written.
void check_inputs(const RunConfig& c) {
    auto need = [&](bool ok, const std::string& what) {
        if (!ok) throw UsageError(c.command + " requires " + what);
    };
    auto one_matrix = [&] {
        need(c.dist.has_value() != (c.kernel.size() == 1) && c.kernel.size() <= 1,
             "exactly one of --dist or --kernel");
    };
    need(c.out.has_value(), "--out");
    const auto& cmd = c.command;
    if (cmd == "kernel") need(c.manifest.has_value(), "--manifest");
    else if (cmd == "transform") need(c.dist.has_value(), "--dist");
    else if (cmd == "retrieve" || cmd == "eval-retrieval") {
        single_kernel(c);
        need(c.manifest.has_value(), "--manifest");
    } else if (cmd == "fit") {
        need(c.task.has_value(), "--task");
        need(c.manifest.has_value(), "--manifest");
        one_matrix();
    } else if (cmd == "predict") {
        need(c.model.has_value(), "--model");
        one_matrix();
    } else if (cmd == "explain" || cmd == "medoids") {
        need(c.model.has_value(), "--model");
        need(c.manifest.has_value(), "--manifest");
    } else if (cmd == "topics") need(c.topics.has_value(), "--topics");
    else if (cmd == "fuse") {
        need(c.kernel.size() >= 2, "at least two --kernel inputs");
        need(c.mode.has_value(), "an explicit --mode (sum or product)");
    } else if (cmd == "cluster" || cmd == "export") one_matrix();
    else if (cmd == "stats") {
        need(c.paired.has_value() || (c.predictions && c.manifest && c.task),
             "--paired, or --predictions with --manifest and --task");
    }
}

double resolve_gamma(const RunConfig& c, const DistanceMatrix& d) { return c.gamma ? *c.gamma : median_gamma(d); }

std::set<std::string> query_set(const RunConfig& c) { return {c.query.begin(), c.query.end()}; }

// ---------------------------------------------------------------- pipelines

void run_kernel(const RunConfig& c, Outputs& out, std::ostream& log) {
    const Dataset dataset = load_dataset(*c.manifest);
    const DistanceMatrix d = pairwise_distances(std::span<const EmbeddingBag>(dataset.bags), PatchKernelParams{c.sigma},
                                                PairwiseOptions{kDefaultTile, c.threads});
    write_distance(d, out.matrix("distance.smm"));
    log << "distance matrix over " << d.size() << " bags\n";
}

void run_transform(const RunConfig& c, Outputs& out, std::ostream& log) {
    const DistanceMatrix d = read_distance(*c.dist);
    const double gamma = resolve_gamma(c, d);
    write_kernel(to_kernel(d, gamma), out.matrix("kernel.smm"));
    log << "gamma " << num(gamma) << '\n';
}

void write_neighbors(const RetrievalIndex& index, const std::vector<RetrievalResult>& results, const RunConfig& c,
                     const std::string& path) {
    const auto& manifest = index.manifest();
    const bool labeled = manifest.has_column(c.label);
    auto out = open_csv(path, {"query_id", "rank", "neighbor_id", "similarity", "neighbor_label"});
    for (const auto& r : results)
        for (std::size_t i = 0; i < r.neighbors.size(); ++i) {
            std::string label;
            if (labeled) label = manifest.label(*manifest.index_of(r.neighbors[i].id), c.label).value_or("");
            csv::write_row(out, {r.query_id, std::to_string(i + 1), r.neighbors[i].id, num(r.neighbors[i].similarity),
                                 label});
        }
}

void run_retrieve(const RunConfig& c, Outputs& out, std::ostream& log) {
    const KernelMatrix kernel = read_kernel(single_kernel(c));
    const DatasetManifest manifest = read_manifest(*c.manifest);
    const RetrievalIndex index(kernel, manifest, c.site);
    std::vector<RetrievalResult> results;
    const auto wanted = query_set(c);
    for (const auto& id : kernel.ids)
        if (wanted.empty() || wanted.count(id)) results.push_back(index.query_top_k(id, c.k));
    for (const auto& id : wanted)
        if (std::find(kernel.ids.begin(), kernel.ids.end(), id) == kernel.ids.end())
            throw ValidationError("unknown query id '" + id + "'");
    write_neighbors(index, results, c, out.file("neighbors.csv"));
    log << results.size() << " queries, k=" << c.k << '\n';
}

void run_eval_retrieval(const RunConfig& c, Outputs& out, std::ostream& log) {
    const KernelMatrix kernel = read_kernel(single_kernel(c));
    const DatasetManifest manifest = read_manifest(*c.manifest);
    if (!manifest.has_column(c.label)) throw ValidationError("manifest has no label column '" + c.label + "'");
    const RetrievalIndex index(kernel, manifest, c.site);
    const MmvReport report = mmv_report(index, c.label, c.k);
    write_neighbors(index, report.results, c, out.file("neighbors.csv"));
    auto summary = open_csv(out.file("summary.csv"), {"label", "hits", "queries", "mmv"});
    for (const auto& [label, counts] : report.per_label)
        csv::write_row(summary, {label, std::to_string(counts.first), std::to_string(counts.second),
                                 num(report.label_value(label))});
    csv::write_row(summary, {"macro", "", "", num(report.macro)});
    csv::write_row(summary, {"micro", "", std::to_string(report.results.size()), num(report.mmv)});
    log << "mMV@" << c.k << " macro " << num(report.macro) << " micro " << num(report.mmv) << '\n';
}

// Labels of `ids` from the manifest. Ids without the needed label are left out;
// `kept` receives the positions of the ids that stay.
TaskData task_data(Task task, const DatasetManifest& manifest, const std::vector<std::string>& ids,
                   const RunConfig& c, std::vector<std::size_t>& kept) {
    TaskData data;
    data.task = task;
    const std::string column = task == Task::survival ? c.time : c.label;
    if (!manifest.has_column(column)) throw ValidationError("manifest has no column '" + column + "'");
    if (task == Task::survival && !manifest.has_column(c.event))
        throw ValidationError("manifest has no column '" + c.event + "'");

    std::vector<std::string> raw;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto row = manifest.index_of(ids[i]);
        if (!row) throw ValidationError("matrix id '" + ids[i] + "' is missing from the manifest");
        const auto value = manifest.label(*row, column);
        if (!value) continue;
        std::optional<std::string> event;
        if (task == Task::survival) {
            event = manifest.label(*row, c.event);
            if (!event) continue;
        }
        kept.push_back(i);
        data.ids.push_back(ids[i]);
        data.groups.push_back(manifest.rows[*row].patient_id);
        raw.push_back(*value);
        if (event) {
            if (*event != "0" && *event != "1")
                throw ValidationError("event of '" + ids[i] + "' must be 0 or 1, got '" + *event + "'");
            data.events.push_back(*event == "1");
        }
    }
    if (data.ids.empty()) throw ValidationError("no sample carries the '" + column + "' label");

    if (task == Task::svc) {
        std::set<std::string> classes(raw.begin(), raw.end());
        if (classes.size() != 2)
            throw ValidationError("classification needs exactly two classes in '" + column + "', found " +
                                  std::to_string(classes.size()));
        std::string positive = *classes.rbegin();
        try {
            positive = csv::parse_double(*classes.begin()) > csv::parse_double(*classes.rbegin()) ? *classes.begin()
                                                                                                   : *classes.rbegin();
        } catch (const Error&) {
        }
        for (const auto& v : raw) data.targets.push_back(v == positive ? 1.0 : -1.0);
    } else {
        for (std::size_t i = 0; i < raw.size(); ++i) {
            try {
                data.targets.push_back(csv::parse_double(raw[i]));
            } catch (const Error&) {
                throw ValidationError("'" + column + "' of '" + data.ids[i] + "' is not a number: '" + raw[i] + "'");
            }
        }
    }
    if (task == Task::survival) {
        const auto censored = censor_at(data.records({}), c.censor);
        for (std::size_t i = 0; i < censored.size(); ++i) {
            data.targets[i] = censored[i].time;
            data.events[i] = censored[i].event ? 1 : 0;
        }
    }
    data.validate();
    return data;
}

Grid grid_for(const RunConfig& c, Task task, bool tunable_gamma) {
    const GammaRule rule = c.gamma ? GammaRule::fixed(*c.gamma) : GammaRule::median_rule();
    Grid grid;
    if (task == Task::survival) {
        grid = alpha_grid(c.alpha ? std::vector<double>{*c.alpha} : alpha_search_grid(), rule);
    } else {
        grid = default_grid(task);
        for (auto& g : grid) {
            if (c.C) g.C = *c.C;
            if (c.epsilon) g.epsilon = *c.epsilon;
            if (c.gamma) g.gamma = rule;
        }
    }
    if (!tunable_gamma)
        for (auto& g : grid) g.gamma = GammaRule::median_rule();
    Grid unique;
    for (const auto& g : grid)
        if (std::find(unique.begin(), unique.end(), g) == unique.end()) unique.push_back(g);
    return unique;
}

std::string describe(const Candidate& cand, Task task) {
    std::ostringstream s;
    if (task == Task::survival)
        s << "alpha=" << num(cand.alpha);
    else
        s << "C=" << num(cand.C) << (task == Task::svr ? ";epsilon=" + num(cand.epsilon) : "");
    s << ";gamma=" << (cand.gamma.median ? num(cand.gamma.value) + "*median" : num(cand.gamma.value));
    return s.str();
}

void run_fit(const RunConfig& c, Outputs& out, std::ostream& log) {
    const Task task = parse_task(*c.task);
    const DatasetManifest manifest = read_manifest(*c.manifest);
    std::optional<DistanceMatrix> dist;
    std::optional<KernelMatrix> kernel;
    if (c.dist)
        dist = read_distance(*c.dist);
    else
        kernel = read_kernel(single_kernel(c));
    const auto& ids = dist ? dist->ids : kernel->ids;
    std::vector<std::size_t> kept;
    const TaskData data = task_data(task, manifest, ids, c, kept);
    const KernelSource source = dist ? KernelSource(subset(*dist, kept)) : KernelSource(subset(*kernel, kept));
    const Grid grid = grid_for(c, task, source.has_distances());
    const std::size_t folds = c.fold_count();

    if (folds == 0) {
        std::vector<std::size_t> all(data.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        Candidate chosen = grid.front();
        if (grid.size() > 1) {
            const auto [inner, val] = split_validation(all, data.groups, {}, c.val_frac, c.seed);
            if (val.empty()) throw ValidationError("validation split is empty; raise --val-frac");
            const Objective objective =
                task == Task::survival ? Objective::negative_metric_plus_alpha : Objective::negative_metric;
            chosen = tune(source, data, inner, val, grid, objective, all).best;
        }
        const KernelMatrix k = source.kernel(source.resolve_gamma(chosen.gamma, all));
        const DualModel model = fit_model(k, data, all, chosen);
        write_model(model, out.file("model.json"));
        log << "fitted " << to_string(task) << " on " << data.size() << " samples (" << describe(chosen, task)
            << ")\n";
        return;
    }

    CvOptions options;
    options.folds = folds;
    options.val_frac = c.val_frac;
    options.seed = c.seed;
    options.threads = c.threads;
    options.grid = grid;
    const FoldResults results = cross_validate(source, data, options);

    auto fold_csv = open_csv(out.file("folds.csv"), {"task", "fold", "metric", "value"});
    auto pred_csv = open_csv(out.file("predictions.csv"), {"fold", "id", "score"});
    json fold_params = json::array();
    for (const auto& f : results.folds) {
        csv::write_row(fold_csv, {to_string(task), std::to_string(f.fold), results.metric, num(f.metric)});
        if (f.logrank_p)
            csv::write_row(fold_csv, {to_string(task), std::to_string(f.fold), "logrank_p", num(*f.logrank_p)});
        for (std::size_t i = 0; i < f.test_ids.size(); ++i)
            csv::write_row(pred_csv, {std::to_string(f.fold), f.test_ids[i], num(f.predictions[i])});
        fold_params.push_back({{"fold", f.fold},
                               {"chosen", describe(f.chosen, task)},
                               {"gamma", f.gamma ? json(*f.gamma) : json(nullptr)}});
    }
    json summary{{"task", to_string(task)},
                 {"metric", results.metric},
                 {"mean", results.mean},
                 {"sd", results.sd},
                 {"folds", fold_params}};
    if (task == Task::svc) summary["auc_bin"] = to_string(bin_auc(results.mean, c.auc_moderate, c.auc_strong));
    if (results.aggregated_logrank_p) summary["aggregated_logrank_p"] = *results.aggregated_logrank_p;
    std::ofstream(out.file("summary.json"), std::ios::trunc) << summary.dump(2) << '\n';
    log << results.metric << " " << num(results.mean) << " +/- " << num(results.sd) << " over " << folds
        << " folds\n";
}

void run_predict(const RunConfig& c, Outputs& out, std::ostream& log) {
    const DualModel model = read_model(*c.model);
    KernelMatrix kernel;
    if (c.dist) {
        if (!model.kernel_meta.gamma) throw MetaMismatch("model was not trained on a transformed distance matrix");
        kernel = to_kernel(read_distance(*c.dist), *model.kernel_meta.gamma);
    } else {
        kernel = read_kernel(single_kernel(c));
    }
    std::vector<std::string> queries = c.query;
    if (queries.empty()) {
        const std::set<std::string> train(model.train_ids.begin(), model.train_ids.end());
        for (const auto& id : kernel.ids)
            if (!train.count(id)) queries.push_back(id);
        if (queries.empty()) queries = kernel.ids;
    }
    const Eigen::VectorXd scores = predict(model, cross_block(model, kernel, queries));
    auto csv_out = open_csv(out.file("predictions.csv"), {"id", "score"});
    for (std::size_t i = 0; i < queries.size(); ++i)
        csv::write_row(csv_out, {queries[i], num(scores[static_cast<Eigen::Index>(i)])});
    log << queries.size() << " predictions\n";
}

std::vector<SensitivityMap> explain_bags(const RunConfig& c, const DualModel& model, const Dataset& dataset,
                                         std::vector<const EmbeddingBag*>& queries) {
    if (!model.kernel_meta.gamma) throw MetaMismatch("model kernel has no gamma; explanations need exp(-gamma*D)");
    const PatchExplainer explainer(model, dataset.bags, PatchKernelParams{c.sigma}, *model.kernel_meta.gamma,
                                   c.threads);
    const auto wanted = query_set(c);
    for (const auto& id : wanted)
        if (!dataset.manifest.index_of(id)) throw ValidationError("unknown query id '" + id + "'");
    std::vector<SensitivityMap> maps;
    for (const auto& bag : dataset.bags) {
        if (!wanted.empty() && !wanted.count(bag.id)) continue;
        queries.push_back(&bag);
        maps.push_back(explainer.explain(bag));
    }
    return maps;
}

void run_explain(const RunConfig& c, Outputs& out, std::ostream& log) {
    const DualModel model = read_model(*c.model);
    const Dataset dataset = load_dataset(*c.manifest);
    std::vector<const EmbeddingBag*> queries;
    const auto maps = explain_bags(c, model, dataset, queries);
    auto patches = open_csv(out.file("sensitivity.csv"), {"bag_id", "patch", "delta", "normalized"});
    auto bags = open_csv(out.file("baseline.csv"), {"bag_id", "patches", "score"});
    for (const auto& m : maps) {
        for (std::size_t j = 0; j < m.deltas.size(); ++j)
            csv::write_row(patches, {m.bag_id, std::to_string(j), num(m.deltas[j]), num(m.normalized[j])});
        csv::write_row(bags, {m.bag_id, std::to_string(m.deltas.size()), num(m.baseline)});
    }
    log << maps.size() << " bags explained\n";
}

void run_medoids(const RunConfig& c, Outputs& out, std::ostream& log) {
    const DualModel model = read_model(*c.model);
    const Dataset dataset = load_dataset(*c.manifest);
    std::vector<const EmbeddingBag*> queries;
    const auto maps = explain_bags(c, model, dataset, queries);
    std::vector<EmbeddingBag> bags;
    for (const auto* q : queries) bags.push_back(*q);
    const auto candidates = select_extreme_patches(
        bags, maps, c.extreme == "highest" ? Extreme::highest : Extreme::lowest, c.seed);
    if (candidates.size() < c.medoids)
        throw ValidationError(std::to_string(candidates.size()) + " candidate patches (one per patient), fewer than " +
                              std::to_string(c.medoids) + " medoids");
    const PamResult pam_result = pam(euclidean_distances(candidates), c.medoids);
    auto cand_csv = open_csv(out.file("candidates.csv"), {"patch_id", "patient_id", "delta", "medoid"});
    std::vector<std::size_t> cluster_size(pam_result.medoids.size(), 0);
    for (auto a : pam_result.assignment) ++cluster_size[a];
    for (std::size_t i = 0; i < candidates.size(); ++i)
        csv::write_row(cand_csv, {candidates[i].patch_id, candidates[i].patient_id, num(candidates[i].score),
                                  candidates[pam_result.medoids[pam_result.assignment[i]]].patch_id});
    auto med_csv = open_csv(out.file("medoids.csv"), {"patch_id", "patient_id", "delta", "cluster_size"});
    for (std::size_t m = 0; m < pam_result.medoids.size(); ++m) {
        const auto& p = candidates[pam_result.medoids[m]];
        csv::write_row(med_csv, {p.patch_id, p.patient_id, num(p.score), std::to_string(cluster_size[m])});
    }
    log << pam_result.medoids.size() << " medoids, cost " << num(pam_result.cost) << '\n';
}

void run_topics(const RunConfig& c, Outputs& out, std::ostream& log) {
    const auto profiles = read_topics(*c.topics);
    write_kernel(topic_kernel(profiles, c.topic_sigma), out.matrix("kernel.smm"));
    log << "topic kernel over " << profiles.size() << " patients\n";
}

void run_fuse(const RunConfig& c, Outputs& out, std::ostream& log) {
    std::optional<DatasetManifest> manifest;
    if (c.manifest) manifest = read_manifest(*c.manifest);
    std::vector<KernelMatrix> kernels;
    for (const auto& path : c.kernel) {
        KernelMatrix k = read_kernel(path);
        // Bag-level kernels join patient-level ones through the manifest.
        if (manifest && std::all_of(k.ids.begin(), k.ids.end(),
                                    [&](const std::string& id) { return manifest->index_of(id).has_value(); }))
            k = relabel_by_patient(k, *manifest);
        kernels.push_back(std::move(k));
    }
    const auto aligned = align(kernels);
    const KernelMatrix fused = combine(aligned, parse_fusion_mode(*c.mode), c.rescale);
    write_kernel(fused, out.matrix("kernel.smm"));
    log << "fused " << kernels.size() << " kernels over " << fused.size() << " ids (" << *c.mode << ")\n";
}

DistanceMatrix cluster_distances(const RunConfig& c) {
    if (c.kernel.size() == 1) return kernel_to_distance(read_kernel(c.kernel.front()));
    const DistanceMatrix d = read_distance(*c.dist);
    return kernel_to_distance(to_kernel(d, resolve_gamma(c, d)));
}

void run_cluster(const RunConfig& c, Outputs& out, std::ostream& log) {
    const DistanceMatrix d = cluster_distances(c);
    const Dendrogram tree = ward_cluster(d.values, d.ids);
    auto merges = open_csv(out.file("dendrogram.csv"), {"step", "a", "b", "height", "size"});
    for (std::size_t s = 0; s < tree.merges.size(); ++s) {
        const auto& m = tree.merges[s];
        csv::write_row(merges, {std::to_string(s), std::to_string(m.a), std::to_string(m.b), num(m.height),
                                std::to_string(m.size)});
    }
    const auto labels = cut(tree, c.clusters);
    auto label_csv = open_csv(out.file("labels.csv"), {"id", "cluster"});
    for (std::size_t i = 0; i < labels.size(); ++i) csv::write_row(label_csv, {tree.leaf_ids[i], std::to_string(labels[i])});
    log << "ward tree over " << d.size() << " items, cut into " << c.clusters << '\n';
}

void run_export(const RunConfig& c, Outputs& out, std::ostream& log) {
    const DistanceMatrix d = c.dist ? read_distance(*c.dist) : kernel_to_distance(read_kernel(single_kernel(c)));
    const std::string path = out.file("distances.csv");
    export_distances(d, path);
    out.file("distances.csv.meta.json");
    log << "exported " << d.size() << "x" << d.size() << " distances\n";
}

void run_stats(const RunConfig& c, Outputs& out, std::ostream& log) {
    auto rows = open_csv(out.file("stats.csv"), {"task", "fold", "metric", "value"});
    if (c.paired) {
        const csv::Table t = csv::read(*c.paired);
        const auto ia = t.require("a"), ib = t.require("b");
        std::vector<double> a, b;
        for (const auto& r : t.rows) {
            a.push_back(csv::parse_double(r[ia]));
            b.push_back(csv::parse_double(r[ib]));
        }
        const double p = wilcoxon_signed_rank(a, b, Alternative::greater);
        csv::write_row(rows, {"paired", "all", "wilcoxon_p_greater", num(p)});
        log << "signed-rank p (a > b) " << num(p) << '\n';
    }
    if (!c.predictions) return;

    const Task task = parse_task(*c.task);
    const DatasetManifest manifest = read_manifest(*c.manifest);
    const csv::Table t = csv::read(*c.predictions);
    const auto iid = t.require("id"), iscore = t.require("score");
    std::vector<std::string> ids;
    std::map<std::string, double> scores;
    for (const auto& r : t.rows) {
        if (!scores.emplace(r[iid], csv::parse_double(r[iscore])).second)
            throw ValidationError("duplicate prediction for '" + r[iid] + "'");
        ids.push_back(r[iid]);
    }
    std::vector<std::size_t> kept;
    const TaskData data = task_data(task, manifest, ids, c, kept);
    std::vector<double> s;
    for (const auto& id : data.ids) s.push_back(scores.at(id));
    const std::string name = to_string(task);
    if (task == Task::svr) {
        const auto r = spearman(data.targets, s);
        csv::write_row(rows, {name, "all", "SCC", num(r.rho)});
        csv::write_row(rows, {name, "all", "SCC_p", num(r.p_value)});
        log << "SCC " << num(r.rho) << " (p=" << num(r.p_value) << ")\n";
    } else if (task == Task::svc) {
        std::vector<int> labels;
        for (double y : data.targets) labels.push_back(y > 0 ? 1 : 0);
        const auto r = auc_roc(labels, s);
        const auto bin = bin_auc(r.auc, c.auc_moderate, c.auc_strong);
        csv::write_row(rows, {name, "all", "AUC", num(r.auc)});
        csv::write_row(rows, {name, "all", "AUC_bin_" + to_string(bin), "1"});
        log << "AUC " << num(r.auc) << " (" << to_string(bin) << ")\n";
    } else {
        const auto records = data.records({});
        const double cindex = concordance_index(records, s);
        csv::write_row(rows, {name, "all", "C-index", num(cindex)});
        // Without training scores the split uses the median of the given scores.
        const auto high = split_by_training_median(s, s);
        std::vector<std::string> groups;
        for (int h : high) groups.push_back(h ? "high" : "low");
        auto km = open_csv(out.file("km.csv"), {"time", "survival", "at_risk", "group"});
        for (const auto& curve : km_curves(records, groups))
            for (std::size_t i = 0; i < curve.times.size(); ++i)
                csv::write_row(km, {num(curve.times[i]), num(curve.survival[i]), std::to_string(curve.at_risk[i]),
                                    curve.group});
        const auto lr = logrank(records, high);
        csv::write_row(rows, {name, "all", "logrank_p", num(lr.p_value)});
        log << "C-index " << num(cindex) << ", log-rank p " << num(lr.p_value) << '\n';
    }
}

}  // namespace

void run(const RunConfig& c, std::ostream& log) {
    check_inputs(c);
    Outputs out(*c.out);
    static const std::map<std::string, void (*)(const RunConfig&, Outputs&, std::ostream&)> table = {
        {"kernel", run_kernel},   {"transform", run_transform}, {"retrieve", run_retrieve},
        {"eval-retrieval", run_eval_retrieval}, {"fit", run_fit}, {"predict", run_predict},
        {"explain", run_explain}, {"medoids", run_medoids},     {"topics", run_topics},
        {"fuse", run_fuse},       {"cluster", run_cluster},     {"export", run_export},
        {"stats", run_stats},
    };
    table.at(c.command)(c, out, log);
    out.finish(c);
}

int main(int argc, const char* const* argv, std::ostream& log, std::ostream& err) {
    RunConfig config;
    try {
        config = parse_args(argc, argv);
        check_inputs(config);
    } catch (const CLI::CallForHelp&) {
        log << "usage: mmdk <command> [--flag value ...] [--config run.json]\ncommands:";
        for (const auto& cmd : commands()) log << ' ' << cmd;
        log << "\nflags:\n  --config  JSON run config (keys = flag names)\n";
        for (const auto& k : keys()) log << "  --" << std::left << std::setw(13) << k.name << ' ' << k.help << '\n';
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    }
    try {
        run(config, log);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace mmdk::cli
