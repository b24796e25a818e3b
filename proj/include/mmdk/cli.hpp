#pragma once

#include <cstdint>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmdk::cli {

/// Bad flags, bad config or missing required inputs. Maps to exit code 2;
/// raised before any output is written.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

const std::vector<std::string>& commands();

/// Fully resolved settings of one run. Every key is also a long flag and a
/// config file key (same spelling). Resolution order: flag, config, default.
struct RunConfig {
    std::string command;

    // inputs
    std::optional<std::string> manifest;
    std::optional<std::string> dist;
    std::vector<std::string> kernel;  // `fuse` takes several
    std::optional<std::string> topics;
    std::optional<std::string> model;
    std::optional<std::string> predictions;
    std::optional<std::string> paired;
    std::vector<std::string> query;  // empty = all
    std::optional<std::string> out;

    // manifest columns
    std::string label = "label";
    std::string time = "time";
    std::string event = "event";
    std::optional<std::string> site;

    std::optional<std::string> task;
    double sigma = 10.0;
    std::optional<double> gamma;  // nullopt = median rule
    std::optional<double> alpha = 0.0625;  // nullopt = search over the log grid
    std::optional<double> C;
    std::optional<double> epsilon;
    std::optional<std::size_t> folds;  // nullopt = 5 (4 for svc); 0 = single fit
    double val_frac = 0.1;
    std::size_t k = 5;
    std::size_t medoids = 25;
    std::string extreme = "highest";
    double censor = 10.0;  // years
    double topic_sigma = 10.0;
    std::optional<std::string> mode;
    bool rescale = true;
    std::size_t clusters = 2;
    double auc_moderate = 0.6;
    double auc_strong = 0.7;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    nlohmann::json to_json() const;
    // Throws UsageError on unknown keys, wrong types and out-of-range values.
    static RunConfig from_json(const nlohmann::json& j);

    std::size_t fold_count() const;
};

RunConfig default_config();

/// Resolves argv (plus an optional --config file) into a RunConfig.
RunConfig parse_args(int argc, const char* const* argv);

/// Executes one pipeline; writes `<out>/manifest.json` listing every produced
/// file with its SHA-256.
void run(const RunConfig& config, std::ostream& log);

/// Entry point: 0 on success, 2 on usage errors, 1 on pipeline failures.
int main(int argc, const char* const* argv, std::ostream& log, std::ostream& err);

std::string sha256_file(const std::string& path);

}  // namespace mmdk::cli
