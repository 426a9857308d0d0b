#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "cmn/evaluation.hpp"
#include "cmn/training.hpp"

namespace cmn::cli {

/// Everything a run needs. Text form is flat "key = value" lines with
/// '#' comments; unknown keys are rejected.
struct RunConfig {
    std::string dataset;         // raw interaction file (prepare)
    std::string split;           // prepared split directory (train)
    std::string out = "runs";    // parent of the content-addressed run directory
    std::string model = "cmn";   // cmn | bpr | gmf | fism | knn
    TrainConfig train;
    double rho = 0.5;            // FISM neighborhood normalisation exponent
    std::size_t knn_k = 50;
    std::size_t eval_negatives = 100;
    double user_fraction = 1.0;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Canonical text with every key, in a fixed order.
std::string to_config_text(const RunConfig& config);

/// 16 hex digits of FNV-1a over the canonical text (the output location is excluded).
std::string fingerprint(const RunConfig& config);

struct PrepareResult {
    std::string stats;
    std::filesystem::path directory;
};

/// Ingests, optionally subsamples users, splits and writes manifest.txt,
/// negatives.txt, stats.txt and config.txt. Nothing is written when the input
/// cannot be read or parsed.
PrepareResult run_prepare(const RunConfig& config, const std::filesystem::path& out_dir);

struct TrainOutcome {
    std::filesystem::path directory;
    std::filesystem::path checkpoint;
    TrainResult result;
};

/// Trains config.model on config.split; writes config.txt, history.tsv,
/// run.log and <model>-<fingerprint>.ckpt under out/<model>-<fingerprint>/.
TrainOutcome run_train(const RunConfig& config, std::ostream* progress = nullptr);

EvalReport run_evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& split_dir,
                        const std::filesystem::path& report_path, int threads = 1);

/// Writes "hop,neighbor,weight,corated,neighbor_train_count" rows for the
/// top_n neighbours by attention summed over hops. Every hop's weights over
/// the full neighbourhood are checked to sum to 1 before truncation.
void run_export_attention(const std::filesystem::path& checkpoint, const std::filesystem::path& split_dir,
                          const std::string& user, const std::string& item, std::size_t top_n,
                          const std::filesystem::path& out_path);

/// Machine-parseable one-line error: "error<TAB>kind<TAB>message".
std::string describe_error(const std::exception& e, int& exit_code);

}  // namespace cmn::cli
