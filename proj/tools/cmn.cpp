// cmn: prepare / train / evaluate / export-attention for collaborative memory networks.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cmn/cli.hpp"
#include "cmn/errors.hpp"

namespace {

using cmn::cli::RunConfig;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out;
    std::vector<std::string> overrides;
};

RunConfig resolve(const CommonFlags& flags) {
    RunConfig config = flags.config_path.empty() ? RunConfig{} : cmn::cli::load_config(flags.config_path);
    for (const auto& kv : flags.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw cmn::ConfigError("--set expects key=value, got '" + kv + "'");
        cmn::cli::apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (flags.seed) config.train.seed = *flags.seed;
    if (flags.threads) cmn::cli::apply_setting(config, "threads", std::to_string(*flags.threads));
    return config;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "key = value run configuration");
    cmd->add_option("--seed", flags.seed, "RNG seed (overrides the config)");
    cmd->add_option("--threads", flags.threads, "worker threads (pins reproducibility)");
    cmd->add_option("--set", flags.overrides, "extra key=value settings")->take_all();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Collaborative memory network recommender"};
    app.require_subcommand(1);

    CommonFlags prepare_flags;
    std::string input;
    std::optional<std::size_t> negatives;
    std::optional<double> fraction;
    auto* prepare = app.add_subcommand("prepare", "ingest a raw log and write the leave-one-out split");
    add_common(prepare, prepare_flags);
    prepare->add_option("--input", input, "raw interaction file (user item [extra columns])");
    prepare->add_option("--out", prepare_flags.out, "output directory")->required();
    prepare->add_option("--negatives", negatives, "evaluation negatives per user (0 = all unobserved)");
    prepare->add_option("--user-fraction", fraction, "keep this fraction of users");

    CommonFlags train_flags;
    auto* train = app.add_subcommand("train", "train a model on a prepared split");
    add_common(train, train_flags);
    train->add_option("--out", train_flags.out, "parent directory for the run");

    CommonFlags eval_flags;
    std::string checkpoint;
    std::string split_dir;
    std::string report = "report.txt";
    auto* evaluate = app.add_subcommand("evaluate", "rank held-out items and write a report");
    add_common(evaluate, eval_flags);
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    evaluate->add_option("--split", split_dir, "prepared split directory")->required();
    evaluate->add_option("--out", report, "report path");

    CommonFlags export_flags;
    std::string user;
    std::string item;
    std::size_t top_n = 5;
    std::string trace = "attention.csv";
    auto* exporter = app.add_subcommand("export-attention", "dump per-hop neighbor attention for one query");
    add_common(exporter, export_flags);
    exporter->add_option("--checkpoint", checkpoint, "cmn checkpoint file")->required();
    exporter->add_option("--split", split_dir, "prepared split directory")->required();
    exporter->add_option("--user", user, "raw user id")->required();
    exporter->add_option("--item", item, "raw item id")->required();
    exporter->add_option("--top-n", top_n, "neighbors to keep (by attention summed over hops)");
    exporter->add_option("--out", trace, "trace CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error\tusage\t" << e.what() << '\n';
        return 2;
    }

    try {
        if (*prepare) {
            RunConfig config = resolve(prepare_flags);
            if (!input.empty()) config.dataset = input;
            if (negatives) config.eval_negatives = *negatives;
            if (fraction) cmn::cli::apply_setting(config, "user_fraction", std::to_string(*fraction));
            const auto result = cmn::cli::run_prepare(config, prepare_flags.out);
            std::cout << result.stats << '\n';
        } else if (*train) {
            RunConfig config = resolve(train_flags);
            if (!train_flags.out.empty()) config.out = train_flags.out;
            const auto outcome = cmn::cli::run_train(config, &std::cout);
            std::cout << "checkpoint " << outcome.checkpoint.string() << '\n';
        } else if (*evaluate) {
            const RunConfig config = resolve(eval_flags);
            const auto r = cmn::cli::run_evaluate(checkpoint, split_dir, report, config.train.threads);
            std::cout << "HR@5 " << r.hr5 << "\nHR@10 " << r.hr10 << "\nNDCG@5 " << r.ndcg5 << "\nNDCG@10 "
                      << r.ndcg10 << '\n';
        } else if (*exporter) {
            cmn::cli::run_export_attention(checkpoint, split_dir, user, item, top_n, trace);
            std::cout << "trace " << trace << '\n';
        }
    } catch (const std::exception& e) {
        int code = 1;
        std::cerr << cmn::cli::describe_error(e, code) << '\n';
        return code;
    }
    return 0;
}
