#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "cmn/checkpoint.hpp"
#include "cmn/cli.hpp"
#include "cmn/errors.hpp"
#include "support/fixtures.hpp"

using namespace cmn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "cmn_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes the toy block log as a raw interaction file.
fs::path toy_log_file(const fs::path& dir) {
    const InteractionLog log = cmn::testing::toy_block_log();
    std::ofstream out(dir / "toy.txt");
    out << "# user item\n";
    for (UserIndex u = 0; u < log.user_count(); ++u)
        for (ItemIndex i : log.items_of(u)) out << log.user_id(u) << ' ' << log.item_id(i) << " 1\n";
    return dir / "toy.txt";
}

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string command =
        std::string("\"") + CMN_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(command.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string quick_settings(const std::string& model) {
    return "--set model=" + model +
           " dim=6 hops=2 batch_size=32 learning_rate=0.01 weight_decay=0.001 max_epochs=3 pretrain=false";
}

}  // namespace

TEST(Config, DefaultsAndRoundTrip) {
    const cli::RunConfig defaults;
    EXPECT_EQ(defaults.train.model.dim, 50u);
    EXPECT_EQ(defaults.train.model.hops, 2u);
    EXPECT_EQ(defaults.train.neg_ratio, 4);
    EXPECT_EQ(defaults.train.batch_size, 128u);
    EXPECT_EQ(defaults.train.optimizer.learning_rate, 0.001);
    EXPECT_EQ(defaults.train.clip_norm, 5.0);
    EXPECT_EQ(defaults.train.weight_decay, 0.1);
    EXPECT_EQ(cli::parse_config(cli::to_config_text(defaults)), defaults);

    cli::RunConfig c = cli::parse_config(
        "# comment\n"
        "model = fism\n"
        "variant = linear_no_attention\n"
        "learning_rate = 0.0025\n"
        "rho = 0.75\n"
        "exclude_self = true\n"
        "\n");
    EXPECT_EQ(c.model, "fism");
    EXPECT_EQ(c.train.model.variant, Variant::linear_no_attention);
    EXPECT_EQ(c.train.optimizer.learning_rate, 0.0025);
    EXPECT_TRUE(c.train.model.exclude_self);
    EXPECT_EQ(cli::parse_config(cli::to_config_text(c)), c);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(cli::parse_config("embedding = 3\n"), ConfigError);
    EXPECT_THROW(cli::parse_config("dim = -3\n"), ConfigError);
    EXPECT_THROW(cli::parse_config("dim = 3x\n"), ConfigError);
    EXPECT_THROW(cli::parse_config("variant = fancy\n"), ConfigError);
    EXPECT_THROW(cli::parse_config("model = svd\n"), ConfigError);
    EXPECT_THROW(cli::parse_config("just words\n"), ConfigError);
    try {
        cli::parse_config("dim = 4\nhops = 0\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

TEST(Config, FingerprintIgnoresOutputDirectory) {
    cli::RunConfig a;
    cli::RunConfig b = a;
    b.out = "elsewhere";
    EXPECT_EQ(cli::fingerprint(a), cli::fingerprint(b));
    EXPECT_EQ(cli::fingerprint(a).size(), 16u);
    b.train.seed = 2;
    EXPECT_NE(cli::fingerprint(a), cli::fingerprint(b));
}

TEST(Prepare, IsIdempotentAndWritesStats) {
    const fs::path dir = scratch("prepare");
    cli::RunConfig config;
    config.dataset = toy_log_file(dir).string();
    config.eval_negatives = 0;
    const auto first = cli::run_prepare(config, dir / "a");
    const auto second = cli::run_prepare(config, dir / "b");
    EXPECT_EQ(first.stats, "users=20 items=20 ratings=160 sparsity=60.0000%");
    for (const char* name : {"manifest.txt", "negatives.txt", "stats.txt", "config.txt"})
        EXPECT_EQ(slurp(dir / "a" / name), slurp(dir / "b" / name)) << name;
    EXPECT_EQ(cli::load_config(dir / "a" / "config.txt"), config);
}

TEST(Prepare, MissingInputLeavesNoOutputs) {
    const fs::path dir = scratch("missing");
    cli::RunConfig config;
    config.dataset = (dir / "absent.txt").string();
    EXPECT_THROW(cli::run_prepare(config, dir / "out"), DataError);
    EXPECT_FALSE(fs::exists(dir / "out"));

    const Result r = run_cli("prepare --input \"" + (dir / "absent.txt").string() + "\" --out \"" +
                                 (dir / "out2").string() + "\"",
                             dir);
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(r.err.rfind("error\tdata\t", 0), 0u) << r.err;
    EXPECT_FALSE(fs::exists(dir / "out2"));
}

TEST(Binary, UsageErrorsExitNonzero) {
    const fs::path dir = scratch("usage");
    EXPECT_EQ(run_cli("", dir).code, 2);
    EXPECT_EQ(run_cli("frobnicate", dir).code, 2);
    const Result r = run_cli("train --set nonsense=1", dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("error\tconfig\t", 0), 0u) << r.err;
}

TEST(Binary, PrepareTrainEvaluateExport) {
    const fs::path dir = scratch("flow");
    const fs::path split = dir / "split";
    const Result prep = run_cli("prepare --input \"" + toy_log_file(dir).string() + "\" --out \"" + split.string() +
                                    "\" --negatives 0 --seed 7",
                                dir);
    ASSERT_EQ(prep.code, 0) << prep.err;
    EXPECT_NE(prep.out.find("users=20 items=20 ratings=160"), std::string::npos) << prep.out;

    const std::string train_args = "train --out \"" + (dir / "runs").string() + "\" --seed 3 --threads 1 " +
                                   quick_settings("cmn") + " split=" + split.string();
    const Result train = run_cli(train_args, dir);
    ASSERT_EQ(train.code, 0) << train.err;
    fs::path run_dir;
    for (const auto& entry : fs::directory_iterator(dir / "runs")) run_dir = entry.path();
    ASSERT_EQ(run_dir.filename().string().rfind("cmn-", 0), 0u);
    const std::string fp = run_dir.filename().string().substr(4);
    const fs::path ckpt = run_dir / ("cmn-" + fp + ".ckpt");
    ASSERT_TRUE(fs::exists(ckpt));
    EXPECT_TRUE(fs::exists(run_dir / "history.tsv"));
    EXPECT_TRUE(fs::exists(run_dir / "run.log"));
    EXPECT_EQ(cli::fingerprint(cli::load_config(run_dir / "config.txt")), fp);

    // Rerunning is byte-identical apart from the wall-clock column and the log.
    const std::string ckpt_bytes = slurp(ckpt);
    const auto strip_wall = [](const std::string& text) {
        std::istringstream in(text);
        std::string line;
        std::string out;
        while (std::getline(in, line)) out += line.substr(0, line.rfind('\t')) + '\n';
        return out;
    };
    const std::string history = strip_wall(slurp(run_dir / "history.tsv"));
    ASSERT_EQ(run_cli(train_args, dir).code, 0);
    EXPECT_EQ(slurp(ckpt), ckpt_bytes);
    EXPECT_EQ(strip_wall(slurp(run_dir / "history.tsv")), history);

    const fs::path report = dir / "report.txt";
    const Result eval = run_cli("evaluate --checkpoint \"" + ckpt.string() + "\" --split \"" + split.string() +
                                    "\" --out \"" + report.string() + "\"",
                                dir);
    ASSERT_EQ(eval.code, 0) << eval.err;
    EXPECT_NE(eval.out.find("HR@10"), std::string::npos) << eval.out;
    const std::string report_text = slurp(report);
    EXPECT_EQ(report_text.rfind("# cmn-report fingerprint=" + fp + " users=20", 0), 0u) << report_text;

    const fs::path trace = dir / "attention.csv";
    const Result exp = run_cli("export-attention --checkpoint \"" + ckpt.string() + "\" --split \"" + split.string() +
                                   "\" --user 0 --item 2 --top-n 3 --out \"" + trace.string() + "\"",
                               dir);
    ASSERT_EQ(exp.code, 0) << exp.err;
    std::istringstream rows(slurp(trace));
    std::string line;
    std::getline(rows, line);
    EXPECT_EQ(line, "hop,neighbor,weight,corated,neighbor_train_count");
    std::map<int, int> per_hop;
    while (std::getline(rows, line)) {
        const int hop = std::stoi(line.substr(0, line.find(',')));
        ++per_hop[hop];
    }
    EXPECT_EQ(per_hop.size(), 2u);
    EXPECT_EQ(per_hop[1], 3);
    EXPECT_EQ(per_hop[2], 3);

    const Result unknown = run_cli("export-attention --checkpoint \"" + ckpt.string() + "\" --split \"" +
                                       split.string() + "\" --user nobody --item 2 --out \"" + trace.string() + "\"",
                                   dir);
    EXPECT_EQ(unknown.code, 3);
}

TEST(Binary, BaselineDispatchAndShapeMismatch) {
    const fs::path dir = scratch("baselines");
    const fs::path split = dir / "split";
    ASSERT_EQ(run_cli("prepare --input \"" + toy_log_file(dir).string() + "\" --out \"" + split.string() +
                          "\" --negatives 0",
                      dir)
                  .code,
              0);
    for (const std::string model : {"bpr", "gmf", "fism", "knn"}) {
        const Result r = run_cli("train --out \"" + (dir / "runs").string() + "\" " + quick_settings(model) +
                                     " split=" + split.string(),
                                 dir);
        ASSERT_EQ(r.code, 0) << model << ": " << r.err;
    }
    std::size_t runs = 0;
    fs::path bpr_ckpt;
    for (const auto& entry : fs::directory_iterator(dir / "runs")) {
        ++runs;
        const std::string name = entry.path().filename().string();
        if (name.rfind("bpr-", 0) == 0) bpr_ckpt = entry.path() / (name + ".ckpt");
    }
    EXPECT_EQ(runs, 4u);
    ASSERT_TRUE(fs::exists(bpr_ckpt));
    EXPECT_EQ(read_checkpoint(bpr_ckpt).model, "bpr");

    // A split with a different user count is rejected with a shape error.
    std::ofstream(dir / "other.txt") << "a x\na y\nb x\nb z\nc y\nc z\n";
    const fs::path other = dir / "other_split";
    ASSERT_EQ(run_cli("prepare --input \"" + (dir / "other.txt").string() + "\" --out \"" + other.string() +
                          "\" --negatives 0",
                      dir)
                  .code,
              0);
    const Result mismatch = run_cli("evaluate --checkpoint \"" + bpr_ckpt.string() + "\" --split \"" +
                                        other.string() + "\" --out \"" + (dir / "r.txt").string() + "\"",
                                    dir);
    EXPECT_EQ(mismatch.code, 4);
    EXPECT_NE(mismatch.err.find("users"), std::string::npos) << mismatch.err;

    // A truncated checkpoint fails cleanly.
    const std::string bytes = slurp(bpr_ckpt);
    std::ofstream(dir / "broken.ckpt") << bytes.substr(0, bytes.size() / 3);
    const Result broken = run_cli("evaluate --checkpoint \"" + (dir / "broken.ckpt").string() + "\" --split \"" +
                                      split.string() + "\" --out \"" + (dir / "r.txt").string() + "\"",
                                  dir);
    EXPECT_EQ(broken.code, 3);
    EXPECT_EQ(broken.err.rfind("error\tdata\t", 0), 0u) << broken.err;
}

TEST(Export, TraceWeightsFormASimplexPerHop) {
    const fs::path dir = scratch("export");
    cli::RunConfig config;
    config.dataset = toy_log_file(dir).string();
    config.eval_negatives = 0;
    cli::run_prepare(config, dir / "split");
    config.split = (dir / "split").string();
    config.out = (dir / "runs").string();
    config.train.model.dim = 4;
    config.train.max_epochs = 1;
    config.train.pretrain = false;
    const auto outcome = cli::run_train(config);
    // top_n large enough to keep every neighbor, so each hop sums to one.
    cli::run_export_attention(outcome.checkpoint, dir / "split", "3", "4", 1000, dir / "trace.csv");
    std::istringstream rows(slurp(dir / "trace.csv"));
    std::string line;
    std::getline(rows, line);
    std::map<int, double> sums;
    while (std::getline(rows, line)) {
        std::vector<std::string> cols;
        std::istringstream fields(line);
        std::string field;
        while (std::getline(fields, field, ',')) cols.push_back(field);
        ASSERT_EQ(cols.size(), 5u);
        sums[std::stoi(cols[0])] += std::stod(cols[2]);
    }
    ASSERT_EQ(sums.size(), 2u);
    for (const auto& [hop, total] : sums) EXPECT_NEAR(total, 1.0, 1e-6) << "hop " << hop;
}
