#include "cmn/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "cmn/baselines.hpp"
#include "cmn/errors.hpp"
#include "cmn/model_io.hpp"

namespace cmn::cli {
namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "1" || value == "true" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "no") return false;
    throw ConfigError("invalid boolean '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

std::string hex64(std::uint64_t value) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << value;
    return out.str();
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string local_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    localtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S");
    return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

}  // namespace

void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
    TrainConfig& t = c.train;
    if (key == "dataset") c.dataset = value;
    else if (key == "split") c.split = value;
    else if (key == "out") c.out = value;
    else if (key == "model") {
        static constexpr std::string_view kinds[] = {"cmn", "bpr", "gmf", "fism", "knn"};
        if (std::find(std::begin(kinds), std::end(kinds), value) == std::end(kinds))
            throw ConfigError("unknown model '" + std::string(value) + "' (expected cmn, bpr, gmf, fism or knn)");
        c.model = value;
    }
    else if (key == "variant") t.model.variant = parse_variant(value);
    else if (key == "hops") t.model.hops = parse_number<std::size_t>(key, value);
    else if (key == "dim") t.model.dim = parse_number<std::size_t>(key, value);
    else if (key == "exclude_self") t.model.exclude_self = parse_bool(key, value);
    else if (key == "neg_ratio") t.neg_ratio = parse_number<int>(key, value);
    else if (key == "batch_size") t.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "learning_rate") t.optimizer.learning_rate = parse_number<double>(key, value);
    else if (key == "decay") t.optimizer.decay = parse_number<double>(key, value);
    else if (key == "momentum") t.optimizer.momentum = parse_number<double>(key, value);
    else if (key == "epsilon") t.optimizer.epsilon = parse_number<double>(key, value);
    else if (key == "clip_norm") t.clip_norm = parse_number<double>(key, value);
    else if (key == "weight_decay") t.weight_decay = parse_number<double>(key, value);
    else if (key == "max_epochs") t.max_epochs = parse_number<int>(key, value);
    else if (key == "patience") t.patience = parse_number<int>(key, value);
    else if (key == "seed") t.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "pretrain") t.pretrain = parse_bool(key, value);
    else if (key == "pretrain_epochs") t.pretrain_epochs = parse_number<int>(key, value);
    else if (key == "threads") t.threads = parse_number<int>(key, value);
    else if (key == "rho") c.rho = parse_number<double>(key, value);
    else if (key == "knn_k") c.knn_k = parse_number<std::size_t>(key, value);
    else if (key == "eval_negatives") c.eval_negatives = parse_number<std::size_t>(key, value);
    else if (key == "user_fraction") c.user_fraction = parse_number<double>(key, value);
    else throw ConfigError("unknown config key '" + std::string(key) + "'");

    if (key == "hops" && t.model.hops < 1) throw ConfigError("hops must be >= 1");
    if (key == "dim" && t.model.dim < 1) throw ConfigError("dim must be >= 1");
    if (key == "neg_ratio" && t.neg_ratio < 1) throw ConfigError("neg_ratio must be >= 1");
    if (key == "batch_size" && t.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (key == "threads" && t.threads < 1) throw ConfigError("threads must be >= 1");
    if (key == "rho" && !(c.rho >= 0.0 && c.rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
}

RunConfig parse_config(std::string_view text) {
    RunConfig config;
    std::size_t line_number = 0;
    while (!text.empty()) {
        const auto newline = text.find('\n');
        std::string_view line = text.substr(0, newline);
        text = newline == std::string_view::npos ? std::string_view{} : text.substr(newline + 1);
        ++line_number;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_number) + ": expected 'key = value'");
        try {
            apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_number) + ": " + e.what());
        }
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

namespace {

std::string canonical_text(const RunConfig& c, bool include_out) {
    const TrainConfig& t = c.train;
    std::ostringstream out;
    out << "dataset = " << c.dataset << '\n';
    out << "split = " << c.split << '\n';
    if (include_out) out << "out = " << c.out << '\n';
    out << "model = " << c.model << '\n';
    out << "variant = " << to_string(t.model.variant) << '\n';
    out << "hops = " << t.model.hops << '\n';
    out << "dim = " << t.model.dim << '\n';
    out << "exclude_self = " << (t.model.exclude_self ? 1 : 0) << '\n';
    out << "neg_ratio = " << t.neg_ratio << '\n';
    out << "batch_size = " << t.batch_size << '\n';
    out << "learning_rate = " << format_double(t.optimizer.learning_rate) << '\n';
    out << "decay = " << format_double(t.optimizer.decay) << '\n';
    out << "momentum = " << format_double(t.optimizer.momentum) << '\n';
    out << "epsilon = " << format_double(t.optimizer.epsilon) << '\n';
    out << "clip_norm = " << format_double(t.clip_norm) << '\n';
    out << "weight_decay = " << format_double(t.weight_decay) << '\n';
    out << "max_epochs = " << t.max_epochs << '\n';
    out << "patience = " << t.patience << '\n';
    out << "seed = " << t.seed << '\n';
    out << "pretrain = " << (t.pretrain ? 1 : 0) << '\n';
    out << "pretrain_epochs = " << t.pretrain_epochs << '\n';
    out << "threads = " << t.threads << '\n';
    out << "rho = " << format_double(c.rho) << '\n';
    out << "knn_k = " << c.knn_k << '\n';
    out << "eval_negatives = " << c.eval_negatives << '\n';
    out << "user_fraction = " << format_double(c.user_fraction) << '\n';
    return out.str();
}

}  // namespace

std::string to_config_text(const RunConfig& config) { return canonical_text(config, true); }

std::string fingerprint(const RunConfig& config) { return hex64(fnv1a(canonical_text(config, false))); }

PrepareResult run_prepare(const RunConfig& config, const std::filesystem::path& out_dir) {
    if (config.dataset.empty()) throw ConfigError("prepare needs an input dataset");
    InteractionLog log = ingest(config.dataset);
    if (config.user_fraction < 1.0) log = subsample_users(log, config.user_fraction, config.train.seed);
    SplitOptions options;
    options.seed = config.train.seed;
    options.eval_negatives = config.eval_negatives;
    const SplitDataset split = leave_one_out_split(log, options);

    std::filesystem::create_directories(out_dir);
    write_split(split, out_dir);
    const std::string stats = log.stats_line();
    write_text(out_dir / "stats.txt", stats + '\n');
    write_text(out_dir / "config.txt", to_config_text(config));
    return {stats, out_dir};
}

TrainOutcome run_train(const RunConfig& config, std::ostream* progress) {
    if (config.split.empty()) throw ConfigError("train needs 'split' (a prepared split directory)");
    const SplitDataset split = read_split(config.split);
    const std::string fp = fingerprint(config);
    TrainOutcome outcome;
    outcome.directory = std::filesystem::path(config.out) / (config.model + "-" + fp);
    outcome.checkpoint = outcome.directory / (config.model + "-" + fp + ".ckpt");
    std::filesystem::create_directories(outcome.directory);
    write_text(outcome.directory / "config.txt", to_config_text(config));

    std::ofstream history(outcome.directory / "history.tsv");
    history << "epoch\ttrain_loss\tval_hr10\tval_ndcg10\twall_seconds\n";
    std::ofstream log(outcome.directory / "run.log");
    log << local_timestamp() << " start model=" << config.model << " fingerprint=" << fp << '\n';
    const auto on_epoch = [&](const EpochRecord& r) {
        history << r.epoch << '\t' << format_double(r.train_loss) << '\t' << format_double(r.val_hr10) << '\t'
                << format_double(r.val_ndcg10) << '\t' << std::fixed << std::setprecision(3) << r.seconds
                << std::defaultfloat << '\n';
        history.flush();
        log << local_timestamp() << " epoch " << r.epoch << " done\n";
        if (progress) {
            *progress << "epoch " << r.epoch << " loss " << r.train_loss << " val HR@10 " << r.val_hr10
                      << " NDCG@10 " << r.val_ndcg10 << " (" << r.seconds << " s)\n";
        }
    };

    const TrainConfig& t = config.train;
    auto index = std::make_shared<const NeighborIndex>(build_neighborhoods(split));
    Checkpoint checkpoint;
    if (config.model == "cmn") {
        CmnModel model = make_cmn_model(split, index, t);
        outcome.result = train(model, split, t, on_epoch);
        checkpoint = model.to_checkpoint();
    } else if (config.model == "bpr" || config.model == "gmf") {
        GmfModel model = GmfModel::initialized(split.user_count(), split.item_count(), t.model.dim, t.seed,
                                               config.model == "gmf", config.model == "gmf");
        outcome.result = train(model, split, t, on_epoch);
        checkpoint = model.to_checkpoint();
    } else if (config.model == "fism") {
        FismUserModel model = FismUserModel::initialized(split.user_count(), t.model.dim, config.rho, t.seed, index);
        outcome.result = train(model, split, t, on_epoch);
        checkpoint = model.to_checkpoint();
    } else if (config.model == "knn") {
        checkpoint = knn_checkpoint(split.user_count(), split.item_count(), config.knn_k);
    } else {
        throw ConfigError("unknown model '" + config.model + "'");
    }
    checkpoint.set("fingerprint", fp);
    write_checkpoint(checkpoint, outcome.checkpoint);
    log << local_timestamp() << " wrote " << outcome.checkpoint.filename().string() << '\n';
    return outcome;
}

EvalReport run_evaluate(const std::filesystem::path& checkpoint_path, const std::filesystem::path& split_dir,
                        const std::filesystem::path& report_path, int threads) {
    const Checkpoint ckpt = read_checkpoint(checkpoint_path);
    const SplitDataset split = read_split(split_dir);
    const LoadedModel loaded = load_model(ckpt, split);
    EvalReport report = evaluate(loaded.scorer(), split, HoldOut::test, threads);
    const std::string fp = ckpt.has("fingerprint") ? ckpt.get("fingerprint") : std::string("none");
    write_report(report, split, fp, report_path);
    return report;
}

void run_export_attention(const std::filesystem::path& checkpoint_path, const std::filesystem::path& split_dir,
                          const std::string& user, const std::string& item, std::size_t top_n,
                          const std::filesystem::path& out_path) {
    const Checkpoint ckpt = read_checkpoint(checkpoint_path);
    if (ckpt.model != "cmn") throw ConfigError("export-attention needs a cmn checkpoint, got '" + ckpt.model + "'");
    const SplitDataset split = read_split(split_dir);
    const auto u = split.log().find_user(user);
    if (!u) throw DataError("unknown user id '" + user + "'");
    const auto i = split.log().find_item(item);
    if (!i) throw DataError("unknown item id '" + item + "'");

    const LoadedModel loaded = load_model(ckpt, split);
    const ForwardResult result = loaded.cmn()->forward(*u, *i);

    const auto& hops = result.trace.hops;
    for (std::size_t h = 0; h < hops.size(); ++h) {
        if (hops[h].weights.empty()) continue;
        double total = 0.0;
        for (double w : hops[h].weights) total += w;
        if (std::abs(total - 1.0) > 1e-6) {
            throw DataError("hop " + std::to_string(h + 1) + " attention sums to " + format_double(total));
        }
    }

    // Rank neighbours by attention aggregated over hops.
    const auto& neighbors = hops.empty() ? std::vector<UserIndex>{} : hops.front().neighbors;
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t k = 0; k < neighbors.size(); ++k) {
        double total = 0.0;
        for (const auto& hop : hops) total += hop.weights[k];
        order.emplace_back(total, k);
    }
    std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return neighbors[a.second] < neighbors[b.second];
    });
    if (order.size() > top_n) order.resize(top_n);

    const auto own = split.train_items(*u);
    if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write " + out_path.string());
    out << "hop,neighbor,weight,corated,neighbor_train_count\n";
    for (std::size_t h = 0; h < hops.size(); ++h) {
        for (const auto& [aggregate, k] : order) {
            const UserIndex v = neighbors[k];
            const auto theirs = split.train_items(v);
            std::size_t corated = 0;
            for (ItemIndex x : theirs)
                if (std::binary_search(own.begin(), own.end(), x)) ++corated;
            out << (h + 1) << ',' << split.log().user_id(v) << ',' << format_double(hops[h].weights[k]) << ','
                << corated << ',' << theirs.size() << '\n';
        }
    }
}

std::string describe_error(const std::exception& e, int& exit_code) {
    std::string kind = "error";
    exit_code = 1;
    if (dynamic_cast<const ConfigError*>(&e)) {
        kind = "config";
        exit_code = 2;
    } else if (dynamic_cast<const DataError*>(&e)) {
        kind = "data";
        exit_code = 3;
    } else if (dynamic_cast<const ShapeError*>(&e)) {
        kind = "shape";
        exit_code = 4;
    } else if (dynamic_cast<const DivergenceError*>(&e)) {
        kind = "divergence";
        exit_code = 5;
    }
    std::string message = e.what();
    std::replace(message.begin(), message.end(), '\n', ' ');
    std::replace(message.begin(), message.end(), '\t', ' ');
    return "error\t" + kind + "\t" + message;
}

}  // namespace cmn::cli
