#include "metaood_cli/commands.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>

#include "metaood/checkpoint.hpp"
#include "metaood/synth.hpp"
#include "metaood/trainer.hpp"
#include "metaood_cli/config.hpp"
#include "metaood_cli/io.hpp"

#ifndef METAOOD_GIT_REVISION
#define METAOOD_GIT_REVISION "unknown"
#endif
#ifndef METAOOD_VERSION
#define METAOOD_VERSION "0.0.0"
#endif

namespace metaood::cli {

const char* git_revision() { return METAOOD_GIT_REVISION; }

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::shared_ptr<spdlog::logger> make_logger() {
    auto logger = spdlog::stderr_color_mt("metaood");
    logger->set_pattern("[%l] %v");
    logger->set_level(spdlog::level::info);
    if (const char* env = std::getenv("METAOOD_LOG_LEVEL")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to off; only accept the literal "off"
        if (level != spdlog::level::off || std::string_view(env) == "off") logger->set_level(level);
    }
    return logger;
}

spdlog::logger& log() {
    static const auto logger = make_logger();
    return *logger;
}

// ---------------------------------------------------------------------------
// settings

const std::set<std::string> kEpisodeKeys{"way", "shot", "id_queries", "ood_queries", "ood_mode"};
const std::set<std::string> kVariantKeys{"variant", "tau", "bandwidth", "beta_inside"};

std::set<std::string> with(std::set<std::string> base, std::initializer_list<const char*> more) {
    for (const char* k : more) base.insert(k);
    return base;
}

Schema train_schema() {
    return {{"data", {"path"}},
            {"encoder", {"hidden", "latent", "dropout"}},
            {"episodes", kEpisodeKeys},
            {"validation", with(kEpisodeKeys, {"episodes"})},
            {"train",
             with(kVariantKeys, {"objective", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "clip_norm",
                                 "max_epochs", "episodes_per_epoch", "patience", "seed"})},
            {"output", {"dir"}}};
}

Schema eval_schema() {
    return {{"eval", with(with(kEpisodeKeys, {"checkpoint", "data", "episodes", "seed", "split", "out", "svg"}),
                         {"variant", "tau", "bandwidth", "beta_inside"})}};
}

Schema score_schema() {
    return {{"score", with(kVariantKeys, {"checkpoint", "support", "query", "out", "label_column", "gmm_json"})}};
}

Schema synth_schema() {
    return {{"synth",
             {"tasks", "classes_per_task", "instances_per_class", "latent_dim", "noise_dims", "noise_half_width",
              "mean_scale", "cov_min", "cov_max", "warp", "warp_strength", "train_fraction", "val_fraction", "seed",
              "out"}}};
}

OodMode parse_ood_mode(const std::string& s) {
    if (s == "pooled") return OodMode::pooled;
    if (s == "single_category") return OodMode::single_category;
    throw ConfigError("ood_mode must be pooled or single_category, got '" + s + "'");
}

EpisodeSpec read_episode_spec(Config& cfg, const std::string& section, const EpisodeSpec& d) {
    EpisodeSpec s;
    s.n_way = cfg.get_count(section, "way", d.n_way);
    s.support_per_class = cfg.get_count(section, "shot", d.support_per_class);
    s.id_query_per_class = cfg.get_count(section, "id_queries", d.id_query_per_class);
    s.ood_query_total = cfg.get_count(section, "ood_queries", d.ood_query_total);
    s.ood_mode = parse_ood_mode(
        cfg.get_string(section, "ood_mode", d.ood_mode == OodMode::pooled ? "pooled" : "single_category"));
    if (s.n_way < 1 || s.support_per_class < 1 || s.id_query_per_class < 1 || s.ood_query_total < 1) {
        throw ConfigError("[" + section + "] way, shot, id_queries and ood_queries must be at least 1");
    }
    return s;
}

VariantSpec read_variant(Config& cfg, const std::string& section) {
    VariantSpec v;
    try {
        v.kind = parse_variant(cfg.get_string(section, "variant", "full_gmm"));
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    v.tau = cfg.get_double(section, "tau", 1.0);
    v.bandwidth = cfg.get_double(section, "bandwidth", 0.0);
    try {
        v.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return v;
}

std::uint64_t read_seed(Config& cfg, const std::string& section) {
    const std::int64_t seed = cfg.get_int(section, "seed", 0);
    if (seed < 0) throw ConfigError("[" + section + "] seed must be non-negative");
    return static_cast<std::uint64_t>(seed);
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::is_regular_file(path)) throw DataError(what + " not found: " + path.string());
}

void prepare_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

void prepare_parent(const fs::path& file) {
    if (file.has_parent_path()) prepare_dir(file.parent_path());
}

json manifest_base(const std::string& command, const Config& cfg, std::uint64_t seed) {
    const std::string text = cfg.resolved_text();
    return json{{"tool", "metaood"},
                {"version", METAOOD_VERSION},
                {"git_revision", git_revision()},
                {"command", command},
                {"seed", seed},
                {"config_sha256", sha256_hex(text)},
                {"config", text}};
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

Config make_config(const std::string& config_path, Schema schema, const std::vector<std::string>& overrides) {
    Config cfg = config_path.empty() ? Config(std::move(schema)) : Config::load(config_path, std::move(schema));
    for (const std::string& o : overrides) cfg.apply_override(o);
    return cfg;
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(Config& cfg) {
    const fs::path data_path = cfg.require_string("data", "path");
    EncoderConfig enc;
    enc.hidden_dims = cfg.get_count_list("encoder", "hidden", {64});
    enc.latent_dim = cfg.get_count("encoder", "latent", 8);
    enc.dropout_rate = cfg.get_double("encoder", "dropout", 0.1);

    TrainConfig tc;
    tc.episode_spec = read_episode_spec(cfg, "episodes", EpisodeSpec{});
    tc.val_episode_spec = read_episode_spec(cfg, "validation", tc.val_episode_spec);
    tc.val_episodes = cfg.get_count("validation", "episodes", tc.val_episodes);
    try {
        tc.objective = parse_objective(cfg.get_string("train", "objective", "auc"));
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    tc.variant = read_variant(cfg, "train");
    tc.adapt.beta_inside = cfg.get_bool("train", "beta_inside", false);
    tc.learning_rate = cfg.get_double("train", "learning_rate", tc.learning_rate);
    tc.adam_beta1 = cfg.get_double("train", "adam_beta1", tc.adam_beta1);
    tc.adam_beta2 = cfg.get_double("train", "adam_beta2", tc.adam_beta2);
    tc.adam_eps = cfg.get_double("train", "adam_eps", tc.adam_eps);
    tc.clip_norm = cfg.get_double("train", "clip_norm", tc.clip_norm);
    tc.max_epochs = cfg.get_count("train", "max_epochs", tc.max_epochs);
    tc.episodes_per_epoch = cfg.get_count("train", "episodes_per_epoch", tc.episodes_per_epoch);
    tc.patience = cfg.get_count("train", "patience", tc.patience);
    tc.seed = read_seed(cfg, "train");
    const fs::path out = cfg.require_string("output", "dir");
    try {
        tc.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }

    require_file(data_path, "dataset");
    prepare_dir(out);
    const TaskDataset data = read_epds(data_path);
    enc.input_dim = data.input_dim();
    try {
        enc.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    log().info("train: {} rows, {} features, {} train / {} val tasks", data.size(), data.input_dim(),
               data.tasks_in(Split::train).size(), data.tasks_in(Split::val).size());

    json manifest = manifest_base("train", cfg, tc.seed);
    manifest["inputs"] = {{"data", {{"path", data_path.string()}, {"sha256", sha256_file(data_path)}}}};
    write_text(out / "config.ini", cfg.resolved_text());

    std::string timing = "epoch,wall_seconds\n";
    const auto on_epoch = [&](const EpochRecord& r) {
        timing += std::to_string(r.epoch) + "," + fixed(r.wall_seconds, 3) + "\n";
        log().debug("epoch {}: loss {:.5f} val_auc {:.4f} beta {:.4g}", r.epoch, r.train_loss, r.val_auc, r.beta);
        if (r.epoch % 50 == 0) log().info("epoch {}: val_auc {:.4f}", r.epoch, r.val_auc);
    };
    TrainResult result;
    try {
        result = train(data, enc, tc, on_epoch);
    } catch (const TrainingAborted& e) {
        save_checkpoint(out / "last_good.ckpt", e.last_good());
        manifest["aborted"] = e.what();
        write_json(out / "manifest.json", manifest);
        throw;
    }
    save_checkpoint(out / "best.ckpt", result.best);
    save_checkpoint(out / "final.ckpt", result.last);
    write_text(out / "train_log.csv", result.log.to_csv(false));
    write_text(out / "timing.csv", timing);

    manifest["outputs"] = {{"best.ckpt", sha256_file(out / "best.ckpt")},
                           {"final.ckpt", sha256_file(out / "final.ckpt")},
                           {"train_log.csv", sha256_file(out / "train_log.csv")}};
    manifest["result"] = {{"epochs", result.log.epochs.size()},
                          {"best_epoch", result.best_epoch},
                          {"best_val_auc", result.best_val_auc},
                          {"initial_val_auc", result.initial_val_auc},
                          {"stop_reason", result.stop_reason},
                          {"beta", result.best.beta()}};
    write_json(out / "manifest.json", manifest);
    std::printf("best val AUC %s at epoch %zu (initial %s, %zu epochs, stop: %s)\n",
                fixed(result.best_val_auc).c_str(), result.best_epoch, fixed(result.initial_val_auc).c_str(),
                result.log.epochs.size(), result.stop_reason.c_str());
    log().info("wrote {}", (out / "best.ckpt").string());
    return kOk;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(Config& cfg) {
    const fs::path ckpt_path = cfg.require_string("eval", "checkpoint");
    const fs::path data_path = cfg.require_string("eval", "data");
    const VariantSpec variant = read_variant(cfg, "eval");
    AdaptOptions adapt_opts;
    adapt_opts.beta_inside = cfg.get_bool("eval", "beta_inside", false);
    const EpisodeSpec spec = read_episode_spec(cfg, "eval", EpisodeSpec{5, 5, 5, 5, OodMode::single_category});
    const std::size_t n = cfg.get_count("eval", "episodes", 64);
    if (n < 1) throw ConfigError("[eval] episodes must be at least 1");
    const std::uint64_t seed = read_seed(cfg, "eval");
    Split split;
    try {
        split = parse_split(cfg.get_string("eval", "split", "test"));
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    const std::string out_text = cfg.get_string("eval", "out", "");
    const bool svg = cfg.get_bool("eval", "svg", false);
    if (svg && out_text.empty()) throw ConfigError("--svg needs an output directory (--out)");

    require_file(ckpt_path, "checkpoint");
    require_file(data_path, "dataset");
    const fs::path out = out_text;
    if (!out.empty()) prepare_dir(out);

    const CommonParams params = load_checkpoint(ckpt_path);
    const TaskDataset data = read_epds(data_path);
    if (params.config.input_dim != data.input_dim()) {
        throw DimensionError("checkpoint expects " + std::to_string(params.config.input_dim) +
                             " features but dataset " + data_path.string() + " has " +
                             std::to_string(data.input_dim()));
    }
    const auto episodes = fixed_eval_episodes(data, split, spec, n, seed);
    log().info("eval: {} {} episodes, variant {}", n, to_string(split), to_string(variant.kind));
    const EvalReport report = evaluate(params, episodes, variant, adapt_opts);
    std::printf("AUC %s +- %s, accuracy %s +- %s (%zu episodes, variant %s)\n", fixed(report.mean_auc).c_str(),
                fixed(report.stderr_auc).c_str(), fixed(report.mean_accuracy).c_str(),
                fixed(report.stderr_accuracy).c_str(), n, std::string(to_string(variant.kind)).c_str());

    if (!out.empty()) {
        write_text(out / "eval.csv", report.to_csv());
        json manifest = manifest_base("eval", cfg, seed);
        manifest["inputs"] = {{"checkpoint", {{"path", ckpt_path.string()}, {"sha256", sha256_file(ckpt_path)}}},
                              {"data", {{"path", data_path.string()}, {"sha256", sha256_file(data_path)}}}};
        manifest["outputs"] = {{"eval.csv", sha256_file(out / "eval.csv")}};
        manifest["result"] = {{"mean_auc", report.mean_auc},
                              {"stderr_auc", report.stderr_auc},
                              {"mean_accuracy", report.mean_accuracy},
                              {"stderr_accuracy", report.stderr_accuracy}};
        if (svg) {
            std::vector<double> id, ood;
            for (const auto& e : report.episodes) {
                id.insert(id.end(), e.id_scores.begin(), e.id_scores.end());
                ood.insert(ood.end(), e.ood_scores.begin(), e.ood_scores.end());
            }
            write_text(out / "scores.svg", histogram_svg(id, ood, "ID queries", "OoD queries",
                                                         "OoD score distribution over all episodes"));
        }
        write_json(out / "eval_manifest.json", manifest);
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// score

int cmd_score(Config& cfg) {
    const fs::path ckpt_path = cfg.require_string("score", "checkpoint");
    const fs::path support_path = cfg.require_string("score", "support");
    const fs::path query_path = cfg.require_string("score", "query");
    const fs::path out = cfg.require_string("score", "out");
    const std::string label_column = cfg.get_string("score", "label_column", "label");
    const std::string gmm_json = cfg.get_string("score", "gmm_json", "");
    const VariantSpec variant = read_variant(cfg, "score");
    AdaptOptions adapt_opts;
    adapt_opts.beta_inside = cfg.get_bool("score", "beta_inside", false);

    require_file(ckpt_path, "checkpoint");
    require_file(support_path, "support file");
    require_file(query_path, "query file");
    prepare_parent(out);
    if (!gmm_json.empty()) prepare_parent(gmm_json);

    const CommonParams params = load_checkpoint(ckpt_path);
    const LabeledRows support = read_feature_csv(support_path, label_column);
    const LabeledRows query = read_feature_csv(query_path);
    const std::size_t dim = params.config.input_dim;
    if (support.features.cols() != dim) {
        throw DimensionError("support file has " + std::to_string(support.features.cols()) +
                             " feature columns, checkpoint expects " + std::to_string(dim));
    }
    if (support.features.rows() < 2) throw DataError("support file needs at least two rows");

    // labels are mapped to 0..K-1 in sorted order
    std::vector<std::string> names(support.labels);
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    std::vector<std::size_t> labels;
    for (const std::string& l : support.labels) {
        labels.push_back(static_cast<std::size_t>(std::lower_bound(names.begin(), names.end(), l) - names.begin()));
    }
    const std::size_t k = names.size();

    std::string csv = "index,score,predicted_class\n";
    json manifest = manifest_base("score", cfg, 0);
    manifest["inputs"] = {{"checkpoint", {{"path", ckpt_path.string()}, {"sha256", sha256_file(ckpt_path)}}},
                          {"support", {{"path", support_path.string()}, {"sha256", sha256_file(support_path)}}},
                          {"query", {{"path", query_path.string()}, {"sha256", sha256_file(query_path)}}}};

    const std::size_t m = query.features.rows();
    if (m > 0 && query.features.cols() != dim) {
        throw DimensionError("query file has " + std::to_string(query.features.cols()) +
                             " feature columns, checkpoint expects " + std::to_string(dim));
    }
    Episode ep;
    ep.n_way = k;
    ep.support = support.features;
    ep.support_labels = labels;
    ep.query_id = m > 0 ? query.features : Matrix(0, dim);
    ep.query_ood = Matrix(0, dim);

    Tape tape;
    const BoundParams bound = bind(tape, params, false);
    const EpisodeEmbedding emb = embed_episode(bound, ep, nullptr, false);
    const std::size_t latent = params.config.latent_dim;
    const Var beta = tape.scalar(params.beta());
    std::string path_name;
    if (m > 0) {
        std::vector<double> scores;
        std::vector<std::size_t> predicted;
        if (variant.kind == VariantKind::full_gmm) {
            const bool low_rank = prefer_woodbury(latent, labels, k);
            path_name = low_rank ? "woodbury" : "direct";
            log().info("score: D={} latent dims, smallest class {} rows, using the {} path", latent,
                       [&] {
                           std::vector<std::size_t> counts(k, 0);
                           for (std::size_t l : labels) ++counts[l];
                           return *std::min_element(counts.begin(), counts.end());
                       }(),
                       path_name);
            const Var terms = low_rank ? class_log_terms_woodbury(emb.support, labels, k, beta, emb.id, adapt_opts)
                                       : class_log_terms(adapt(emb.support, labels, k, beta, adapt_opts), emb.id);
            const Var lse = diff::logsumexp(terms, diff::Axis::over_rows);
            scores.assign(lse.value().data().begin(), lse.value().data().end());
            for (double& s : scores) s = -s;
            predicted = classify_terms(terms).labels;
        } else {
            path_name = std::string(to_string(variant.kind));
            const Var s = variant_score(variant, emb.support, labels, k, beta, emb.id, adapt_opts);
            scores.assign(s.value().data().begin(), s.value().data().end());
            predicted = variant_classify(variant, emb.support, labels, k, beta, emb.id, adapt_opts);
        }
        char buf[64];
        for (std::size_t i = 0; i < m; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", scores[i]);
            csv += std::to_string(i) + "," + buf + "," + names[predicted[i]] + "\n";
        }
    } else {
        log().info("score: query file is empty");
    }
    write_text(out, csv);
    if (!gmm_json.empty()) {
        write_text(gmm_json, snapshot(adapt(emb.support, labels, k, beta, adapt_opts)).to_json() + "\n");
    }
    manifest["path"] = path_name;
    manifest["outputs"] = {{out.filename().string(), sha256_file(out)}};
    write_json(fs::path(out.string() + ".manifest.json"), manifest);
    std::printf("scored %zu queries against %zu classes\n", m, k);
    return kOk;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(Config& cfg) {
    SynthSpec s;
    s.n_tasks = cfg.get_count("synth", "tasks", s.n_tasks);
    s.classes_per_task = cfg.get_count("synth", "classes_per_task", s.classes_per_task);
    s.instances_per_class = cfg.get_count("synth", "instances_per_class", s.instances_per_class);
    s.latent_dim = cfg.get_count("synth", "latent_dim", s.latent_dim);
    s.noise_dims = cfg.get_count("synth", "noise_dims", s.noise_dims);
    s.noise_half_width = cfg.get_double("synth", "noise_half_width", s.noise_half_width);
    s.mean_scale = cfg.get_double("synth", "mean_scale", s.mean_scale);
    s.cov_min = cfg.get_double("synth", "cov_min", s.cov_min);
    s.cov_max = cfg.get_double("synth", "cov_max", s.cov_max);
    const std::string warp = cfg.get_string("synth", "warp", "none");
    if (warp == "none") s.warp = Warp::none;
    else if (warp == "sine") s.warp = Warp::sine;
    else throw ConfigError("[synth] warp must be none or sine, got '" + warp + "'");
    s.warp_strength = cfg.get_double("synth", "warp_strength", s.warp_strength);
    s.train_fraction = cfg.get_double("synth", "train_fraction", s.train_fraction);
    s.val_fraction = cfg.get_double("synth", "val_fraction", s.val_fraction);
    const std::uint64_t seed = read_seed(cfg, "synth");
    const fs::path out = cfg.require_string("synth", "out");
    try {
        s.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    prepare_parent(out);

    const SynthResult r = synth_tasks(s, seed);
    json run = manifest_base("synth", cfg, seed);
    write_epds(out, r.data, json{{"generator", run}}.dump());
    const fs::path truth = out.string() + ".truth.json";
    write_text(truth, r.truth.to_json() + "\n");
    std::printf("wrote %zu rows x %zu features, %zu tasks (%zu/%zu/%zu train/val/test) to %s\n", r.data.size(),
                r.data.input_dim(), s.n_tasks, r.data.tasks_in(Split::train).size(),
                r.data.tasks_in(Split::val).size(), r.data.tasks_in(Split::test).size(), out.string().c_str());
    return kOk;
}

// ---------------------------------------------------------------------------
// report

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::vector<double> column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("CSV has no column '" + name + "'");
        const auto c = static_cast<std::size_t>(it - header.begin());
        std::vector<double> out;
        for (const auto& r : rows) out.push_back(r.at(c));
        return out;
    }
};

CsvTable read_table(const fs::path& path) {
    const LabeledRows rows = read_feature_csv(path);
    CsvTable t;
    std::istringstream first(read_text(path));
    std::string line;
    std::getline(first, line);
    std::stringstream hs(line);
    for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
    for (std::size_t r = 0; r < rows.features.rows(); ++r) {
        const auto span = rows.features.row_span(r);
        t.rows.emplace_back(span.begin(), span.end());
    }
    return t;
}

int cmd_report(const fs::path& run_dir) {
    if (!fs::is_directory(run_dir)) throw DataError("run directory not found: " + run_dir.string());
    std::string md = "# Run report: " + run_dir.filename().string() + "\n\n";
    bool any = false;
    for (const char* name : {"manifest.json", "eval_manifest.json"}) {
        if (!fs::exists(run_dir / name)) continue;
        const json m = json::parse(read_text(run_dir / name));
        md += "## " + m.value("command", std::string("?")) + "\n\n";
        md += "- seed: " + std::to_string(m.value("seed", 0ULL)) + "\n";
        md += "- config sha256: `" + m.value("config_sha256", "") + "`\n";
        md += "- git revision: `" + m.value("git_revision", "unknown") + "`\n";
        if (m.contains("result")) {
            for (const auto& [k, v] : m["result"].items()) md += "- " + k + ": " + v.dump() + "\n";
        }
        md += "\n";
        any = true;
    }
    if (fs::exists(run_dir / "train_log.csv")) {
        const CsvTable log_table = read_table(run_dir / "train_log.csv");
        const auto val = log_table.column("val_auc");
        const auto train_auc = log_table.column("train_smooth_auc");
        const std::vector<Series> series{{"validation exact AUC", val}, {"train smooth AUC", train_auc}};
        write_text(run_dir / "learning_curve.svg", line_chart_svg(series, "Meta-training progress", "epoch"));
        if (!val.empty()) {
            const auto best = std::max_element(val.begin(), val.end());
            // epoch 0 (the untrained model) is not in the log; best_epoch in the manifest covers it
            md += "Training: " + std::to_string(val.size()) + " logged epochs, highest logged validation AUC " +
                  fixed(*best) + " at epoch " + std::to_string(best - val.begin() + 1) + ", final " +
                  fixed(val.back()) + ".\n\n";
        }
        md += "![learning curve](learning_curve.svg)\n\n";
        any = true;
    }
    if (fs::exists(run_dir / "eval.csv")) {
        const CsvTable eval_table = read_table(run_dir / "eval.csv");
        const auto auc = eval_table.column("auc");
        const auto acc = eval_table.column("accuracy");
        if (!auc.empty()) {
            const auto [ma, sa] = mean_and_stderr(auc);
            const auto [mc, sc] = mean_and_stderr(acc);
            md += "Evaluation: " + std::to_string(auc.size()) + " episodes, AUC " + fixed(ma) + " ± " + fixed(sa) +
                  ", accuracy " + fixed(mc) + " ± " + fixed(sc) + ".\n\n";
        }
        if (fs::exists(run_dir / "scores.svg")) md += "![score histogram](scores.svg)\n\n";
        any = true;
    }
    if (!any) throw DataError("no manifest, train_log.csv or eval.csv in " + run_dir.string());
    write_text(run_dir / "report.md", md);
    std::fputs(md.c_str(), stdout);
    return kOk;
}

// ---------------------------------------------------------------------------

int classify_failure(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
    if (dynamic_cast<const TrainingAborted*>(&e) || dynamic_cast<const NonFiniteError*>(&e) ||
        dynamic_cast<const NotPositiveDefiniteError*>(&e)) {
        return kNumericError;
    }
    if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
        dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const SamplingError*>(&e) ||
        dynamic_cast<const DomainError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e) ||
        dynamic_cast<const json::exception*>(&e)) {
        return kDataError;
    }
    if (dynamic_cast<const Error*>(&e)) return kConfigError;
    return kDataError;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"metaood: meta-learned few-shot out-of-distribution detection"};
    app.set_version_flag("--version", std::string(METAOOD_VERSION) + " (" + git_revision() + ")");
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "config file (INI: [section] key = value)");
        sub->add_option("--set", overrides, "override a config value: section.key=value")->type_name("S.K=V");
    };
    // flag -> (section, key)
    std::vector<std::tuple<std::string, std::string, std::string>> flags;  // value, section, key
    std::map<std::string, std::string> flag_values;
    auto flag = [&](CLI::App* sub, const std::string& name, const std::string& section, const std::string& key,
                    const std::string& help) {
        const std::string id = sub->get_name() + "/" + name;
        sub->add_option(name, flag_values[id], help);
        flags.emplace_back(id, section, key);
    };
    std::map<std::string, bool> switch_values;
    auto toggle = [&](CLI::App* sub, const std::string& name, const std::string& section, const std::string& key,
                      const std::string& help) {
        const std::string id = sub->get_name() + "/" + name;
        switch_values[id] = false;
        sub->add_flag(name, switch_values[id], help);
        flags.emplace_back(id, section, key);
    };

    CLI::App* train_cmd = app.add_subcommand("train", "meta-train an encoder on an EPDS dataset");
    add_common(train_cmd);
    flag(train_cmd, "--data", "data", "path", "EPDS dataset");
    flag(train_cmd, "--out", "output", "dir", "output directory");
    flag(train_cmd, "--seed", "train", "seed", "run seed");

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on fixed episodes");
    add_common(eval_cmd);
    flag(eval_cmd, "--checkpoint", "eval", "checkpoint", "checkpoint file");
    flag(eval_cmd, "--data", "eval", "data", "EPDS dataset");
    flag(eval_cmd, "--variant", "eval", "variant", "full_gmm|shared_cov|spherical|single_gaussian|kde");
    flag(eval_cmd, "--tau", "eval", "tau", "spherical variance");
    flag(eval_cmd, "--bandwidth", "eval", "bandwidth", "KDE bandwidth (<= 0: Scott's rule)");
    flag(eval_cmd, "--episodes", "eval", "episodes", "number of episodes (default 64)");
    flag(eval_cmd, "--seed", "eval", "seed", "episode seed");
    flag(eval_cmd, "--split", "eval", "split", "train|val|test (default test)");
    flag(eval_cmd, "--way", "eval", "way", "classes per episode");
    flag(eval_cmd, "--shot", "eval", "shot", "support rows per class");
    flag(eval_cmd, "--id-queries", "eval", "id_queries", "ID queries per class");
    flag(eval_cmd, "--ood-queries", "eval", "ood_queries", "OoD queries per episode");
    flag(eval_cmd, "--ood-mode", "eval", "ood_mode", "pooled|single_category");
    flag(eval_cmd, "--out", "eval", "out", "output directory for eval.csv and eval_manifest.json");
    toggle(eval_cmd, "--svg", "eval", "svg", "also write a score histogram SVG");

    CLI::App* score_cmd = app.add_subcommand("score", "score query rows against a labeled support set");
    add_common(score_cmd);
    flag(score_cmd, "--checkpoint", "score", "checkpoint", "checkpoint file");
    flag(score_cmd, "--support", "score", "support", "support CSV with a label column");
    flag(score_cmd, "--query", "score", "query", "query CSV");
    flag(score_cmd, "--out", "score", "out", "output CSV");
    flag(score_cmd, "--label-column", "score", "label_column", "label column name (default label)");
    flag(score_cmd, "--variant", "score", "variant", "density model");
    flag(score_cmd, "--gmm-json", "score", "gmm_json", "dump the adapted mixture as JSON");

    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic task family");
    add_common(synth_cmd);
    flag(synth_cmd, "--out", "synth", "out", "output EPDS path");
    flag(synth_cmd, "--seed", "synth", "seed", "generator seed");

    CLI::App* report_cmd = app.add_subcommand("report", "summarize a run directory");
    std::string run_dir;
    report_cmd->add_option("run", run_dir, "run directory")->required();

    std::vector<std::string> argv_tail(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(argv_tail.begin(), argv_tail.end());
    try {
        app.parse(argv_tail);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (report_cmd->parsed()) return cmd_report(run_dir);
        CLI::App* chosen = app.get_subcommands().front();
        Schema schema = chosen == train_cmd  ? train_schema()
                        : chosen == eval_cmd ? eval_schema()
                        : chosen == score_cmd ? score_schema()
                                              : synth_schema();
        Config cfg = make_config(config_path, std::move(schema), overrides);
        for (const auto& [id, section, key] : flags) {
            if (id.rfind(chosen->get_name() + "/", 0) != 0) continue;
            const std::string name = id.substr(chosen->get_name().size() + 1);
            if (chosen->count(name) == 0) continue;
            if (switch_values.contains(id)) cfg.set(section, key, switch_values[id] ? "true" : "false");
            else cfg.set(section, key, flag_values[id]);
        }
        if (chosen == train_cmd) return cmd_train(cfg);
        if (chosen == eval_cmd) return cmd_eval(cfg);
        if (chosen == score_cmd) return cmd_score(cfg);
        return cmd_synth(cfg);
    } catch (const std::exception& e) {
        const int code = classify_failure(e);
        log().error("{}", e.what());
        return code;
    }
}

}  // namespace metaood::cli
